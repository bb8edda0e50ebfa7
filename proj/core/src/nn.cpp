#include "bingan/nn.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "bingan/errors.hpp"

namespace bingan {

namespace {

constexpr std::array<std::pair<LayerKind, const char*>, 10> kKindNames{{
    {LayerKind::kConv3x3, "conv3x3"},
    {LayerKind::kNin1x1, "nin1x1"},
    {LayerKind::kDense, "dense"},
    {LayerKind::kLeakyRelu, "leaky_relu"},
    {LayerKind::kTanh, "tanh"},
    {LayerKind::kSigmoid, "sigmoid"},
    {LayerKind::kAvgPoolGlobal, "avg_pool_global"},
    {LayerKind::kReshape, "reshape"},
    {LayerKind::kUpsample2x, "upsample2x"},
    {LayerKind::kBatchStatsNorm, "batch_stats_norm"},
}};

[[noreturn]] void shape_error(const LayerSpec& spec, const Shape& input, const std::string& why) {
  throw ConfigError(std::string(to_string(spec.kind)) + " cannot take input " + to_string(input) + ": " + why);
}

Shape with_batch(std::size_t n, const Shape& per_example) {
  Shape s{n};
  s.insert(s.end(), per_example.begin(), per_example.end());
  return s;
}

Tensor apply_layer(const LayerSpec& spec, const std::vector<Tensor>& p, const Tensor& x) {
  switch (spec.kind) {
    case LayerKind::kConv3x3:
      return add_bias(conv2d(x, p[0], spec.stride, spec.pad), p[1]);
    case LayerKind::kNin1x1:
      return add_bias(conv2d(x, p[0], 1, 0), p[1]);
    case LayerKind::kDense:
      return add_bias(matmul(x.rank() == 2 ? x : flatten(x), p[0]), p[1]);
    case LayerKind::kLeakyRelu:
      return leaky_relu(x, spec.slope);
    case LayerKind::kTanh:
      return tanh(x);
    case LayerKind::kSigmoid:
      return sigmoid(x);
    case LayerKind::kAvgPoolGlobal:
      return avg_pool_global(x);
    case LayerKind::kReshape:
      return reshape(x, with_batch(x.dim(0), spec.target));
    case LayerKind::kUpsample2x:
      return upsample2x(x);
    case LayerKind::kBatchStatsNorm:
      return batch_stats_norm(x, p[0], p[1]);
  }
  throw ConfigError("unknown layer kind");
}

Tensor apply_tap(const Tap& tap, const Tensor& out) {
  if (tap.mode == TapMode::kGlobalPool) return avg_pool_global(out);
  return out.rank() == 2 ? out : flatten(out);
}

void check_input(const Network& net, const Tensor& batch) {
  const Shape& in = net.input_shape();
  if (batch.rank() != in.size() + 1 || !std::equal(in.begin(), in.end(), batch.shape().begin() + 1)) {
    throw DimensionError("network expects N×" + to_string(in) + " input, got " + to_string(batch.shape()));
  }
}

}  // namespace

const char* to_string(LayerKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (const auto& [k, n] : kKindNames) {
    if (name == n) return k;
  }
  throw ConfigError("unknown layer kind '" + name + "'");
}

LayerSpec LayerSpec::conv3x3(std::size_t channels, std::size_t stride, std::size_t pad) {
  return {LayerKind::kConv3x3, channels, stride, pad, 0.0, {}};
}
LayerSpec LayerSpec::nin(std::size_t channels) { return {LayerKind::kNin1x1, channels, 1, 0, 0.0, {}}; }
LayerSpec LayerSpec::dense(std::size_t units) { return {LayerKind::kDense, units, 1, 0, 0.0, {}}; }
LayerSpec LayerSpec::leaky_relu(double slope) { return {LayerKind::kLeakyRelu, 0, 1, 0, slope, {}}; }
LayerSpec LayerSpec::tanh() { return {LayerKind::kTanh, 0, 1, 0, 0.0, {}}; }
LayerSpec LayerSpec::sigmoid() { return {LayerKind::kSigmoid, 0, 1, 0, 0.0, {}}; }
LayerSpec LayerSpec::avg_pool_global() { return {LayerKind::kAvgPoolGlobal, 0, 1, 0, 0.0, {}}; }
LayerSpec LayerSpec::reshape(Shape target) { return {LayerKind::kReshape, 0, 1, 0, 0.0, std::move(target)}; }
LayerSpec LayerSpec::upsample2x() { return {LayerKind::kUpsample2x, 0, 1, 0, 0.0, {}}; }
LayerSpec LayerSpec::batch_stats_norm() { return {LayerKind::kBatchStatsNorm, 0, 1, 0, 0.0, {}}; }

std::vector<Shape> layer_param_shapes(const LayerSpec& spec, const Shape& input) {
  switch (spec.kind) {
    case LayerKind::kConv3x3:
      return {{spec.units, input.at(0), 3, 3}, {spec.units}};
    case LayerKind::kNin1x1:
      return {{spec.units, input.at(0), 1, 1}, {spec.units}};
    case LayerKind::kDense:
      return {{numel(input), spec.units}, {spec.units}};
    case LayerKind::kBatchStatsNorm:
      return {{input.at(0)}, {input.at(0)}};
    default:
      return {};
  }
}

Shape layer_output_shape(const LayerSpec& spec, const Shape& input) {
  switch (spec.kind) {
    case LayerKind::kConv3x3:
    case LayerKind::kNin1x1: {
      if (input.size() != 3) shape_error(spec, input, "needs C×H×W");
      if (spec.units == 0) shape_error(spec, input, "zero output channels");
      if (spec.stride == 0) shape_error(spec, input, "stride must be >= 1");
      const std::size_t k = spec.kind == LayerKind::kConv3x3 ? 3 : 1;
      const std::size_t pad = spec.kind == LayerKind::kConv3x3 ? spec.pad : 0;
      const std::size_t stride = spec.kind == LayerKind::kConv3x3 ? spec.stride : 1;
      if (input[1] + 2 * pad < k || input[2] + 2 * pad < k) shape_error(spec, input, "kernel does not fit");
      return {spec.units, (input[1] + 2 * pad - k) / stride + 1, (input[2] + 2 * pad - k) / stride + 1};
    }
    case LayerKind::kDense:
      if (spec.units == 0) shape_error(spec, input, "zero units");
      return {spec.units};
    case LayerKind::kLeakyRelu:
    case LayerKind::kTanh:
    case LayerKind::kSigmoid:
      return input;
    case LayerKind::kAvgPoolGlobal:
      if (input.size() != 3) shape_error(spec, input, "needs C×H×W");
      return {input[0]};
    case LayerKind::kReshape:
      if (numel(spec.target) != numel(input)) shape_error(spec, input, "element count differs from target");
      return spec.target;
    case LayerKind::kUpsample2x:
      if (input.size() != 3) shape_error(spec, input, "needs C×H×W");
      return {input[0], 2 * input[1], 2 * input[2]};
    case LayerKind::kBatchStatsNorm:
      if (input.size() != 1 && input.size() != 3) shape_error(spec, input, "needs C or C×H×W");
      return input;
  }
  shape_error(spec, input, "unknown kind");
}

// ---------------------------------------------------------------------------

Network::Network(Shape input, std::vector<LayerSpec> layers, std::optional<Tap> tap_f, std::optional<Tap> tap_h)
    : input_(std::move(input)), layers_(std::move(layers)), tap_f_(tap_f), tap_h_(tap_h) {
  if (layers_.empty()) throw ConfigError("network needs at least one layer");
  Shape cur = input_;
  for (const auto& spec : layers_) {
    std::vector<Tensor> p;
    for (auto& s : layer_param_shapes(spec, cur)) p.emplace_back(std::move(s), 0.0, true);
    params_.push_back(std::move(p));
    cur = layer_output_shape(spec, cur);
    shapes_.push_back(cur);
  }
  for (const auto* tap : {&tap_f_, &tap_h_}) {
    if (!*tap) continue;
    if ((*tap)->layer >= layers_.size()) throw ConfigError("tap refers to a missing layer");
    if ((*tap)->mode == TapMode::kGlobalPool && shapes_[(*tap)->layer].size() != 3) {
      throw ConfigError("pooled tap needs a spatial layer");
    }
  }
  if (tap_f_.has_value() != tap_h_.has_value()) throw ConfigError("taps f and h come as a pair");
  if (tap_f_ && !(high_dim() > code_bits())) {
    throw ConfigError("high-dimensional tap (M=" + std::to_string(high_dim()) +
                      ") must be wider than the code tap (K=" + std::to_string(code_bits()) + ")");
  }
}

Network::Network(const Network& other)
    : input_(other.input_),
      layers_(other.layers_),
      shapes_(other.shapes_),
      tap_f_(other.tap_f_),
      tap_h_(other.tap_h_) {
  for (const auto& layer : other.params_) {
    std::vector<Tensor> p;
    for (const auto& t : layer) {
      Tensor c = t.detach();
      c.set_requires_grad(t.requires_grad());
      p.push_back(std::move(c));
    }
    params_.push_back(std::move(p));
  }
}

Network& Network::operator=(const Network& other) {
  if (this != &other) *this = Network(other);
  return *this;
}

void Network::init_params(std::mt19937_64& rng, double std) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto& p = params_[i];
    switch (layers_[i].kind) {
      case LayerKind::kConv3x3:
      case LayerKind::kNin1x1:
      case LayerKind::kDense: {
        const Shape& w = p[0].shape();
        const std::size_t fan_in = layers_[i].kind == LayerKind::kDense ? w[0] : w[1] * w[2] * w[3];
        const double s = std > 0.0 ? std : std::sqrt(2.0 / static_cast<double>(fan_in));
        std::normal_distribution<double> normal(0.0, s);
        for (auto& v : p[0].data()) v = normal(rng);
        std::fill(p[1].data().begin(), p[1].data().end(), 0.0);
        break;
      }
      case LayerKind::kBatchStatsNorm:
        std::fill(p[0].data().begin(), p[0].data().end(), 1.0);
        std::fill(p[1].data().begin(), p[1].data().end(), 0.0);
        break;
      default:
        break;
    }
  }
}

const Shape& Network::output_shape() const { return shapes_.back(); }

std::size_t Network::tap_size(const Tap& tap) const {
  const Shape& s = shapes_.at(tap.layer);
  return tap.mode == TapMode::kGlobalPool ? s.at(0) : numel(s);
}

std::size_t Network::code_bits() const {
  if (!tap_f_) throw ContractError("network has no code tap");
  return tap_size(*tap_f_);
}

std::size_t Network::high_dim() const {
  if (!tap_h_) throw ContractError("network has no high-dimensional tap");
  return tap_size(*tap_h_);
}

std::vector<Tensor> Network::parameters() const {
  std::vector<Tensor> out;
  for (const auto& layer : params_) out.insert(out.end(), layer.begin(), layer.end());
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : parameters()) n += t.size();
  return n;
}

void Network::zero_grad() {
  for (auto& layer : params_)
    for (auto& t : layer) t.zero_grad();
}

// ---------------------------------------------------------------------------

const char* to_string(Task task) {
  switch (task) {
    case Task::kRetrieval: return "retrieval";
    case Task::kMatching: return "matching";
    case Task::kToy: return "toy";
  }
  return "?";
}

Task task_from_string(const std::string& name) {
  if (name == "retrieval") return Task::kRetrieval;
  if (name == "matching") return Task::kMatching;
  if (name == "toy") return Task::kToy;
  throw ConfigError("unknown task '" + name + "' (expected retrieval|matching|toy)");
}

const char* to_string(ScaleProfile profile) { return profile == ScaleProfile::kPaper ? "paper" : "desk"; }

ScaleProfile profile_from_string(const std::string& name) {
  if (name == "paper") return ScaleProfile::kPaper;
  if (name == "desk") return ScaleProfile::kDesk;
  throw ConfigError("unknown scale profile '" + name + "' (expected paper|desk)");
}

std::size_t ArchitectureConfig::divisor() const {
  if (channel_divisor != 0) return channel_divisor;
  return profile == ScaleProfile::kDesk ? 4 : 1;
}

std::size_t ArchitectureConfig::size() const {
  if (image_size != 0) return image_size;
  if (task == Task::kToy) return 8;
  return profile == ScaleProfile::kDesk ? 16 : 32;
}

std::size_t ArchitectureConfig::channels() const {
  if (image_channels != 0) return image_channels;
  return task == Task::kRetrieval ? 3 : 1;
}

Network build_discriminator(const ArchitectureConfig& cfg) {
  const std::size_t d = cfg.divisor();
  const auto ch = [d](std::size_t full) {
    if (full % d != 0 || full / d == 0) {
      throw ConfigError("channel divisor " + std::to_string(d) + " does not divide " + std::to_string(full));
    }
    return full / d;
  };
  const Shape input{cfg.channels(), cfg.size(), cfg.size()};
  const auto lrelu = LayerSpec::leaky_relu(0.2);
  std::vector<LayerSpec> layers;

  if (cfg.task == Task::kToy) {
    const std::size_t k = cfg.code_bits == 0 ? 8 : cfg.code_bits;
    layers = {LayerSpec::conv3x3(8), lrelu, LayerSpec::conv3x3(8, 2, 1), lrelu, LayerSpec::conv3x3(16), lrelu,
              LayerSpec::nin(32), lrelu, LayerSpec::avg_pool_global(), LayerSpec::dense(k), lrelu,
              LayerSpec::dense(1)};
    return Network(input, std::move(layers), Tap{9, TapMode::kFlatten}, Tap{8, TapMode::kFlatten});
  }

  // Shared conv trunk: three 96-channel layers, the last one strided, then
  // four wide layers (strided third, unpadded fourth).
  const std::size_t narrow = ch(96);
  const std::size_t wide = ch(cfg.task == Task::kRetrieval ? 192 : 128);
  layers = {LayerSpec::conv3x3(narrow), lrelu, LayerSpec::conv3x3(narrow), lrelu,
            LayerSpec::conv3x3(narrow, 2, 1), lrelu, LayerSpec::conv3x3(wide), lrelu,
            LayerSpec::conv3x3(wide), lrelu, LayerSpec::conv3x3(wide, 2, 1), lrelu,
            LayerSpec::conv3x3(wide, 1, 0), lrelu};

  if (cfg.task == Task::kRetrieval) {
    std::size_t k = cfg.code_bits == 0 ? 32 : cfg.code_bits;
    if (!cfg.allow_any_code_bits && k != 16 && k != 32 && k != 64) {
      throw ConfigError("retrieval code_bits must be 16, 32 or 64, got " + std::to_string(k));
    }
    const std::size_t nin = ch(192);
    layers.insert(layers.end(), {LayerSpec::nin(nin), lrelu, LayerSpec::nin(nin), lrelu,
                                 LayerSpec::avg_pool_global(), LayerSpec::dense(k), lrelu, LayerSpec::dense(1)});
    // h: pooled last NiN (layer 18); f: code layer (layer 19).
    return Network(input, std::move(layers), Tap{19, TapMode::kFlatten}, Tap{18, TapMode::kFlatten});
  }

  const std::size_t nin_a = ch(256), nin_b = ch(128);
  if (cfg.code_bits != 0 && cfg.code_bits != nin_a) {
    throw ConfigError("matching code length is fixed by the NiN width (" + std::to_string(nin_a) + "), got " +
                      std::to_string(cfg.code_bits));
  }
  layers.insert(layers.end(), {LayerSpec::nin(nin_a), lrelu, LayerSpec::nin(nin_b), lrelu,
                               LayerSpec::avg_pool_global(), LayerSpec::dense(1)});
  // Both taps read the first NiN block (layer 15): f pooled, h flattened.
  return Network(input, std::move(layers), Tap{15, TapMode::kGlobalPool}, Tap{15, TapMode::kFlatten});
}

Network build_generator(const GeneratorConfig& cfg) {
  if (cfg.z_dim == 0) throw ConfigError("generator z_dim must be >= 1");
  if (cfg.out_shape.size() != 3) throw ConfigError("generator output must be C×H×W");
  const std::size_t c = cfg.out_shape[0], h = cfg.out_shape[1], w = cfg.out_shape[2];
  std::size_t blocks = 0;
  for (std::size_t s = 4; s < h; s *= 2) ++blocks;
  if (h != w || h < 4 || (std::size_t{4} << blocks) != h) {
    throw ConfigError("generator output " + to_string(cfg.out_shape) + " is not reachable by doubling 4x4");
  }
  if (cfg.base_channels == 0) throw ConfigError("generator base_channels must be >= 1");

  const auto relu = LayerSpec::leaky_relu(0.0);
  std::vector<LayerSpec> layers;
  std::size_t width = cfg.base_channels;
  layers.push_back(LayerSpec::dense(width * 16));
  layers.push_back(LayerSpec::reshape({width, 4, 4}));
  if (cfg.batch_norm) layers.push_back(LayerSpec::batch_stats_norm());
  layers.push_back(relu);
  for (std::size_t b = 0; b < blocks; ++b) {
    width = std::max<std::size_t>(width / 2, 8);
    layers.push_back(LayerSpec::upsample2x());
    layers.push_back(LayerSpec::conv3x3(width));
    if (cfg.batch_norm) layers.push_back(LayerSpec::batch_stats_norm());
    layers.push_back(relu);
  }
  layers.push_back(LayerSpec::conv3x3(c));
  layers.push_back(LayerSpec::tanh());
  return Network({cfg.z_dim}, std::move(layers));
}

// ---------------------------------------------------------------------------

Tensor run_until(const Network& net, const Tensor& batch, std::size_t last) {
  check_input(net, batch);
  if (last >= net.layers().size()) throw ContractError("run_until: layer index out of range");
  Tensor x = batch;
  for (std::size_t i = 0; i <= last; ++i) x = apply_layer(net.layers()[i], net.layer_params(i), x);
  return x;
}

Tensor run(const Network& net, const Tensor& batch) { return run_until(net, batch, net.layers().size() - 1); }

DiscriminatorOutput forward(const Network& net, const Tensor& batch) {
  check_input(net, batch);
  if (!net.tap_f() || !net.tap_h()) throw ContractError("forward: network has no f/h taps");
  DiscriminatorOutput out;
  Tensor x = batch;
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    x = apply_layer(net.layers()[i], net.layer_params(i), x);
    if (i == net.tap_f()->layer) out.f = apply_tap(*net.tap_f(), x);
    if (i == net.tap_h()->layer) out.h = apply_tap(*net.tap_h(), x);
  }
  out.logit = x;
  return out;
}

}  // namespace bingan
