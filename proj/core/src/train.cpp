#include "bingan/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "bingan/errors.hpp"
#include "bingan/io.hpp"

namespace bingan {

namespace {

constexpr char kCheckpointMagic[] = "BGCK";
constexpr std::uint32_t kCheckpointVersion = 1;

enum StreamPurpose : std::uint64_t {
  kInitGenerator = 1,
  kInitDiscriminator = 2,
  kShuffle = 3,
  kNoiseDiscriminator = 4,
  kNoiseGenerator = 5,
};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError("bad value '" + value + "' for key '" + key + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("bad boolean '" + value + "' for key '" + key + "'");
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// ---- network / optimiser serialisation --------------------------------------

void write_shape(io::ByteWriter& w, const Shape& s) {
  w.u32(static_cast<std::uint32_t>(s.size()));
  for (auto d : s) w.u64(d);
}

Shape read_shape(io::ByteReader& r) {
  const std::uint32_t rank = r.u32();
  if (rank > 8) r.fail("implausible tensor rank " + std::to_string(rank));
  Shape s(rank);
  for (auto& d : s) d = r.u64();
  return s;
}

void write_network(io::ByteWriter& w, const Network& net) {
  write_shape(w, net.input_shape());
  w.u32(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& spec : net.layers()) {
    w.str(to_string(spec.kind));
    w.u64(spec.units);
    w.u64(spec.stride);
    w.u64(spec.pad);
    w.f64(spec.slope);
    write_shape(w, spec.target);
  }
  w.u8(net.tap_f() ? 1 : 0);
  if (net.tap_f()) {
    for (const auto& tap : {*net.tap_f(), *net.tap_h()}) {
      w.u64(tap.layer);
      w.u8(tap.mode == TapMode::kGlobalPool ? 1 : 0);
    }
  }
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto& params = net.layer_params(i);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
      write_shape(w, p.shape());
      for (double v : p.data()) w.f64(v);
    }
  }
}

Network read_network(io::ByteReader& r) {
  const std::size_t at = r.offset();
  const Shape input = read_shape(r);
  const std::uint32_t n_layers = r.u32();
  if (n_layers > 4096) r.fail("implausible layer count");
  std::vector<LayerSpec> layers(n_layers);
  for (auto& spec : layers) {
    try {
      spec.kind = layer_kind_from_string(r.str());
    } catch (const ConfigError& e) {
      r.fail(e.what());
    }
    spec.units = r.u64();
    spec.stride = r.u64();
    spec.pad = r.u64();
    spec.slope = r.f64();
    spec.target = read_shape(r);
  }
  std::optional<Tap> tap_f, tap_h;
  const std::uint8_t has_taps = r.u8();
  if (has_taps > 1) r.fail("bad tap flag");
  if (has_taps) {
    tap_f = Tap{r.u64(), r.u8() ? TapMode::kGlobalPool : TapMode::kFlatten};
    tap_h = Tap{r.u64(), r.u8() ? TapMode::kGlobalPool : TapMode::kFlatten};
  }
  Network net;
  try {
    net = Network(input, std::move(layers), tap_f, tap_h);
  } catch (const Error& e) {
    throw FormatError(std::string("invalid layer table: ") + e.what(), at);
  }
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    auto& params = net.layer_params(i);
    if (r.u32() != params.size()) r.fail("parameter count mismatch in layer " + std::to_string(i));
    for (auto& p : params) {
      if (read_shape(r) != p.shape()) r.fail("parameter shape mismatch in layer " + std::to_string(i));
      for (auto& v : p.data()) v = r.f64();
    }
  }
  return net;
}

void write_adam(io::ByteWriter& w, const Adam& opt) {
  w.u64(opt.steps());
  w.u32(static_cast<std::uint32_t>(opt.first_moment().size()));
  for (std::size_t i = 0; i < opt.first_moment().size(); ++i) {
    w.u64(opt.first_moment()[i].size());
    for (double v : opt.first_moment()[i]) w.f64(v);
    for (double v : opt.second_moment()[i]) w.f64(v);
  }
}

void read_adam(io::ByteReader& r, Adam& opt, const Network& net) {
  const std::uint64_t t = r.u64();
  const auto params = net.parameters();
  if (r.u32() != params.size()) r.fail("optimizer state does not match the network");
  std::vector<std::vector<double>> m(params.size()), v(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (r.u64() != params[i].size()) r.fail("optimizer moment size mismatch");
    m[i].resize(params[i].size());
    v[i].resize(params[i].size());
    for (auto& x : m[i]) x = r.f64();
    for (auto& x : v[i]) x = r.f64();
  }
  opt.restore(t, std::move(m), std::move(v));
}

void check_finite(const LossBreakdown& b, std::uint64_t step) {
  const std::string bad = first_non_finite(b);
  if (bad.empty()) return;
  std::ostringstream os;
  os << "non-finite " << bad << " at step " << step << " (l_d=" << b.l_d << " l_dmr=" << b.l_dmr
     << " l_me=" << b.l_me << " l_mac=" << b.l_mac << " l_total=" << b.l_total << " l_g=" << b.l_g << ")";
  throw NumericalError(os.str());
}

}  // namespace

// ---------------------------------------------------------------------------

const char* to_string(RegTarget target) {
  switch (target) {
    case RegTarget::kReal: return "real";
    case RegTarget::kFake: return "fake";
    case RegTarget::kBoth: return "both";
  }
  return "?";
}

RegTarget reg_target_from_string(const std::string& name) {
  if (name == "real") return RegTarget::kReal;
  if (name == "fake") return RegTarget::kFake;
  if (name == "both") return RegTarget::kBoth;
  throw ConfigError("unknown reg_target '" + name + "' (expected real|fake|both)");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2 (pairwise losses need pairs)");
  if (z_dim == 0) throw ConfigError("z_dim must be >= 1");
  if (d_steps_per_g == 0) throw ConfigError("d_steps_per_g must be >= 1");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (adam.beta1 < 0.0 || adam.beta1 >= 1.0 || adam.beta2 < 0.0 || adam.beta2 >= 1.0) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  reg.validate();
}

ArchitectureConfig TrainConfig::architecture(const RasterShape& data) const {
  if (data.h != data.w) throw ConfigError("images must be square");
  ArchitectureConfig a;
  a.task = task;
  a.code_bits = code_bits;
  a.profile = scale_profile;
  a.channel_divisor = channel_divisor;
  a.image_size = data.h;
  a.image_channels = data.c;
  return a;
}

GeneratorConfig TrainConfig::generator(const RasterShape& data) const {
  GeneratorConfig g;
  g.z_dim = z_dim;
  g.out_shape = {data.c, data.h, data.w};
  const std::size_t div = architecture(data).divisor();
  g.base_channels = gen_base_channels != 0 ? gen_base_channels : std::max<std::size_t>(256 / div, 8);
  if (task == Task::kToy && gen_base_channels == 0) g.base_channels = 16;
  g.batch_norm = gen_batch_norm;
  return g;
}

void set_config_value(TrainConfig& c, const std::string& key, const std::string& value) {
  using U = std::size_t;
  if (key == "task") c.task = task_from_string(value);
  else if (key == "code_bits") c.code_bits = parse_number<U>(key, value);
  else if (key == "epochs") c.epochs = parse_number<U>(key, value);
  else if (key == "batch_size") c.batch_size = parse_number<U>(key, value);
  else if (key == "z_dim") c.z_dim = parse_number<U>(key, value);
  else if (key == "learning_rate") c.adam.learning_rate = parse_number<double>(key, value);
  else if (key == "adam_beta1") c.adam.beta1 = parse_number<double>(key, value);
  else if (key == "adam_beta2") c.adam.beta2 = parse_number<double>(key, value);
  else if (key == "adam_eps") c.adam.eps = parse_number<double>(key, value);
  else if (key == "lambda_dmr") c.reg.lambda_dmr = parse_number<double>(key, value);
  else if (key == "lambda_bre") c.reg.lambda_bre = parse_number<double>(key, value);
  else if (key == "gamma") c.reg.gamma = parse_number<double>(key, value);
  else if (key == "beta") c.reg.beta = parse_number<double>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "reg_target") c.reg_target = reg_target_from_string(value);
  else if (key == "scale_profile") c.scale_profile = profile_from_string(value);
  else if (key == "channel_divisor") c.channel_divisor = parse_number<U>(key, value);
  else if (key == "gen_base_channels") c.gen_base_channels = parse_number<U>(key, value);
  else if (key == "gen_batch_norm") c.gen_batch_norm = parse_bool(key, value);
  else if (key == "d_steps_per_g") c.d_steps_per_g = parse_number<U>(key, value);
  else if (key == "max_steps") c.max_steps = parse_number<U>(key, value);
  else if (key == "checkpoint_every") c.checkpoint_every = parse_number<U>(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig parse_config(std::string_view text, TrainConfig base) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    try {
      set_config_value(base, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string to_config_text(const TrainConfig& c) {
  std::ostringstream os;
  os << "task = " << to_string(c.task) << '\n'
     << "code_bits = " << c.code_bits << '\n'
     << "epochs = " << c.epochs << '\n'
     << "batch_size = " << c.batch_size << '\n'
     << "z_dim = " << c.z_dim << '\n'
     << "learning_rate = " << format_double(c.adam.learning_rate) << '\n'
     << "adam_beta1 = " << format_double(c.adam.beta1) << '\n'
     << "adam_beta2 = " << format_double(c.adam.beta2) << '\n'
     << "adam_eps = " << format_double(c.adam.eps) << '\n'
     << "lambda_dmr = " << format_double(c.reg.lambda_dmr) << '\n'
     << "lambda_bre = " << format_double(c.reg.lambda_bre) << '\n'
     << "gamma = " << format_double(c.reg.gamma) << '\n'
     << "beta = " << format_double(c.reg.beta) << '\n'
     << "seed = " << c.seed << '\n'
     << "reg_target = " << to_string(c.reg_target) << '\n'
     << "scale_profile = " << to_string(c.scale_profile) << '\n'
     << "channel_divisor = " << c.channel_divisor << '\n'
     << "gen_base_channels = " << c.gen_base_channels << '\n'
     << "gen_batch_norm = " << (c.gen_batch_norm ? "true" : "false") << '\n'
     << "d_steps_per_g = " << c.d_steps_per_g << '\n'
     << "max_steps = " << c.max_steps << '\n'
     << "checkpoint_every = " << c.checkpoint_every << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

Adam::Adam(AdamConfig cfg, const std::vector<Tensor>& params) : cfg_(cfg) {
  for (const auto& p : params) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step(const std::vector<Tensor>& params) {
  if (params.size() != m_.size()) throw ContractError("Adam::step: parameter list changed");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    const auto g = p.grad();
    auto data = p.data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < data.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      data[j] -= cfg_.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
}

void Adam::restore(std::uint64_t t, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) throw ContractError("Adam::restore: state size mismatch");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  io::ByteWriter w(kCheckpointMagic, kCheckpointVersion);
  w.str(to_config_text(ckpt.config));
  w.u64(ckpt.step);
  write_network(w, ckpt.generator);
  write_network(w, ckpt.discriminator);
  write_adam(w, ckpt.gen_opt);
  write_adam(w, ckpt.disc_opt);
  return std::move(w).finish();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, kCheckpointMagic, kCheckpointVersion);
  Checkpoint ckpt;
  const std::size_t cfg_at = r.offset();
  try {
    ckpt.config = parse_config(r.str());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad config echo: ") + e.what(), cfg_at);
  }
  ckpt.step = r.u64();
  ckpt.generator = read_network(r);
  ckpt.discriminator = read_network(r);
  ckpt.gen_opt = Adam(ckpt.config.adam, ckpt.generator.parameters());
  ckpt.disc_opt = Adam(ckpt.config.adam, ckpt.discriminator.parameters());
  read_adam(r, ckpt.gen_opt, ckpt.generator);
  read_adam(r, ckpt.disc_opt, ckpt.discriminator);
  r.expect_end();
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  io::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
  return std::mt19937_64(splitmix(splitmix(splitmix(seed) ^ purpose) ^ index));
}

Tensor sample_noise(std::size_t n, std::size_t z_dim, std::mt19937_64& rng) {
  std::vector<double> z(n * z_dim);
  for (auto& v : z) {
    // 53 random mantissa bits mapped to [0, 1), then to [-1, 1).
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = 2.0 * u - 1.0;
  }
  return Tensor({n, z_dim}, std::move(z));
}

Checkpoint initialize(const TrainConfig& cfg, const RasterShape& shape) {
  cfg.validate();
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.discriminator = build_discriminator(cfg.architecture(shape));
  ckpt.generator = build_generator(cfg.generator(shape));
  auto rng_d = substream(cfg.seed, kInitDiscriminator, 0);
  auto rng_g = substream(cfg.seed, kInitGenerator, 0);
  ckpt.discriminator.init_params(rng_d);
  ckpt.generator.init_params(rng_g);
  ckpt.gen_opt = Adam(cfg.adam, ckpt.generator.parameters());
  ckpt.disc_opt = Adam(cfg.adam, ckpt.discriminator.parameters());
  return ckpt;
}

RegularizerInputs regularizer_inputs(const DiscriminatorOutput& real, const DiscriminatorOutput& fake,
                                     RegTarget target, double gamma) {
  Tensor f, h;
  switch (target) {
    case RegTarget::kReal:
      f = real.f;
      h = real.h;
      break;
    case RegTarget::kFake:
      f = fake.f;
      h = fake.h;
      break;
    case RegTarget::kBoth:
      f = concat_rows(real.f, fake.f);
      h = concat_rows(real.h, fake.h);
      break;
  }
  return {softsign(f, gamma), sign(stop_gradient(h))};
}

LossBreakdown train_step(Checkpoint& state, const Tensor& real_batch) {
  const TrainConfig& cfg = state.config;
  Network& gen = state.generator;
  Network& disc = state.discriminator;
  const std::size_t n = real_batch.dim(0);
  if (n < 2) throw ContractError("train_step: batch needs at least 2 examples");
  const std::uint64_t step = state.step;

  LossBreakdown out;
  const auto disc_params = disc.parameters();
  for (std::size_t r = 0; r < cfg.d_steps_per_g; ++r) {
    auto rng = substream(cfg.seed, kNoiseDiscriminator, step * cfg.d_steps_per_g + r);
    const Tensor fake = stop_gradient(run(gen, sample_noise(n, cfg.z_dim, rng)));
    const DiscriminatorOutput on_real = forward(disc, real_batch);
    const DiscriminatorOutput on_fake = forward(disc, fake);
    const RegularizerInputs reg = regularizer_inputs(on_real, on_fake, cfg.reg_target, cfg.reg.gamma);
    const LossTerms terms{loss_gan_d(on_real.logit, on_fake.logit), loss_dmr(reg.b_h, reg.s_f),
                          loss_me(reg.s_f), loss_mac(reg.s_f, reg.b_h, cfg.reg.beta)};
    const WeightedLoss loss = total_loss(terms, cfg.reg);
    out = loss.breakdown;
    check_finite(out, step);
    disc.zero_grad();
    backward(loss.total);
    state.disc_opt.step(disc_params);
    disc.zero_grad();
  }

  auto rng = substream(cfg.seed, kNoiseGenerator, step);
  const Tensor fake = run(gen, sample_noise(n, cfg.z_dim, rng));
  const Tensor f_real = stop_gradient(forward(disc, real_batch).f);
  const Tensor l_g = loss_feature_matching(f_real, forward(disc, fake).f);
  out.l_g = l_g.item();
  check_finite(out, step);
  gen.zero_grad();
  backward(l_g);
  state.gen_opt.step(gen.parameters());
  gen.zero_grad();
  disc.zero_grad();

  ++state.step;
  return out;
}

// ---------------------------------------------------------------------------

void write_loss_csv(std::ostream& out, const std::vector<LogEntry>& log) {
  out << "step,l_d,l_dmr,l_me,l_mac,l_total,l_g\n";
  for (const auto& e : log) {
    const auto& l = e.loss;
    out << e.step << ',' << format_double(l.l_d) << ',' << format_double(l.l_dmr) << ',' << format_double(l.l_me)
        << ',' << format_double(l.l_mac) << ',' << format_double(l.l_total) << ',' << format_double(l.l_g) << '\n';
  }
}

std::vector<LogEntry> read_loss_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "step,l_d,l_dmr,l_me,l_mac,l_total,l_g") {
    throw DataError("loss log: missing header");
  }
  std::vector<LogEntry> log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 7) throw DataError("loss log: expected 7 columns in '" + line + "'");
    LogEntry e{};
    e.step = parse_number<std::uint64_t>("step", cells[0]);
    double* fields[] = {&e.loss.l_d, &e.loss.l_dmr, &e.loss.l_me, &e.loss.l_mac, &e.loss.l_total, &e.loss.l_g};
    for (int i = 0; i < 6; ++i) *fields[i] = parse_number<double>("loss", cells[i + 1]);
    log.push_back(e);
  }
  return log;
}

TrainResult train(const TrainConfig& cfg, const Dataset& data, std::optional<Checkpoint> resume,
                  const TrainHooks& hooks) {
  cfg.validate();
  RasterShape shape;
  const std::vector<std::uint8_t> pool = training_pool(data, shape);
  const std::size_t n_images = pool.size() / shape.size();
  if (n_images == 0) throw ConfigError("train: dataset is empty");

  TrainResult result;
  if (resume) {
    if (to_config_text(resume->config) != to_config_text(cfg)) {
      throw ConfigError("train: checkpoint was produced with a different configuration");
    }
    const Shape& in = resume->discriminator.input_shape();
    if (in != Shape{shape.c, shape.h, shape.w}) {
      throw ConfigError("train: checkpoint expects " + to_string(in) + " inputs");
    }
    result.checkpoint = std::move(*resume);
  } else {
    result.checkpoint = initialize(cfg, shape);
  }
  Checkpoint& state = result.checkpoint;

  const std::size_t steps_per_epoch = n_images / cfg.batch_size;
  if (steps_per_epoch == 0 && cfg.epochs > 0) {
    throw ConfigError("train: dataset of " + std::to_string(n_images) + " images is smaller than one batch");
  }
  std::uint64_t total = static_cast<std::uint64_t>(cfg.epochs) * steps_per_epoch;
  if (cfg.max_steps != 0) total = std::min<std::uint64_t>(total, cfg.max_steps);

  std::vector<std::size_t> order(n_images);
  std::uint64_t shuffled_epoch = ~std::uint64_t{0};
  while (state.step < total) {
    const std::uint64_t epoch = state.step / steps_per_epoch;
    const std::uint64_t pos = state.step % steps_per_epoch;
    if (epoch != shuffled_epoch) {
      for (std::size_t i = 0; i < n_images; ++i) order[i] = i;
      auto rng = substream(cfg.seed, kShuffle, epoch);
      std::shuffle(order.begin(), order.end(), rng);
      shuffled_epoch = epoch;
    }
    const std::span<const std::size_t> idx(order.data() + pos * cfg.batch_size, cfg.batch_size);
    const std::uint64_t step = state.step;
    const LossBreakdown loss = train_step(state, to_tensor(pool, shape, idx));
    result.log.push_back({step, loss});
    if (hooks.on_step) hooks.on_step(result.log.back());
    if (hooks.on_checkpoint && cfg.checkpoint_every != 0 && state.step % cfg.checkpoint_every == 0) {
      hooks.on_checkpoint(state);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

Network frozen(const Network& net) {
  Network copy(net);
  for (std::size_t i = 0; i < copy.layers().size(); ++i) {
    for (auto& p : copy.layer_params(i)) p.set_requires_grad(false);
  }
  return copy;
}

BitMatrix extract_codes(const Network& disc, std::span<const std::uint8_t> rasters, const RasterShape& shape,
                        std::size_t batch) {
  const Network net = frozen(disc);
  const std::size_t n = rasters.size() / shape.size();
  const std::size_t k = net.code_bits();
  std::vector<double> f_all;
  f_all.reserve(n * k);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += batch) {
    idx.clear();
    for (std::size_t i = start; i < std::min(n, start + batch); ++i) idx.push_back(i);
    const Tensor f = forward(net, to_tensor(rasters, shape, idx)).f;
    f_all.insert(f_all.end(), f.data().begin(), f.data().end());
  }
  return BitMatrix::from_signs(f_all, n, k);
}

DescriptorFile extract_codes(const Network& disc, const ImageSet& images) {
  DescriptorFile out;
  out.codes = extract_codes(disc, images.pixels, images.shape);
  out.labels = images.labels;
  return out;
}

CodeDiagnostics diagnose_codes(const Network& disc, const Tensor& batch, double gamma) {
  const Network net = frozen(disc);
  const DiscriminatorOutput out = forward(net, batch);
  CodeDiagnostics d;
  d.distance_gap = loss_dmr(sign(out.h), softsign(out.f, gamma)).item();
  const Tensor b_f = sign(out.f);
  const std::size_t n = b_f.dim(0), k = b_f.dim(1);
  for (std::size_t j = 0; j < k; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += b_f[i * k + j];
    col /= static_cast<double>(n);
    d.bit_balance += col * col;
  }
  d.bit_balance /= static_cast<double>(k);
  return d;
}

}  // namespace bingan
