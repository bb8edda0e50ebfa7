#pragma once

// Declarative layer stacks for the generator and the discriminator.
//
// A Network is an ordered list of LayerSpecs with one parameter slot per
// layer. Discriminators additionally name two taps: the low-dimensional
// code layer f(x) (K units) and the high-dimensional layer h(x) (M units,
// M > K). forward() returns the logit and both taps from a single pass.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bingan/tensor.hpp"

namespace bingan {

enum class LayerKind {
  kConv3x3,
  kNin1x1,
  kDense,
  kLeakyRelu,
  kTanh,
  kSigmoid,
  kAvgPoolGlobal,
  kReshape,
  kUpsample2x,
  kBatchStatsNorm,
};

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

struct LayerSpec {
  LayerKind kind = LayerKind::kLeakyRelu;
  std::size_t units = 0;  // output channels or dense units
  std::size_t stride = 1;
  std::size_t pad = 0;
  double slope = 0.2;
  Shape target;  // reshape only, per-example dims

  static LayerSpec conv3x3(std::size_t channels, std::size_t stride = 1, std::size_t pad = 1);
  static LayerSpec nin(std::size_t channels);
  static LayerSpec dense(std::size_t units);
  static LayerSpec leaky_relu(double slope = 0.2);
  static LayerSpec tanh();
  static LayerSpec sigmoid();
  static LayerSpec avg_pool_global();
  static LayerSpec reshape(Shape target);
  static LayerSpec upsample2x();
  static LayerSpec batch_stats_norm();

  bool operator==(const LayerSpec&) const = default;
};

enum class TapMode { kFlatten, kGlobalPool };

/// Output of layer `layer`, either flattened or spatially averaged.
struct Tap {
  std::size_t layer = 0;
  TapMode mode = TapMode::kFlatten;
  bool operator==(const Tap&) const = default;
};

class Network {
 public:
  Network() = default;
  // Validates that consecutive layer shapes compose; throws ConfigError.
  Network(Shape input, std::vector<LayerSpec> layers, std::optional<Tap> tap_f = std::nullopt,
          std::optional<Tap> tap_h = std::nullopt);

  // Deep copies: parameters are cloned, never shared.
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  // Gaussian weights with std sqrt(2 / fan_in) unless `std` > 0; zero
  // biases, unit normalisation gains.
  void init_params(std::mt19937_64& rng, double std = 0.0);

  const Shape& input_shape() const { return input_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  // Per-example output shape of layer i.
  const Shape& layer_shape(std::size_t i) const { return shapes_.at(i); }
  const Shape& output_shape() const;

  const std::optional<Tap>& tap_f() const { return tap_f_; }
  const std::optional<Tap>& tap_h() const { return tap_h_; }
  std::size_t tap_size(const Tap& tap) const;
  std::size_t code_bits() const;  // K
  std::size_t high_dim() const;   // M

  std::vector<Tensor>& layer_params(std::size_t i) { return params_.at(i); }
  const std::vector<Tensor>& layer_params(std::size_t i) const { return params_.at(i); }
  // Flat list, layer order then weight before bias.
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  Shape input_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<std::vector<Tensor>> params_;
  std::optional<Tap> tap_f_;
  std::optional<Tap> tap_h_;
};

/// Parameter shapes a layer declares for a given per-example input shape.
std::vector<Shape> layer_param_shapes(const LayerSpec& spec, const Shape& input);
/// Per-example output shape; throws ConfigError when the layer cannot
/// accept `input`.
Shape layer_output_shape(const LayerSpec& spec, const Shape& input);

enum class Task { kRetrieval, kMatching, kToy };
enum class ScaleProfile { kPaper, kDesk };

const char* to_string(Task task);
Task task_from_string(const std::string& name);
const char* to_string(ScaleProfile profile);
ScaleProfile profile_from_string(const std::string& name);

struct ArchitectureConfig {
  Task task = Task::kRetrieval;
  std::size_t code_bits = 32;  // retrieval and toy; matching derives K
  ScaleProfile profile = ScaleProfile::kPaper;
  std::size_t channel_divisor = 0;  // 0: 1 for paper, 4 for desk
  std::size_t image_size = 0;       // 0: 32 paper, 16 desk, 8 toy
  std::size_t image_channels = 0;   // 0: 3 retrieval, 1 matching / toy
  bool allow_any_code_bits = false;

  std::size_t divisor() const;
  std::size_t size() const;
  std::size_t channels() const;
};

Network build_discriminator(const ArchitectureConfig& cfg);

struct GeneratorConfig {
  std::size_t z_dim = 100;
  Shape out_shape{3, 32, 32};  // C×H×W, H = W = 4·2^k
  std::size_t base_channels = 256;
  bool batch_norm = true;
};

Network build_generator(const GeneratorConfig& cfg);

struct DiscriminatorOutput {
  Tensor logit;  // N×1
  Tensor f;      // N×K
  Tensor h;      // N×M
};

/// Plain output of the whole stack.
Tensor run(const Network& net, const Tensor& batch);
/// Output of layers [0, last].
Tensor run_until(const Network& net, const Tensor& batch, std::size_t last);
/// Logit and both taps in one pass. Requires taps.
DiscriminatorOutput forward(const Network& net, const Tensor& batch);

}  // namespace bingan
