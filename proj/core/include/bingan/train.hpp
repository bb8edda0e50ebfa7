#pragma once

// Alternating GAN training. Each step updates the discriminator on the
// regularised objective, then the generator on feature matching.
//
// Randomness is derived from (seed, purpose, index) so that initialisation,
// per-epoch shuffling and per-step noise are independent streams and a run
// resumed from a checkpoint follows the uninterrupted trajectory exactly.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "bingan/data.hpp"
#include "bingan/losses.hpp"
#include "bingan/nn.hpp"
#include "bingan/quantize.hpp"

namespace bingan {

enum class RegTarget { kReal, kFake, kBoth };

const char* to_string(RegTarget target);
RegTarget reg_target_from_string(const std::string& name);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  Task task = Task::kRetrieval;
  std::size_t code_bits = 0;  // 0: task default
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  std::size_t z_dim = 100;
  AdamConfig adam;
  RegularizerConfig reg;
  std::uint64_t seed = 0;
  RegTarget reg_target = RegTarget::kReal;
  ScaleProfile scale_profile = ScaleProfile::kDesk;
  std::size_t channel_divisor = 0;
  std::size_t gen_base_channels = 0;  // 0: 256 / divisor
  bool gen_batch_norm = true;
  std::size_t d_steps_per_g = 1;
  std::size_t max_steps = 0;  // 0: run every epoch to completion
  std::size_t checkpoint_every = 0;

  void validate() const;
  ArchitectureConfig architecture(const RasterShape& data) const;
  GeneratorConfig generator(const RasterShape& data) const;
};

/// `key = value` lines; '#' starts a comment. Unknown keys and malformed
/// values raise ConfigError naming the line.
TrainConfig parse_config(std::string_view text, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});
/// Canonical text form; parse_config(to_config_text(c)) == c.
std::string to_config_text(const TrainConfig& cfg);
/// Sets one key; used by the parser and by CLI overrides.
void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);

/// Adaptive-moment optimiser with bias correction.
///
/// A step on an all-zero gradient leaves parameters untouched only while
/// both moment estimates are zero (before any nonzero gradient was seen);
/// afterwards the first moment keeps moving parameters.
class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig cfg, const std::vector<Tensor>& params);

  void step(const std::vector<Tensor>& params);

  std::uint64_t steps() const { return t_; }
  const std::vector<std::vector<double>>& first_moment() const { return m_; }
  const std::vector<std::vector<double>>& second_moment() const { return v_; }
  const AdamConfig& config() const { return cfg_; }

  void restore(std::uint64_t t, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

  bool operator==(const Adam& o) const { return t_ == o.t_ && m_ == o.m_ && v_ == o.v_; }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Everything needed to continue training bit-exactly.
struct Checkpoint {
  TrainConfig config;
  std::uint64_t step = 0;
  Network generator;
  Network discriminator;
  Adam gen_opt;
  Adam disc_opt;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Freshly initialised networks and optimisers for data of `shape`.
Checkpoint initialize(const TrainConfig& cfg, const RasterShape& shape);

/// Independent substream for (seed, purpose, index).
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index);

/// N×z_dim noise, uniform on (-1, 1).
Tensor sample_noise(std::size_t n, std::size_t z_dim, std::mt19937_64& rng);

/// Hard codes of h and soft codes of f for the rows selected by the config.
struct RegularizerInputs {
  Tensor s_f;
  Tensor b_h;
};
RegularizerInputs regularizer_inputs(const DiscriminatorOutput& real, const DiscriminatorOutput& fake,
                                     RegTarget target, double gamma);

/// One discriminator update (d_steps_per_g of them) and one generator
/// update. real_batch holds N images in [-1, 1]. Throws NumericalError
/// naming the offending term when any loss is not finite.
LossBreakdown train_step(Checkpoint& state, const Tensor& real_batch);

struct LogEntry {
  std::uint64_t step;
  LossBreakdown loss;
};

void write_loss_csv(std::ostream& out, const std::vector<LogEntry>& log);
std::vector<LogEntry> read_loss_csv(std::istream& in);

struct TrainHooks {
  std::function<void(const LogEntry&)> on_step;
  std::function<void(const Checkpoint&)> on_checkpoint;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LogEntry> log;
};

/// Runs epochs over shuffled minibatches of the dataset's training pool
/// (pairs contribute both patches). Starts from `resume` when given.
TrainResult train(const TrainConfig& cfg, const Dataset& data, std::optional<Checkpoint> resume = std::nullopt,
                  const TrainHooks& hooks = {});

/// Copy with parameters that do not record gradients.
Network frozen(const Network& net);

/// sign(f(x)) for every raster, packed.
BitMatrix extract_codes(const Network& disc, std::span<const std::uint8_t> rasters, const RasterShape& shape,
                        std::size_t batch = 256);
DescriptorFile extract_codes(const Network& disc, const ImageSet& images);

/// Held-out measurements of what the regularisers act on.
struct CodeDiagnostics {
  double distance_gap = 0.0;  // mean_pairs |<b_h,b_h'>/M - <s_f,s_f'>/K|
  double bit_balance = 0.0;   // (1/K) Σ_k (mean_n b_f,nk)^2 on hard codes
};
CodeDiagnostics diagnose_codes(const Network& disc, const Tensor& batch, double gamma);

}  // namespace bingan
