#include "bingan/losses.hpp"

#include <algorithm>
#include <cmath>

#include "bingan/errors.hpp"

namespace bingan {

namespace {

void require_codes(const Tensor& t, const char* what) {
  if (t.rank() != 2) throw DimensionError(std::string(what) + " must be N×D, got " + to_string(t.shape()));
}

void require_pairs(std::size_t n, const char* what) {
  if (n < 2) throw ContractError(std::string(what) + ": needs a batch of at least 2, got " + std::to_string(n));
}

// Row-major N×N Gram matrix of a constant code matrix.
std::vector<double> gram(const Tensor& codes) {
  const std::size_t n = codes.dim(0), m = codes.dim(1);
  const auto d = codes.data();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = k; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) dot += d[k * m + i] * d[j * m + i];
      out[k * n + j] = dot;
      out[j * n + k] = dot;
    }
  }
  return out;
}

// Sum over ordered pairs of (w_kj / sum(w)) · |<s_k, s_j>| / K, with w
// given off-diagonal. Uniform weights give the plain pairwise average.
Tensor weighted_pair_correlation(const Tensor& s_f, const std::vector<double>& w) {
  const std::size_t n = s_f.dim(0);
  const double k = static_cast<double>(s_f.dim(1));
  double z = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b) z += w[a * n + b];
  std::vector<double> coeff(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b) coeff[a * n + b] = w[a * n + b] / z / k;
  const Tensor dots = matmul(s_f, transpose(s_f));
  return sum(mul(abs(dots), Tensor({n, n}, std::move(coeff))));
}

}  // namespace

void RegularizerConfig::validate() const {
  if (lambda_dmr < 0.0 || lambda_bre < 0.0) throw ConfigError("regularizer weights must be >= 0");
  if (!(gamma > 0.0)) throw ConfigError("gamma must be > 0");
  if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
}

Tensor loss_dmr(const Tensor& b_h, const Tensor& s_f) {
  require_codes(b_h, "loss_dmr: b_h");
  require_codes(s_f, "loss_dmr: s_f");
  if (b_h.dim(0) != s_f.dim(0)) throw DimensionError("loss_dmr: b_h and s_f batch sizes differ");
  const std::size_t n = s_f.dim(0);
  require_pairs(n, "loss_dmr");
  const double m = static_cast<double>(b_h.dim(1));
  const double k = static_cast<double>(s_f.dim(1));

  std::vector<double> target = gram(stop_gradient(b_h));
  for (auto& v : target) v /= m;
  std::vector<double> mask(n * n, 0.0);
  const double inv_pairs = 1.0 / static_cast<double>(n * (n - 1));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b)
      if (a != b) mask[a * n + b] = inv_pairs;

  const Tensor low = scale(matmul(s_f, transpose(s_f)), 1.0 / k);
  const Tensor gap = abs(sub(Tensor({n, n}, std::move(target)), low));
  return sum(mul(gap, Tensor({n, n}, std::move(mask))));
}

Tensor loss_me(const Tensor& s_f) {
  require_codes(s_f, "loss_me: s_f");
  return mean(square(mean_rows(s_f)));
}

Tensor loss_ac(const Tensor& s_f) {
  require_codes(s_f, "loss_ac: s_f");
  const std::size_t n = s_f.dim(0);
  require_pairs(n, "loss_ac");
  return weighted_pair_correlation(s_f, std::vector<double>(n * n, 1.0));
}

AlphaWeights alpha_weights(const Tensor& b_h, double beta) {
  require_codes(b_h, "alpha_weights: b_h");
  if (!(beta > 0.0)) throw ConfigError("alpha_weights: beta must be > 0");
  AlphaWeights w;
  w.n = b_h.dim(0);
  const double m = static_cast<double>(b_h.dim(1));
  w.alpha = gram(b_h);
  for (std::size_t k = 0; k < w.n; ++k) {
    for (std::size_t j = 0; j < w.n; ++j) {
      double& a = w.alpha[k * w.n + j];
      a = (k == j) ? 0.0 : std::exp(-std::fabs(a) / (beta * m));
      w.z += a;
    }
  }
  return w;
}

Tensor loss_mac(const Tensor& s_f, const Tensor& b_h, double beta) {
  require_codes(s_f, "loss_mac: s_f");
  if (b_h.rank() != 2 || b_h.dim(0) != s_f.dim(0)) throw DimensionError("loss_mac: b_h and s_f batch sizes differ");
  require_pairs(s_f.dim(0), "loss_mac");
  AlphaWeights w = alpha_weights(stop_gradient(b_h), beta);
  // alpha / Z is scale free; dividing by the largest weight first makes
  // uniform weights exactly 1, so equal-distance batches reproduce loss_ac
  // bit for bit.
  const double top = *std::max_element(w.alpha.begin(), w.alpha.end());
  for (auto& a : w.alpha) a /= top;
  return weighted_pair_correlation(s_f, w.alpha);
}

Tensor loss_feature_matching(const Tensor& f_real, const Tensor& f_fake) {
  require_codes(f_real, "loss_feature_matching: f_real");
  if (f_real.shape() != f_fake.shape()) {
    throw DimensionError("loss_feature_matching: " + to_string(f_real.shape()) + " vs " +
                         to_string(f_fake.shape()));
  }
  return sum(square(sub(mean_rows(f_real), mean_rows(f_fake))));
}

Tensor loss_gan_d(const Tensor& logits_real, const Tensor& logits_fake) {
  return add(mean(softplus(scale(logits_real, -1.0))), mean(softplus(logits_fake)));
}

WeightedLoss total_loss(const LossTerms& parts, const RegularizerConfig& cfg) {
  if (cfg.lambda_dmr < 0.0 || cfg.lambda_bre < 0.0) throw ConfigError("total_loss: negative lambda");
  WeightedLoss out;
  out.total = add(add(parts.l_d, scale(parts.l_dmr, cfg.lambda_dmr)),
                  scale(add(parts.l_me, parts.l_mac), cfg.lambda_bre));
  out.breakdown.l_d = parts.l_d.item();
  out.breakdown.l_dmr = parts.l_dmr.item();
  out.breakdown.l_me = parts.l_me.item();
  out.breakdown.l_mac = parts.l_mac.item();
  out.breakdown.l_total = out.total.item();
  return out;
}

double compose_total(double l_d, double l_dmr, double l_me, double l_mac, const RegularizerConfig& cfg) {
  if (cfg.lambda_dmr < 0.0 || cfg.lambda_bre < 0.0) throw ConfigError("compose_total: negative lambda");
  return (l_d + l_dmr * cfg.lambda_dmr) + (l_me + l_mac) * cfg.lambda_bre;
}

std::string first_non_finite(const LossBreakdown& b) {
  const std::pair<const char*, double> terms[] = {{"l_d", b.l_d},     {"l_dmr", b.l_dmr},     {"l_me", b.l_me},
                                                  {"l_mac", b.l_mac}, {"l_total", b.l_total}, {"l_g", b.l_g}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) return name;
  }
  return {};
}

}  // namespace bingan
