#pragma once

// Minibatch loss terms for training a discriminator whose intermediate
// layers double as binary descriptors.
//
// Notation used below, for a batch of N examples:
//   s_f  N×K  softsign of the low-dimensional layer f(x)
//   b_h  N×M  hard sign of the high-dimensional layer h(x), treated as a
//             constant (gradients never reach it)
// Pairwise terms sum over ordered pairs (k, j) with k != j.

#include <string>
#include <vector>

#include "bingan/tensor.hpp"

namespace bingan {

struct RegularizerConfig {
  double lambda_dmr = 0.05;
  double lambda_bre = 0.01;
  double gamma = 0.001;
  double beta = 0.5;

  void validate() const;
};

struct LossBreakdown {
  double l_d = 0.0;
  double l_dmr = 0.0;
  double l_me = 0.0;
  double l_mac = 0.0;
  double l_total = 0.0;
  double l_g = 0.0;
};

/// Mean over ordered pairs of |<b_h,k, b_h,j>/M - <s_f,k, s_f,j>/K|.
/// Differentiable in s_f only. Requires N >= 2.
Tensor loss_dmr(const Tensor& b_h, const Tensor& s_f);

/// Mean squared column mean of s_f (bit balance).
Tensor loss_me(const Tensor& s_f);

/// Mean over ordered pairs of |<s_f,k, s_f,j>| / K. Requires N >= 2.
Tensor loss_ac(const Tensor& s_f);

struct AlphaWeights {
  std::size_t n = 0;
  std::vector<double> alpha;  // row-major N×N, zero on the diagonal
  double z = 0.0;             // sum of the off-diagonal entries

  double at(std::size_t k, std::size_t j) const { return alpha[k * n + j]; }
};

/// alpha_kj = exp(-|<b_h,k, b_h,j>| / (beta·M)) for k != j.
AlphaWeights alpha_weights(const Tensor& b_h, double beta);

/// Sum over ordered pairs of (alpha_kj / Z) · |<s_f,k, s_f,j>| / K.
Tensor loss_mac(const Tensor& s_f, const Tensor& b_h, double beta);

/// ||mean(f_real) - mean(f_fake)||^2 over the batch axis.
Tensor loss_feature_matching(const Tensor& f_real, const Tensor& f_fake);

/// -mean log sigmoid(real) - mean log(1 - sigmoid(fake)), on logits.
Tensor loss_gan_d(const Tensor& logits_real, const Tensor& logits_fake);

struct LossTerms {
  Tensor l_d;
  Tensor l_dmr;
  Tensor l_me;
  Tensor l_mac;
};

struct WeightedLoss {
  Tensor total;
  LossBreakdown breakdown;  // l_g left at zero
};

/// l_d + lambda_dmr·l_dmr + lambda_bre·(l_me + l_mac). Throws ConfigError on
/// negative weights.
WeightedLoss total_loss(const LossTerms& parts, const RegularizerConfig& cfg);

/// Scalar form of the same composition.
double compose_total(double l_d, double l_dmr, double l_me, double l_mac, const RegularizerConfig& cfg);

/// Names the first non-finite term, or returns an empty string.
std::string first_non_finite(const LossBreakdown& b);

}  // namespace bingan
