#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bingan/checks/oracles.hpp"
#include "bingan/errors.hpp"
#include "bingan/losses.hpp"

using namespace bingan;

namespace {

Tensor t2(std::size_t n, std::size_t m, std::vector<double> v, bool grad = false) {
  return Tensor({n, m}, std::move(v), grad);
}

}  // namespace

TEST(Losses, DmrWorkedExample) {
  const Tensor b_h = t2(2, 4, {1, 1, 1, 1, 1, 1, -1, -1});
  const Tensor s_f = t2(2, 2, {1, 1, 1, 1});
  EXPECT_DOUBLE_EQ(loss_dmr(b_h, s_f).item(), 1.0);
}

TEST(Losses, MeWorkedExample) {
  EXPECT_DOUBLE_EQ(loss_me(t2(2, 2, {1, 1, 1, 1})).item(), 1.0);
  EXPECT_DOUBLE_EQ(loss_me(t2(2, 2, {1, -1, -1, 1})).item(), 0.0);
}

TEST(Losses, AcWorkedExample) {
  // Orthogonal rows: zero correlation.
  EXPECT_DOUBLE_EQ(loss_ac(t2(2, 2, {1, 1, 1, -1})).item(), 0.0);
  EXPECT_DOUBLE_EQ(loss_ac(t2(2, 2, {1, 1, -1, -1})).item(), 1.0);
}

TEST(Losses, PairwiseLossesNeedTwoRows) {
  EXPECT_THROW(loss_ac(t2(1, 2, {1, 1})), ContractError);
  EXPECT_THROW(loss_dmr(t2(1, 2, {1, 1}), t2(1, 2, {1, 1})), ContractError);
}

TEST(Losses, MatchesLoopOracles) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  for (std::size_t n = 2; n <= 8; ++n) {
    const std::size_t k = 5, m = 12;
    checks::Matrix s(n, std::vector<double>(k)), b(n, std::vector<double>(m));
    std::vector<double> sv, bv;
    for (auto& row : s)
      for (auto& v : row) sv.push_back(v = u(rng));
    for (auto& row : b)
      for (auto& v : row) bv.push_back(v = (rng() & 1) ? 1.0 : -1.0);
    const Tensor s_f = t2(n, k, sv), b_h = t2(n, m, bv);
    EXPECT_NEAR(loss_dmr(b_h, s_f).item(), checks::dmr_oracle(b, s), 1e-12);
    EXPECT_NEAR(loss_me(s_f).item(), checks::me_oracle(s), 1e-12);
    EXPECT_NEAR(loss_ac(s_f).item(), checks::ac_oracle(s), 1e-12);
    EXPECT_NEAR(loss_mac(s_f, b_h, 0.5).item(), checks::mac_oracle(s, b, 0.5), 1e-12);
  }
}

TEST(Losses, AlphaWeightsFavourOrthogonalPairs) {
  const Tensor b_h = t2(3, 4, {1, 1, 1, 1, 1, 1, -1, -1, 1, 1, 1, -1});
  const AlphaWeights a = alpha_weights(b_h, 0.5);
  EXPECT_DOUBLE_EQ(a.at(0, 0), 0.0);
  EXPECT_GT(a.at(0, 1), a.at(0, 2));  // dot 0 vs dot 2
  EXPECT_DOUBLE_EQ(a.at(0, 1), a.at(1, 0));
}

TEST(Losses, MacEqualsAcWhenAllDotsEqual) {
  // Rows of a 4x4 Hadamard matrix: every pairwise dot is 0.
  const Tensor b_h = t2(4, 4, {1, 1, 1, 1, 1, -1, 1, -1, 1, 1, -1, -1, 1, -1, -1, 1});
  const Tensor s_f = t2(4, 3, {0.3, -0.2, 0.9, -0.5, 0.1, 0.4, 0.7, 0.7, -0.1, -0.9, 0.2, 0.6});
  EXPECT_EQ(loss_mac(s_f, b_h, 0.5).item(), loss_ac(s_f).item());
}

TEST(Losses, MacApproachesAcForHugeBeta) {
  std::mt19937_64 rng(1);
  std::vector<double> sv(6 * 4), bv(6 * 10);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : sv) v = u(rng);
  for (auto& v : bv) v = (rng() & 1) ? 1.0 : -1.0;
  const Tensor s_f = t2(6, 4, sv), b_h = t2(6, 10, bv);
  EXPECT_NEAR(loss_mac(s_f, b_h, 1e9).item(), loss_ac(s_f).item(), 1e-6);
}

TEST(Losses, TotalEqualsDiscriminatorLossWithoutRegularizers) {
  const LossTerms terms{Tensor::scalar(0.7), Tensor::scalar(0.3), Tensor::scalar(0.2), Tensor::scalar(0.4)};
  RegularizerConfig cfg;
  cfg.lambda_dmr = 0.0;
  cfg.lambda_bre = 0.0;
  EXPECT_EQ(total_loss(terms, cfg).total.item(), 0.7);
  cfg.lambda_dmr = 0.05;
  cfg.lambda_bre = 0.01;
  const WeightedLoss w = total_loss(terms, cfg);
  EXPECT_EQ(w.total.item(), compose_total(0.7, 0.3, 0.2, 0.4, cfg));
  EXPECT_NEAR(w.total.item(), 0.7 + 0.05 * 0.3 + 0.01 * 0.6, 1e-15);
  cfg.lambda_bre = -1;
  EXPECT_THROW(total_loss(terms, cfg), ConfigError);
}

TEST(Losses, GanLossOnZeroLogitsIsTwoLogTwo) {
  EXPECT_NEAR(loss_gan_d(Tensor({3, 1}, 0.0), Tensor({3, 1}, 0.0)).item(), 2 * std::log(2.0), 1e-15);
}

TEST(Losses, FeatureMatchingValue) {
  const Tensor real = t2(2, 2, {1, 0, 3, 2}), fake = t2(2, 2, {0, 0, 0, 0});
  EXPECT_DOUBLE_EQ(loss_feature_matching(real, fake).item(), 4.0 + 1.0);
}

TEST(Losses, DmrGradientNeverReachesHardCodes) {
  Tensor h = t2(3, 4, {0.5, -0.2, 0.1, 0.9, -0.3, 0.4, 0.8, -0.6, 0.2, 0.2, -0.7, 0.3}, true);
  Tensor f = t2(3, 2, {0.4, -0.1, 0.3, 0.9, -0.5, 0.2}, true);
  const Tensor b_h = sign(h);
  backward(add(loss_dmr(b_h, softsign(f, 0.001)), loss_mac(softsign(f, 0.001), b_h, 0.5)));
  for (double g : h.grad()) EXPECT_EQ(g, 0.0);
  double norm = 0;
  for (double g : f.grad()) norm += g * g;
  EXPECT_GT(norm, 0.0);
}

TEST(Losses, FirstNonFiniteNamesTerm) {
  LossBreakdown b;
  EXPECT_EQ(first_non_finite(b), "");
  b.l_mac = NAN;
  EXPECT_EQ(first_non_finite(b), "l_mac");
}

TEST(Losses, RegularizerConfigValidation) {
  RegularizerConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.gamma = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.beta = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
