#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bingan/errors.hpp"
#include "bingan/tensor.hpp"

using namespace bingan;

namespace {

Tensor iota(Shape shape, double start = 0.0, bool grad = false) {
  std::vector<double> v(numel(shape));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = start + static_cast<double>(i);
  return Tensor(std::move(shape), std::move(v), grad);
}

// Direct 7-loop cross-correlation.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t f = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t ho = (h + 2 * pad - kh) / stride + 1, wo = (wd + 2 * pad - kw) / stride + 1;
  std::vector<double> out(n * f * ho * wo, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < f; ++o)
      for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t xx = 0; xx < wo; ++xx) {
          double acc = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                const long ix = static_cast<long>(xx * stride + j) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                acc += x[((b * c + ch) * h + iy) * wd + ix] * w[((o * c + ch) * kh + i) * kw + j];
              }
          out[((b * f + o) * ho + y) * wo + xx] = acc;
        }
  return out;
}

}  // namespace

TEST(Tensor, ScalarHasRankZero) {
  const Tensor s = Tensor::scalar(2.5);
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s.item(), 2.5);
}

TEST(Tensor, ConstructorRejectsWrongValueCount) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
}

TEST(Tensor, MatmulValues) {
  const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b({3, 2}, {7, 8, 9, 10, 11, 12});
  const Tensor c = matmul(a, b);
  ASSERT_EQ(c.shape(), (Shape{2, 2}));
  EXPECT_DOUBLE_EQ(c[0], 58);
  EXPECT_DOUBLE_EQ(c[1], 64);
  EXPECT_DOUBLE_EQ(c[2], 139);
  EXPECT_DOUBLE_EQ(c[3], 154);
}

TEST(Tensor, MatmulShapeMismatchThrows) {
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST(Tensor, ConvMatchesNaiveLoops) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  struct Case {
    Shape x, w;
    std::size_t stride, pad;
  };
  for (const Case& cs : {Case{{2, 3, 7, 6}, {4, 3, 3, 3}, 1, 1}, Case{{3, 2, 8, 8}, {5, 2, 3, 3}, 2, 1},
                         Case{{1, 4, 5, 5}, {2, 4, 3, 3}, 1, 0}, Case{{2, 3, 4, 4}, {6, 3, 1, 1}, 1, 0},
                         Case{{9, 2, 12, 12}, {3, 2, 3, 3}, 2, 0}}) {
    std::vector<double> xv(numel(cs.x)), wv(numel(cs.w));
    for (auto& v : xv) v = g(rng);
    for (auto& v : wv) v = g(rng);
    const Tensor x(cs.x, xv), w(cs.w, wv);
    const Tensor y = conv2d(x, w, cs.stride, cs.pad);
    const auto ref = naive_conv(x, w, cs.stride, cs.pad);
    ASSERT_EQ(y.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
  }
}

TEST(Tensor, ConvFloorConventionOnEvenInput) {
  const Tensor y = conv2d(Tensor({1, 1, 6, 6}, 1.0), Tensor({1, 1, 3, 3}, 1.0), 2, 0);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
}

TEST(Tensor, ConvKernelTooLargeThrows) {
  EXPECT_THROW(conv2d(Tensor({1, 1, 2, 2}), Tensor({1, 1, 3, 3}), 1, 0), DimensionError);
  EXPECT_THROW(conv2d(Tensor({1, 2, 4, 4}), Tensor({1, 3, 3, 3}), 1, 1), DimensionError);
}

TEST(Tensor, BackwardAccumulatesAndZeroGradResets) {
  Tensor x({3}, {1, 2, 3}, true);
  backward(sum(square(x)));
  EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
  backward(sum(square(x)));
  EXPECT_DOUBLE_EQ(x.grad()[1], 8.0);
  x.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()[1], 0.0);
}

TEST(Tensor, SharedSubexpressionGradientsAdd) {
  Tensor x = Tensor::scalar(3.0, true);
  const Tensor y = mul(x, x);
  backward(add(y, y));
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Tensor, BackwardRequiresScalar) {
  Tensor x({2}, {1, 2}, true);
  EXPECT_THROW(backward(square(x)), ContractError);
}

TEST(Tensor, StopGradientBlocksFlow) {
  Tensor x({2}, {1, -2}, true);
  backward(sum(mul(stop_gradient(x), x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -2.0);
}

TEST(Tensor, SignIsConstantAndMapsZeroToPlusOne) {
  Tensor x({3}, {-0.5, 0.0, 2.0}, true);
  const Tensor s = sign(x);
  EXPECT_FALSE(s.requires_grad());
  EXPECT_DOUBLE_EQ(s[0], -1.0);
  EXPECT_DOUBLE_EQ(s[1], 1.0);
  EXPECT_DOUBLE_EQ(s[2], 1.0);
}

TEST(Tensor, SoftsignValuesAndGammaCheck) {
  const Tensor y = softsign(Tensor({2}, {1.0, -3.0}), 1.0);
  EXPECT_DOUBLE_EQ(y[0], 0.5);
  EXPECT_DOUBLE_EQ(y[1], -0.75);
  EXPECT_THROW(softsign(Tensor({1}), 0.0), ConfigError);
}

TEST(Tensor, SoftplusIsStableForLargeInputs) {
  const Tensor y = softplus(Tensor({3}, {800.0, -800.0, 0.0}));
  EXPECT_DOUBLE_EQ(y[0], 800.0);
  EXPECT_NEAR(y[1], 0.0, 1e-300);
  EXPECT_NEAR(y[2], std::log(2.0), 1e-15);
}

TEST(Tensor, UpsampleAndPool) {
  const Tensor x = iota({1, 1, 2, 2});
  const Tensor up = upsample2x(x);
  ASSERT_EQ(up.shape(), (Shape{1, 1, 4, 4}));
  EXPECT_DOUBLE_EQ(up[0], 0);
  EXPECT_DOUBLE_EQ(up[1], 0);
  EXPECT_DOUBLE_EQ(up[2], 1);
  EXPECT_DOUBLE_EQ(up[15], 3);
  const Tensor p = avg_pool_global(up);
  EXPECT_DOUBLE_EQ(p[0], 1.5);
}

TEST(Tensor, BatchStatsNormStandardizesChannels) {
  const Tensor x = iota({4, 2}, 1.0);
  const Tensor y = batch_stats_norm(x, Tensor({2}, 1.0), Tensor({2}, 0.0), 0.0);
  for (std::size_t ch = 0; ch < 2; ++ch) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 4; ++i) m += y[i * 2 + ch] / 4;
    for (std::size_t i = 0; i < 4; ++i) v += (y[i * 2 + ch] - m) * (y[i * 2 + ch] - m) / 4;
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v, 1.0, 1e-12);
  }
}

TEST(Tensor, ConcatRowsAndShapes) {
  const Tensor c = concat_rows(iota({1, 2}), iota({2, 2}, 10));
  EXPECT_EQ(c.shape(), (Shape{3, 2}));
  EXPECT_DOUBLE_EQ(c[2], 10);
  EXPECT_THROW(concat_rows(iota({1, 2}), iota({1, 3})), DimensionError);
  EXPECT_THROW(reshape(iota({2, 3}), {4, 2}), DimensionError);
}

TEST(Tensor, AllFinite) {
  const std::vector<double> ok{1.0, -2.0}, bad{1.0, NAN};
  EXPECT_TRUE(all_finite(ok));
  EXPECT_FALSE(all_finite(bad));
}

TEST(Tensor, TapeOrdersInputsFirst) {
  Tensor x({2}, {1, 2}, true);
  const Tensor y = exp(x);
  const Tensor z = sum(add(y, x));
  const Tape tape = Tape::record(z);
  ASSERT_FALSE(tape.nodes().empty());
  EXPECT_EQ(tape.nodes().back(), z.node().get());
  std::size_t pos_x = 0, pos_y = 0;
  for (std::size_t i = 0; i < tape.nodes().size(); ++i) {
    if (tape.nodes()[i] == x.node().get()) pos_x = i;
    if (tape.nodes()[i] == y.node().get()) pos_y = i;
  }
  EXPECT_LT(pos_x, pos_y);
}

TEST(Tensor, DeepChainDoesNotOverflowStack) {
  Tensor x = Tensor::scalar(1.0, true);
  Tensor y = x;
  for (int i = 0; i < 200000; ++i) y = add_scalar(y, 0.0);
  backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
}
