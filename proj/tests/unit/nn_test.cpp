#include <gtest/gtest.h>

#include <random>

#include "bingan/errors.hpp"
#include "bingan/nn.hpp"

using namespace bingan;

namespace {

ArchitectureConfig full_scale(Task task, std::size_t bits) {
  ArchitectureConfig a;
  a.task = task;
  a.code_bits = bits;
  a.profile = ScaleProfile::kPaper;
  return a;
}

}  // namespace

TEST(Nn, RetrievalFullScaleShapes) {
  for (std::size_t bits : {16u, 32u, 64u}) {
    const Network d = build_discriminator(full_scale(Task::kRetrieval, bits));
    EXPECT_EQ(d.input_shape(), (Shape{3, 32, 32}));
    EXPECT_EQ(d.code_bits(), bits);
    EXPECT_EQ(d.high_dim(), 192u);
    EXPECT_EQ(d.output_shape(), (Shape{1}));
  }
  EXPECT_THROW(build_discriminator(full_scale(Task::kRetrieval, 24)), ConfigError);
}

TEST(Nn, MatchingFullScaleShapes) {
  const Network d = build_discriminator(full_scale(Task::kMatching, 0));
  EXPECT_EQ(d.input_shape(), (Shape{1, 32, 32}));
  EXPECT_EQ(d.code_bits(), 256u);
  EXPECT_EQ(d.high_dim(), 9216u);
  EXPECT_THROW(build_discriminator(full_scale(Task::kMatching, 128)), ConfigError);
}

TEST(Nn, DeskProfileScalesChannels) {
  ArchitectureConfig a;
  a.task = Task::kRetrieval;
  a.code_bits = 16;
  a.profile = ScaleProfile::kDesk;
  const Network d = build_discriminator(a);
  EXPECT_EQ(d.input_shape(), (Shape{3, 16, 16}));
  EXPECT_EQ(d.high_dim(), 48u);
  EXPECT_EQ(d.layer_shape(0), (Shape{24, 16, 16}));
}

TEST(Nn, ForwardProducesTapsPerExample) {
  ArchitectureConfig a;
  a.task = Task::kToy;
  a.code_bits = 8;
  a.image_size = 8;
  a.image_channels = 1;
  Network d = build_discriminator(a);
  std::mt19937_64 rng(1);
  d.init_params(rng);
  const DiscriminatorOutput out = forward(d, Tensor({5, 1, 8, 8}, 0.3));
  EXPECT_EQ(out.logit.shape(), (Shape{5, 1}));
  EXPECT_EQ(out.f.shape(), (Shape{5, 8}));
  EXPECT_EQ(out.h.shape(), (Shape{5, d.high_dim()}));
  EXPECT_THROW(forward(d, Tensor({5, 1, 9, 9})), DimensionError);
}

TEST(Nn, TapsMustComeInPairsAndCompress) {
  const std::vector<LayerSpec> layers{LayerSpec::dense(4), LayerSpec::leaky_relu(), LayerSpec::dense(8)};
  EXPECT_THROW(Network({3}, layers, Tap{0, TapMode::kFlatten}, std::nullopt), ConfigError);
  // f (8 units) wider than h (4 units).
  EXPECT_THROW(Network({3}, layers, Tap{2, TapMode::kFlatten}, Tap{1, TapMode::kFlatten}), ConfigError);
  EXPECT_THROW(Network({3}, layers, Tap{7, TapMode::kFlatten}, Tap{1, TapMode::kFlatten}), ConfigError);
}

TEST(Nn, CopyIsDeep) {
  Network a({4}, {LayerSpec::dense(3)});
  std::mt19937_64 rng(2);
  a.init_params(rng);
  Network b = a;
  b.layer_params(0)[0].data()[0] += 1.0;
  EXPECT_NE(a.layer_params(0)[0][0], b.layer_params(0)[0][0]);
}

TEST(Nn, GeneratorOutputsImagesInRange) {
  GeneratorConfig g;
  g.z_dim = 10;
  g.out_shape = {3, 16, 16};
  g.base_channels = 16;
  Network gen = build_generator(g);
  std::mt19937_64 rng(3);
  gen.init_params(rng);
  std::normal_distribution<double> n;
  std::vector<double> z(4 * 10);
  for (auto& v : z) v = n(rng);
  const Tensor out = run(gen, Tensor({4, 10}, z));
  EXPECT_EQ(out.shape(), (Shape{4, 3, 16, 16}));
  for (double v : out.data()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
  g.out_shape = {3, 12, 12};
  EXPECT_THROW(build_generator(g), ConfigError);
}

TEST(Nn, InitIsSeedDeterministic) {
  ArchitectureConfig a;
  a.task = Task::kToy;
  a.code_bits = 8;
  Network x = build_discriminator(a), y = build_discriminator(a);
  std::mt19937_64 r1(5), r2(5);
  x.init_params(r1);
  y.init_params(r2);
  const auto px = x.parameters(), py = y.parameters();
  ASSERT_EQ(px.size(), py.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    EXPECT_TRUE(std::equal(px[i].data().begin(), px[i].data().end(), py[i].data().begin()));
  }
}

TEST(Nn, NamesRoundTrip) {
  for (auto k : {LayerKind::kConv3x3, LayerKind::kNin1x1, LayerKind::kDense, LayerKind::kLeakyRelu, LayerKind::kTanh,
                 LayerKind::kSigmoid, LayerKind::kAvgPoolGlobal, LayerKind::kReshape, LayerKind::kUpsample2x,
                 LayerKind::kBatchStatsNorm}) {
    EXPECT_EQ(layer_kind_from_string(to_string(k)), k);
  }
  EXPECT_THROW(layer_kind_from_string("pool"), ConfigError);
  EXPECT_EQ(task_from_string("matching"), Task::kMatching);
  EXPECT_THROW(task_from_string("segmentation"), ConfigError);
}
