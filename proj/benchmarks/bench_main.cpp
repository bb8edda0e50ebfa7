#include <benchmark/benchmark.h>

#include <random>

#include "bingan/eval.hpp"
#include "bingan/losses.hpp"
#include "bingan/train.hpp"

using namespace bingan;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, bool grad = false) {
  Tensor t(shape, 0.0, grad);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  for (double& x : t.data()) x = n(rng);
  return t;
}

BitMatrix random_codes(std::size_t n, std::size_t bits, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bipolar v(n * bits);
  for (auto& x : v) x = (rng() & 1) ? 1 : -1;
  return BitMatrix::pack(v, n, bits);
}

// 64×C×16×16 input, 3×3 kernel, C -> C channels.
void BM_Conv2dForward(benchmark::State& state) {
  const std::size_t c = state.range(0);
  const Tensor x = random_tensor({64, c, 16, 16}, 1);
  const Tensor w = random_tensor({c, c, 3, 3}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, 1, 1).data().data());
  state.SetItemsProcessed(state.iterations() * 2 * 64 * c * c * 9 * 16 * 16);
}
BENCHMARK(BM_Conv2dForward)->Arg(24)->Arg(48)->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const std::size_t c = state.range(0);
  Tensor x = random_tensor({64, c, 16, 16}, 1, true);
  Tensor w = random_tensor({c, c, 3, 3}, 2, true);
  for (auto _ : state) {
    backward(sum(conv2d(x, w, 1, 1)));
    x.zero_grad();
    w.zero_grad();
  }
  state.SetItemsProcessed(state.iterations() * 6 * 64 * c * c * 9 * 16 * 16);
}
BENCHMARK(BM_Conv2dBackward)->Arg(24)->Arg(48)->Unit(benchmark::kMillisecond);

void BM_HammingSearch(benchmark::State& state) {
  const std::size_t n = state.range(0), bits = state.range(1);
  const BitMatrix db = random_codes(n, bits, 3);
  const BitMatrix q = random_codes(1, bits, 4);
  for (auto _ : state) benchmark::DoNotOptimize(hamming_search(q.row(0), db, 1000));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_HammingSearch)->Args({50000, 32})->Args({50000, 256})->Unit(benchmark::kMicrosecond);

void BM_MapRetrieval(benchmark::State& state) {
  const std::size_t n = 5000;
  const BitMatrix codes = random_codes(n, 32, 5);
  std::vector<std::int32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<std::int32_t>(i % 10);
  for (auto _ : state) benchmark::DoNotOptimize(map_retrieval(codes, labels, codes, labels).map_at_k);
}
BENCHMARK(BM_MapRetrieval)->Unit(benchmark::kMillisecond);

void BM_LossMac(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const Tensor s_f = softsign(random_tensor({n, 32}, 6, true), 0.001);
  const Tensor b_h = sign(random_tensor({n, 192}, 7));
  for (auto _ : state) {
    const Tensor l = loss_mac(s_f, b_h, 0.5);
    backward(l);
    benchmark::DoNotOptimize(l[0]);
  }
}
BENCHMARK(BM_LossMac)->Arg(64)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
  TrainConfig cfg;
  cfg.task = state.range(0) == 0 ? Task::kToy : Task::kRetrieval;
  cfg.code_bits = 16;
  const ImageSet data = synth_toy_retrieval(1, 16, 4, 16);
  Checkpoint ck = initialize(cfg, data.shape);
  std::vector<std::size_t> idx(cfg.batch_size);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const Tensor batch = to_tensor(data.pixels, data.shape, idx);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(ck, batch).l_total);
  state.SetLabel(cfg.task == Task::kToy ? "toy" : "retrieval desk");
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
