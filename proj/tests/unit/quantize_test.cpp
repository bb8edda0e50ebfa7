#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "bingan/errors.hpp"
#include "bingan/quantize.hpp"

using namespace bingan;

namespace {

Bipolar random_bipolar(std::size_t n, std::mt19937_64& rng) {
  Bipolar b(n);
  for (auto& v : b) v = (rng() & 1) ? 1 : -1;
  return b;
}

}  // namespace

TEST(Quantize, SignVecMapsZeroToPlusOne) {
  const std::vector<double> v{-1.0, 0.0, -0.0, 3.0};
  EXPECT_EQ(sign_vec(v), (Bipolar{-1, 1, 1, 1}));
  const std::vector<double> bad{NAN};
  EXPECT_THROW(sign_vec(bad), DataError);
}

TEST(Quantize, SoftsignScalar) {
  EXPECT_DOUBLE_EQ(softsign(1.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(softsign_grad(1.0, 1.0), 0.25);
  EXPECT_NEAR(softsign(10.0, 0.001), 1.0, 1e-3);
  EXPECT_THROW(softsign(1.0, -1.0), ConfigError);
}

TEST(Quantize, HammingFromDotContracts) {
  EXPECT_EQ(hamming_from_dot(4, 4), 0);
  EXPECT_EQ(hamming_from_dot(-4, 4), 4);
  EXPECT_EQ(hamming_from_dot(0, 4), 2);
  EXPECT_THROW(hamming_from_dot(3, 4), ContractError);  // parity
  EXPECT_THROW(hamming_from_dot(6, 4), ContractError);  // bound
}

TEST(Quantize, PackIsMsbFirstWithZeroPadding) {
  Bipolar b(70, -1);
  b[0] = 1;
  b[64] = 1;
  const BitMatrix m = BitMatrix::pack(b, 1, 70);
  ASSERT_EQ(m.words_per_row(), 2u);
  EXPECT_EQ(m.row(0)[0], 1ull << 63);
  EXPECT_EQ(m.row(0)[1], 1ull << 63);
  EXPECT_EQ(m.unpack(), b);
  EXPECT_THROW(BitMatrix::from_words(1, 70, {0, 1}), DataError);
}

TEST(Quantize, HammingMatchesBitCount) {
  std::mt19937_64 rng(11);
  for (std::size_t bits : {1u, 7u, 64u, 65u, 200u}) {
    const Bipolar a = random_bipolar(bits, rng), b = random_bipolar(bits, rng);
    const BitMatrix pa = BitMatrix::pack(a, 1, bits), pb = BitMatrix::pack(b, 1, bits);
    int expected = 0;
    for (std::size_t i = 0; i < bits; ++i) expected += a[i] != b[i];
    EXPECT_EQ(hamming_distance(pa.row(0), pb.row(0)), expected);
  }
}

TEST(Quantize, SearchOrdersByDistanceThenIndex) {
  // Rows: distance 2, 0, 2, 1 from the query.
  const Bipolar q{1, 1, 1, 1};
  const Bipolar db{-1, -1, 1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, 1, 1, -1};
  const BitMatrix dbm = BitMatrix::pack(db, 4, 4), qm = BitMatrix::pack(q, 1, 4);
  const auto hits = hamming_search(qm.row(0), dbm, 10);
  ASSERT_EQ(hits.size(), 4u);
  EXPECT_EQ(hits[0], (Neighbor{1, 0}));
  EXPECT_EQ(hits[1], (Neighbor{3, 1}));
  EXPECT_EQ(hits[2], (Neighbor{0, 2}));
  EXPECT_EQ(hits[3], (Neighbor{2, 2}));
  const auto skipped = hamming_search(qm.row(0), dbm, 2, 1);
  EXPECT_EQ(skipped[0], (Neighbor{3, 1}));
  EXPECT_EQ(skipped[1], (Neighbor{0, 2}));
}

TEST(Quantize, SearchMatchesExhaustiveSort) {
  std::mt19937_64 rng(5);
  const std::size_t n = 300, bits = 24;
  const BitMatrix db = BitMatrix::pack(random_bipolar(n * bits, rng), n, bits);
  const BitMatrix q = BitMatrix::pack(random_bipolar(bits, rng), 1, bits);
  std::vector<Neighbor> all;
  for (std::size_t i = 0; i < n; ++i) all.push_back({i, hamming_distance(q.row(0), db.row(i))});
  std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.distance < b.distance; });
  const auto hits = hamming_search(q.row(0), db, 50);
  ASSERT_EQ(hits.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(hits[i], all[i]);
}

TEST(Quantize, DescriptorRoundTripIsByteExact) {
  std::mt19937_64 rng(2);
  DescriptorFile f;
  f.codes = BitMatrix::pack(random_bipolar(5 * 33, rng), 5, 33);
  f.labels = std::vector<std::int32_t>{0, 1, 2, 1, 0};
  const auto bytes = encode_descriptors(f);
  const DescriptorFile back = decode_descriptors(bytes);
  EXPECT_EQ(back.codes, f.codes);
  EXPECT_EQ(back.labels, f.labels);
  EXPECT_EQ(encode_descriptors(back), bytes);

  DescriptorFile unlabeled{f.codes, std::nullopt};
  EXPECT_FALSE(decode_descriptors(encode_descriptors(unlabeled)).labels.has_value());

  auto corrupt = bytes;
  corrupt[corrupt.size() / 2] ^= 0x10;
  EXPECT_THROW(decode_descriptors(corrupt), FormatError);
}
