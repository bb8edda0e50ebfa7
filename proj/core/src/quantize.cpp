#include "bingan/quantize.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "bingan/errors.hpp"
#include "bingan/io.hpp"

namespace bingan {

namespace {
constexpr char kDescriptorMagic[] = "BGBD";
constexpr std::uint32_t kDescriptorVersion = 1;

std::uint64_t mask_for(std::size_t col) { return std::uint64_t{1} << (63 - (col % 64)); }
}  // namespace

Bipolar sign_vec(std::span<const double> values) {
  Bipolar out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) throw DataError("sign_vec: NaN at index " + std::to_string(i));
    out[i] = values[i] >= 0.0 ? 1 : -1;
  }
  return out;
}

double softsign(double a, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("softsign: gamma must be > 0");
  return a / (std::fabs(a) + gamma);
}

double softsign_grad(double a, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("softsign: gamma must be > 0");
  const double d = std::fabs(a) + gamma;
  return gamma / (d * d);
}

int hamming_from_dot(long dot, int m) {
  if (m < 0 || std::labs(dot) > m) {
    throw ContractError("hamming_from_dot: |dot| = " + std::to_string(std::labs(dot)) + " exceeds m = " +
                        std::to_string(m));
  }
  if ((static_cast<long>(m) - dot) % 2 != 0) {
    throw ContractError("hamming_from_dot: dot " + std::to_string(dot) + " and m " + std::to_string(m) +
                        " differ in parity");
  }
  return static_cast<int>((static_cast<long>(m) - dot) / 2);
}

// ---------------------------------------------------------------------------

BitMatrix::BitMatrix(std::size_t n_rows, std::size_t n_bits)
    : n_rows_(n_rows), n_bits_(n_bits), words_per_row_((n_bits + 63) / 64), words_(n_rows * words_per_row_, 0) {}

BitMatrix BitMatrix::pack(std::span<const std::int8_t> bipolar, std::size_t n_rows, std::size_t n_bits) {
  if (bipolar.size() != n_rows * n_bits) {
    throw DimensionError("BitMatrix::pack: " + std::to_string(bipolar.size()) + " entries for " +
                         std::to_string(n_rows) + "x" + std::to_string(n_bits));
  }
  BitMatrix m(n_rows, n_bits);
  for (std::size_t r = 0; r < n_rows; ++r) {
    for (std::size_t c = 0; c < n_bits; ++c) {
      const auto v = bipolar[r * n_bits + c];
      if (v != 1 && v != -1) throw DataError("BitMatrix::pack: entry is not bipolar");
      if (v == 1) m.words_[r * m.words_per_row_ + c / 64] |= mask_for(c);
    }
  }
  return m;
}

BitMatrix BitMatrix::from_signs(std::span<const double> values, std::size_t n_rows, std::size_t n_bits) {
  const Bipolar b = sign_vec(values);
  return pack(b, n_rows, n_bits);
}

BitMatrix BitMatrix::from_words(std::size_t n_rows, std::size_t n_bits, std::vector<std::uint64_t> words) {
  BitMatrix m(n_rows, n_bits);
  if (words.size() != m.words_.size()) throw DimensionError("BitMatrix::from_words: word count mismatch");
  const std::size_t tail = n_bits % 64;
  if (tail != 0) {
    const std::uint64_t pad_mask = ~std::uint64_t{0} >> tail;
    for (std::size_t r = 0; r < n_rows; ++r) {
      if (words[r * m.words_per_row_ + m.words_per_row_ - 1] & pad_mask) {
        throw DataError("BitMatrix: nonzero padding bits in row " + std::to_string(r));
      }
    }
  }
  m.words_ = std::move(words);
  return m;
}

std::span<const std::uint64_t> BitMatrix::row(std::size_t i) const {
  return std::span<const std::uint64_t>(words_).subspan(i * words_per_row_, words_per_row_);
}

bool BitMatrix::bit(std::size_t row, std::size_t col) const {
  return (words_[row * words_per_row_ + col / 64] & mask_for(col)) != 0;
}

void BitMatrix::set(std::size_t row, std::size_t col, bool on) {
  if (col >= n_bits_ || row >= n_rows_) throw DimensionError("BitMatrix::set: index out of range");
  auto& w = words_[row * words_per_row_ + col / 64];
  w = on ? (w | mask_for(col)) : (w & ~mask_for(col));
}

Bipolar BitMatrix::unpack_row(std::size_t i) const {
  Bipolar out(n_bits_);
  for (std::size_t c = 0; c < n_bits_; ++c) out[c] = bit(i, c) ? 1 : -1;
  return out;
}

Bipolar BitMatrix::unpack() const {
  Bipolar out;
  out.reserve(n_rows_ * n_bits_);
  for (std::size_t r = 0; r < n_rows_; ++r) {
    auto row = unpack_row(r);
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

int hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b) {
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::popcount(a[i] ^ b[i]);
  return d;
}

std::vector<Neighbor> hamming_search(std::span<const std::uint64_t> query, const BitMatrix& db, std::size_t k,
                                     std::optional<std::size_t> skip) {
  if (query.size() != db.words_per_row()) {
    throw DimensionError("hamming_search: query has " + std::to_string(query.size() * 64) +
                         "-bit words, db rows have " + std::to_string(db.bits()) + " bits");
  }
  std::vector<Neighbor> all;
  all.reserve(db.rows());
  for (std::size_t i = 0; i < db.rows(); ++i) {
    if (skip && *skip == i) continue;
    all.push_back({i, hamming_distance(query, db.row(i))});
  }
  k = std::min(k, all.size());
  const auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

// ---------------------------------------------------------------------------
// BGBD layout after the common frame header:
//   u64 n_rows, u32 n_bits, u8 has_labels,
//   [i32 label] * n_rows          (when has_labels)
//   [u64 word] * n_rows * ceil(n_bits / 64)

std::vector<std::uint8_t> encode_descriptors(const DescriptorFile& file) {
  const auto& codes = file.codes;
  if (file.labels && file.labels->size() != codes.rows()) {
    throw DataError("descriptor labels do not match row count");
  }
  io::ByteWriter w(kDescriptorMagic, kDescriptorVersion);
  w.u64(codes.rows());
  w.u32(static_cast<std::uint32_t>(codes.bits()));
  w.u8(file.labels ? 1 : 0);
  if (file.labels) {
    for (auto l : *file.labels) w.i32(l);
  }
  for (auto word : codes.words()) w.u64(word);
  return std::move(w).finish();
}

DescriptorFile decode_descriptors(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, kDescriptorMagic, kDescriptorVersion);
  const std::uint64_t n_rows = r.u64();
  const std::uint32_t n_bits = r.u32();
  if (n_bits == 0) r.fail("descriptor n_bits must be positive");
  const std::uint8_t has_labels = r.u8();
  if (has_labels > 1) r.fail("bad has_labels flag");
  const std::uint64_t wpr = (n_bits + 63) / 64;
  const std::uint64_t expected = (has_labels ? 4 * n_rows : 0) + 8 * wpr * n_rows;
  if (n_rows > r.remaining() || expected != r.remaining()) {
    r.fail("descriptor payload size does not match n_rows=" + std::to_string(n_rows) +
           " n_bits=" + std::to_string(n_bits));
  }
  DescriptorFile out;
  if (has_labels) {
    std::vector<std::int32_t> labels(n_rows);
    for (auto& l : labels) l = r.i32();
    out.labels = std::move(labels);
  }
  std::vector<std::uint64_t> words(n_rows * wpr);
  for (auto& w : words) w = r.u64();
  r.expect_end();
  try {
    out.codes = BitMatrix::from_words(n_rows, n_bits, std::move(words));
  } catch (const DataError& e) {
    throw FormatError(e.what(), r.offset());
  }
  return out;
}

void write_descriptors(const std::filesystem::path& path, const DescriptorFile& file) {
  io::write_file(path, encode_descriptors(file));
}

DescriptorFile read_descriptors(const std::filesystem::path& path) {
  return decode_descriptors(io::read_file(path));
}

}  // namespace bingan
