#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace bingan {

/// Bipolar vector entries are +1 / -1 stored as int8.
using Bipolar = std::vector<std::int8_t>;

/// Hard binarisation. sign(0) is +1. Throws DataError on NaN.
Bipolar sign_vec(std::span<const double> values);

/// a / (|a| + gamma). Throws ConfigError unless gamma > 0.
double softsign(double a, double gamma);
double softsign_grad(double a, double gamma);

/// Hamming distance from the bipolar dot product: d = (m - dot) / 2.
/// Throws ContractError when |dot| > m or dot and m differ in parity.
int hamming_from_dot(long dot, int m);

/// N×K matrix of bipolar codes packed into 64-bit words, most significant
/// bit first. Bit value 1 stands for +1. Padding bits are always zero.
class BitMatrix {
 public:
  BitMatrix() = default;
  BitMatrix(std::size_t n_rows, std::size_t n_bits);

  // Row-major n_rows × n_bits bipolar entries.
  static BitMatrix pack(std::span<const std::int8_t> bipolar, std::size_t n_rows, std::size_t n_bits);
  // sign() of a row-major real matrix.
  static BitMatrix from_signs(std::span<const double> values, std::size_t n_rows, std::size_t n_bits);
  // Raw words, validated for padding.
  static BitMatrix from_words(std::size_t n_rows, std::size_t n_bits, std::vector<std::uint64_t> words);

  std::size_t rows() const { return n_rows_; }
  std::size_t bits() const { return n_bits_; }
  std::size_t words_per_row() const { return words_per_row_; }

  std::span<const std::uint64_t> row(std::size_t i) const;
  const std::vector<std::uint64_t>& words() const { return words_; }

  bool bit(std::size_t row, std::size_t col) const;
  void set(std::size_t row, std::size_t col, bool on);

  Bipolar unpack() const;
  Bipolar unpack_row(std::size_t i) const;

  bool operator==(const BitMatrix&) const = default;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_bits_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

int hamming_distance(std::span<const std::uint64_t> a, std::span<const std::uint64_t> b);

struct Neighbor {
  std::size_t index;
  int distance;
  bool operator==(const Neighbor&) const = default;
};

/// k nearest rows of `db` to `query` by Hamming distance; ties go to the
/// lower index. k is clipped to db.rows(). `skip` excludes one db row.
std::vector<Neighbor> hamming_search(std::span<const std::uint64_t> query, const BitMatrix& db, std::size_t k,
                                     std::optional<std::size_t> skip = std::nullopt);

/// Binary descriptor file ("BGBD"): codes plus optional int32 labels.
struct DescriptorFile {
  BitMatrix codes;
  std::optional<std::vector<std::int32_t>> labels;
};

std::vector<std::uint8_t> encode_descriptors(const DescriptorFile& file);
DescriptorFile decode_descriptors(std::span<const std::uint8_t> bytes);
void write_descriptors(const std::filesystem::path& path, const DescriptorFile& file);
DescriptorFile read_descriptors(const std::filesystem::path& path);

}  // namespace bingan
