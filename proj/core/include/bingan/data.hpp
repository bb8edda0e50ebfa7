#pragma once

// Datasets are stored as 8-bit rasters and normalised to [-1, 1] (x/127.5 - 1)
// when turned into tensors.
//
// BGDS container, little-endian, after the common frame header (see io.hpp):
//   u8  kind            0 = image set, 1 = patch pairs
//   u8  split           0 = train, 1 = test
//   u32 n, c, h, w      n examples (pairs for kind 1) of c×h×w bytes
//   kind 0: u8 pixels[n·c·h·w], i32 labels[n]
//   kind 1: u8 a[n·c·h·w], u8 b[n·c·h·w], u8 match[n] (0 or 1)

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "bingan/tensor.hpp"

namespace bingan {

enum class Split : std::uint8_t { kTrain = 0, kTest = 1 };

struct RasterShape {
  std::size_t c = 1, h = 1, w = 1;
  std::size_t size() const { return c * h * w; }
  bool operator==(const RasterShape&) const = default;
};

struct ImageSet {
  RasterShape shape;
  std::vector<std::uint8_t> pixels;  // n·c·h·w
  std::vector<std::int32_t> labels;  // dense ids in [0, n_classes)
  Split split = Split::kTrain;

  std::size_t size() const { return labels.size(); }
  std::size_t n_classes() const;
  void validate() const;
  bool operator==(const ImageSet&) const = default;
};

struct PatchPairSet {
  RasterShape shape;
  std::vector<std::uint8_t> a;  // n·c·h·w
  std::vector<std::uint8_t> b;
  std::vector<std::uint8_t> match;  // 1 = same physical patch
  Split split = Split::kTrain;

  std::size_t size() const { return match.size(); }
  void validate() const;
  bool operator==(const PatchPairSet&) const = default;
};

using Dataset = std::variant<ImageSet, PatchPairSet>;

double normalize_pixel(std::uint8_t v);
/// Rows `indices` of a raster buffer as an N×C×H×W tensor in [-1, 1].
Tensor to_tensor(std::span<const std::uint8_t> rasters, const RasterShape& shape,
                 std::span<const std::size_t> indices);
Tensor to_tensor(std::span<const std::uint8_t> rasters, const RasterShape& shape);

/// All rasters of a dataset as one unlabeled training pool (pairs
/// contribute both sides).
std::vector<std::uint8_t> training_pool(const Dataset& data, RasterShape& shape);

std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_container(const std::filesystem::path& path);

/// 2×2 box filter, ties rounded to even. Requires even H and W.
std::vector<std::uint8_t> downsample(std::span<const std::uint8_t> rasters, RasterShape& shape);

ImageSet synth_toy_retrieval(std::uint64_t seed, std::size_t n_per_class, std::size_t n_classes, std::size_t hw,
                             std::size_t channels = 3);

/// Controls how matched pairs differ. All zero gives identical pairs.
struct PairJitter {
  int max_shift = 1;           // pixels
  int max_rotation_step = 1;   // steps of 5 degrees
  int brightness = 12;         // +/- grey levels
  int noise = 6;               // +/- grey levels, per pixel

  static PairJitter none() { return {0, 0, 0, 0}; }
};

/// Even indices are matched pairs, odd indices non-matched.
PatchPairSet synth_toy_pairs(std::uint64_t seed, std::size_t n_pairs, std::size_t hw,
                             const PairJitter& jitter = PairJitter{});

}  // namespace bingan
