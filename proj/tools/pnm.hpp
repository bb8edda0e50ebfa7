#pragma once

// Binary PGM (P5) / PPM (P6) with maxval 255.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "bingan/data.hpp"

namespace bingan::tools {

struct Raster {
  RasterShape shape;
  std::vector<std::uint8_t> planar;  // C×H×W
};

Raster read_pnm(const std::filesystem::path& path);
void write_pnm(const std::filesystem::path& path, const Raster& raster);

/// Tiles n planar rasters into a near-square grid with a 1-pixel border.
Raster tile(std::span<const std::uint8_t> rasters, const RasterShape& shape, std::size_t n);

}  // namespace bingan::tools
