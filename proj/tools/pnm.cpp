#include "pnm.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "bingan/errors.hpp"

namespace bingan::tools {

namespace {

std::size_t read_header_int(const std::vector<std::uint8_t>& buf, std::size_t& pos, const std::filesystem::path& path) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(buf[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::size_t v = 0, digits = 0;
  while (pos < buf.size() && std::isdigit(buf[pos])) {
    v = v * 10 + (buf[pos++] - '0');
    if (++digits > 6) throw FormatError("PNM header value too large in " + path.string(), pos);
  }
  if (digits == 0) throw FormatError("malformed PNM header in " + path.string(), pos);
  return v;
}

}  // namespace

Raster read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  const std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 2 || buf[0] != 'P' || (buf[1] != '5' && buf[1] != '6')) {
    throw FormatError("not a binary PGM/PPM file: " + path.string(), 0);
  }
  const std::size_t c = buf[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  const std::size_t w = read_header_int(buf, pos, path);
  const std::size_t h = read_header_int(buf, pos, path);
  const std::size_t maxval = read_header_int(buf, pos, path);
  if (maxval != 255) throw FormatError("only maxval 255 is supported: " + path.string(), pos);
  ++pos;  // single whitespace byte
  if (w == 0 || h == 0 || buf.size() < pos + w * h * c) {
    throw FormatError("truncated PNM pixel data in " + path.string(), pos);
  }
  Raster r;
  r.shape = {c, h, w};
  r.planar.resize(c * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) r.planar[(ch * h + y) * w + x] = buf[pos + (y * w + x) * c + ch];
    }
  }
  return r;
}

void write_pnm(const std::filesystem::path& path, const Raster& r) {
  const auto [c, h, w] = r.shape;
  if (c != 1 && c != 3) throw ContractError("write_pnm: 1 or 3 channels required");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << (c == 1 ? "P5" : "P6") << '\n' << w << ' ' << h << "\n255\n";
  std::vector<char> interleaved(c * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        interleaved[(y * w + x) * c + ch] = static_cast<char>(r.planar[(ch * h + y) * w + x]);
      }
    }
  }
  out.write(interleaved.data(), static_cast<std::streamsize>(interleaved.size()));
}

Raster tile(std::span<const std::uint8_t> rasters, const RasterShape& shape, std::size_t n) {
  const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t rows = (n + cols - 1) / cols;
  Raster grid;
  grid.shape = {shape.c, rows * (shape.h + 1) + 1, cols * (shape.w + 1) + 1};
  grid.planar.assign(grid.shape.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t oy = 1 + (i / cols) * (shape.h + 1), ox = 1 + (i % cols) * (shape.w + 1);
    for (std::size_t ch = 0; ch < shape.c; ++ch) {
      for (std::size_t y = 0; y < shape.h; ++y) {
        for (std::size_t x = 0; x < shape.w; ++x) {
          grid.planar[(ch * grid.shape.h + oy + y) * grid.shape.w + ox + x] =
              rasters[i * shape.size() + (ch * shape.h + y) * shape.w + x];
        }
      }
    }
  }
  return grid;
}

}  // namespace bingan::tools
