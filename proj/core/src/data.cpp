#include "bingan/data.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <string>

#include "bingan/errors.hpp"
#include "bingan/io.hpp"

namespace bingan {

namespace {

constexpr char kDatasetMagic[] = "BGDS";
constexpr std::uint32_t kDatasetVersion = 1;

// Integer-only draws so generated bytes do not depend on the standard
// library's distribution implementations.
class IntRng {
 public:
  explicit IntRng(std::uint64_t seed) : engine_(seed) {}
  // Uniform-ish integer in [lo, hi].
  int range(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
};

std::uint8_t clamp_byte(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

// ---- retrieval textures ----------------------------------------------------

int texture_value(int family, int variant, int x, int y, const int* p) {
  switch (family) {
    case 0: {  // horizontal bars
      const int period = p[0] + 2 * variant;
      return ((y + p[1]) % period) * 2 < period;
    }
    case 1: {  // vertical bars
      const int period = p[0] + 2 * variant;
      return ((x + p[1]) % period) * 2 < period;
    }
    case 2: {  // blobs
      for (int i = 0; i < 3; ++i) {
        const int cx = p[2 + 3 * i], cy = p[3 + 3 * i], r = p[4 + 3 * i] + variant;
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) return 1;
      }
      return 0;
    }
    default: {  // checkerboard
      const int cell = p[0] / 2 + 1 + variant;
      return (((x + p[1]) / cell) + ((y + p[11]) / cell)) % 2;
    }
  }
}

// ---- patch scenes ----------------------------------------------------------

// cos/sin of k·5 degrees, k = 0..2, in Q14.
constexpr int kCosQ14[3] = {16384, 16322, 16135};
constexpr int kSinQ14[3] = {0, 1428, 2845};

struct Primitive {
  bool disk;
  int x0, y0, x1, y1;  // rectangle bounds or disk centre (x0, y0) and radius x1, Q4
  int value;
};

struct Scene {
  int background;
  std::vector<Primitive> shapes;
};

Scene random_scene(IntRng& rng, int hw) {
  Scene s;
  s.background = rng.range(40, 215);
  const int n = rng.range(3, 5);
  const int lo = -2 * 16, hi = (hw + 2) * 16;
  for (int i = 0; i < n; ++i) {
    Primitive p{};
    p.disk = rng.coin();
    p.value = rng.range(0, 255);
    if (p.disk) {
      p.x0 = rng.range(lo, hi);
      p.y0 = rng.range(lo, hi);
      p.x1 = rng.range(16 * 2, 16 * std::max(3, hw / 3));
    } else {
      const int ax = rng.range(lo, hi), bx = rng.range(lo, hi);
      const int ay = rng.range(lo, hi), by = rng.range(lo, hi);
      p.x0 = std::min(ax, bx);
      p.x1 = std::max(ax, bx) + 32;
      p.y0 = std::min(ay, by);
      p.y1 = std::max(ay, by) + 32;
    }
    s.shapes.push_back(p);
  }
  return s;
}

struct View {
  int shift_x = 0, shift_y = 0, rotation = 0, brightness = 0, noise = 0;
};

View random_view(IntRng& rng, const PairJitter& j) {
  View v;
  v.shift_x = j.max_shift ? rng.range(-j.max_shift, j.max_shift) : 0;
  v.shift_y = j.max_shift ? rng.range(-j.max_shift, j.max_shift) : 0;
  const int rot = std::min(j.max_rotation_step, 2);
  v.rotation = rot ? rng.range(-rot, rot) : 0;
  v.brightness = j.brightness ? rng.range(-j.brightness, j.brightness) : 0;
  v.noise = j.noise;
  return v;
}

void render(const Scene& s, const View& v, int hw, IntRng& rng, std::uint8_t* out) {
  const int centre = hw * 8;
  const int step = v.rotation < 0 ? -v.rotation : v.rotation;
  const int cs = kCosQ14[step];
  const int sn = v.rotation < 0 ? -kSinQ14[step] : kSinQ14[step];
  for (int y = 0; y < hw; ++y) {
    for (int x = 0; x < hw; ++x) {
      const int dx = x * 16 + 8 - centre, dy = y * 16 + 8 - centre;
      const int px = centre + ((cs * dx - sn * dy) >> 14) + 16 * v.shift_x;
      const int py = centre + ((sn * dx + cs * dy) >> 14) + 16 * v.shift_y;
      int value = s.background;
      for (const auto& p : s.shapes) {
        const bool inside = p.disk ? (px - p.x0) * (px - p.x0) + (py - p.y0) * (py - p.y0) <= p.x1 * p.x1
                                   : px >= p.x0 && px < p.x1 && py >= p.y0 && py < p.y1;
        if (inside) value = p.value;
      }
      value += v.brightness;
      if (v.noise) value += rng.range(-v.noise, v.noise);
      out[y * hw + x] = clamp_byte(value);
    }
  }
}

void check_raster(const RasterShape& shape) {
  if (shape.c == 0 || shape.h == 0 || shape.w == 0) throw DataError("raster dims must be positive");
}

}  // namespace

// ---------------------------------------------------------------------------

std::size_t ImageSet::n_classes() const {
  if (labels.empty()) return 0;
  return static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
}

void ImageSet::validate() const {
  check_raster(shape);
  if (pixels.size() != labels.size() * shape.size()) throw DataError("image set: pixel count does not match labels");
  std::set<std::int32_t> seen;
  for (auto l : labels) {
    if (l < 0) throw DataError("image set: negative label");
    seen.insert(l);
  }
  if (!labels.empty() && seen.size() != n_classes()) throw DataError("image set: label ids are not dense");
}

void PatchPairSet::validate() const {
  check_raster(shape);
  if (a.size() != match.size() * shape.size() || b.size() != a.size()) {
    throw DataError("pair set: raster count does not match pair count");
  }
  for (auto m : match) {
    if (m > 1) throw DataError("pair set: match flags must be 0 or 1");
  }
}

double normalize_pixel(std::uint8_t v) { return static_cast<double>(v) / 127.5 - 1.0; }

Tensor to_tensor(std::span<const std::uint8_t> rasters, const RasterShape& shape,
                 std::span<const std::size_t> indices) {
  const std::size_t per = shape.size();
  std::vector<double> values(indices.size() * per);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if ((indices[i] + 1) * per > rasters.size()) throw DimensionError("to_tensor: index out of range");
    for (std::size_t p = 0; p < per; ++p) values[i * per + p] = normalize_pixel(rasters[indices[i] * per + p]);
  }
  return Tensor({indices.size(), shape.c, shape.h, shape.w}, std::move(values));
}

Tensor to_tensor(std::span<const std::uint8_t> rasters, const RasterShape& shape) {
  std::vector<std::size_t> idx(rasters.size() / shape.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return to_tensor(rasters, shape, idx);
}

std::vector<std::uint8_t> training_pool(const Dataset& data, RasterShape& shape) {
  if (const auto* images = std::get_if<ImageSet>(&data)) {
    shape = images->shape;
    return images->pixels;
  }
  const auto& pairs = std::get<PatchPairSet>(data);
  shape = pairs.shape;
  std::vector<std::uint8_t> out(pairs.a);
  out.insert(out.end(), pairs.b.begin(), pairs.b.end());
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_dataset(const Dataset& data) {
  io::ByteWriter w(kDatasetMagic, kDatasetVersion);
  const auto header = [&w](std::uint8_t kind, Split split, std::size_t n, const RasterShape& s) {
    w.u8(kind);
    w.u8(static_cast<std::uint8_t>(split));
    w.u32(static_cast<std::uint32_t>(n));
    w.u32(static_cast<std::uint32_t>(s.c));
    w.u32(static_cast<std::uint32_t>(s.h));
    w.u32(static_cast<std::uint32_t>(s.w));
  };
  if (const auto* images = std::get_if<ImageSet>(&data)) {
    images->validate();
    header(0, images->split, images->size(), images->shape);
    w.bytes(images->pixels);
    for (auto l : images->labels) w.i32(l);
  } else {
    const auto& pairs = std::get<PatchPairSet>(data);
    pairs.validate();
    header(1, pairs.split, pairs.size(), pairs.shape);
    w.bytes(pairs.a);
    w.bytes(pairs.b);
    w.bytes(pairs.match);
  }
  return std::move(w).finish();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, kDatasetMagic, kDatasetVersion);
  const std::uint8_t kind = r.u8();
  if (kind > 1) r.fail("unknown dataset kind " + std::to_string(kind));
  const std::uint8_t split = r.u8();
  if (split > 1) r.fail("unknown split tag " + std::to_string(split));
  const std::size_t dims_at = r.offset();
  const std::uint64_t n = r.u32();
  RasterShape shape{r.u32(), r.u32(), r.u32()};
  if (shape.c == 0 || shape.h == 0 || shape.w == 0) throw FormatError("raster dims must be positive", dims_at);
  const std::uint64_t per = static_cast<std::uint64_t>(shape.c) * shape.h * shape.w;
  const std::uint64_t expected = kind == 0 ? n * per + 4 * n : 2 * n * per + n;
  if (expected != r.remaining()) {
    throw FormatError("payload of " + std::to_string(r.remaining()) + " bytes does not match dims (expected " +
                          std::to_string(expected) + ")",
                      dims_at);
  }
  const std::size_t payload_at = r.offset();
  try {
    if (kind == 0) {
      ImageSet set;
      set.shape = shape;
      set.split = static_cast<Split>(split);
      auto px = r.bytes(n * per);
      set.pixels.assign(px.begin(), px.end());
      set.labels.resize(n);
      for (auto& l : set.labels) l = r.i32();
      r.expect_end();
      set.validate();
      return set;
    }
    PatchPairSet set;
    set.shape = shape;
    set.split = static_cast<Split>(split);
    auto a = r.bytes(n * per);
    auto b = r.bytes(n * per);
    auto m = r.bytes(n);
    set.a.assign(a.begin(), a.end());
    set.b.assign(b.begin(), b.end());
    set.match.assign(m.begin(), m.end());
    r.expect_end();
    set.validate();
    return set;
  } catch (const DataError& e) {
    throw FormatError(e.what(), payload_at);
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  io::write_file(path, encode_dataset(data));
}

Dataset load_container(const std::filesystem::path& path) { return decode_dataset(io::read_file(path)); }

std::vector<std::uint8_t> downsample(std::span<const std::uint8_t> rasters, RasterShape& shape) {
  check_raster(shape);
  if (shape.h % 2 != 0 || shape.w % 2 != 0) {
    throw DimensionError("downsample: dims must be even, got " + std::to_string(shape.h) + "x" +
                         std::to_string(shape.w));
  }
  if (rasters.size() % shape.size() != 0) throw DimensionError("downsample: buffer is not a whole number of rasters");
  const std::size_t planes = rasters.size() / (shape.h * shape.w);
  const std::size_t oh = shape.h / 2, ow = shape.w / 2;
  std::vector<std::uint8_t> out(planes * oh * ow);
  for (std::size_t p = 0; p < planes; ++p) {
    const std::uint8_t* src = rasters.data() + p * shape.h * shape.w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        const unsigned s = src[2 * y * shape.w + 2 * x] + src[2 * y * shape.w + 2 * x + 1] +
                           src[(2 * y + 1) * shape.w + 2 * x] + src[(2 * y + 1) * shape.w + 2 * x + 1];
        unsigned q = s / 4;
        const unsigned rem = s % 4;
        if (rem > 2 || (rem == 2 && (q % 2 == 1))) ++q;  // nearest, ties to even
        out[(p * oh + y) * ow + x] = static_cast<std::uint8_t>(q);
      }
    }
  }
  shape.h = oh;
  shape.w = ow;
  return out;
}

// ---------------------------------------------------------------------------

ImageSet synth_toy_retrieval(std::uint64_t seed, std::size_t n_per_class, std::size_t n_classes, std::size_t hw,
                             std::size_t channels) {
  if (n_classes < 2) throw ConfigError("synth_toy_retrieval: need at least 2 classes");
  if (hw < 4 || channels == 0) throw ConfigError("synth_toy_retrieval: image too small");
  IntRng rng(seed);
  ImageSet set;
  set.shape = {channels, hw, hw};
  const std::size_t total = n_per_class * n_classes;
  set.pixels.resize(total * set.shape.size());
  set.labels.resize(total);
  const int side = static_cast<int>(hw);
  for (std::size_t i = 0; i < total; ++i) {
    // Interleave classes so any prefix stays balanced.
    const int cls = static_cast<int>(i % n_classes);
    set.labels[i] = cls;
    const int family = cls % 4, variant = cls / 4;
    int p[12];
    p[0] = rng.range(3, 5);
    p[1] = rng.range(0, 7);
    for (int b = 0; b < 3; ++b) {
      p[2 + 3 * b] = rng.range(0, side - 1);
      p[3 + 3 * b] = rng.range(0, side - 1);
      p[4 + 3 * b] = rng.range(1, std::max(2, side / 5));
    }
    p[11] = rng.range(0, 7);
    std::uint8_t* img = set.pixels.data() + i * set.shape.size();
    for (std::size_t c = 0; c < channels; ++c) {
      const int lo = rng.range(0, 100), hi = rng.range(155, 255);
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          const int on = texture_value(family, variant, x, y, p);
          img[(c * hw + y) * hw + x] = clamp_byte((on ? hi : lo) + rng.range(-20, 20));
        }
      }
    }
  }
  return set;
}

PatchPairSet synth_toy_pairs(std::uint64_t seed, std::size_t n_pairs, std::size_t hw, const PairJitter& jitter) {
  if (n_pairs % 2 != 0) throw ConfigError("synth_toy_pairs: n_pairs must be even");
  if (hw < 4) throw ConfigError("synth_toy_pairs: patch too small");
  IntRng rng(seed);
  PatchPairSet set;
  set.shape = {1, hw, hw};
  const std::size_t per = hw * hw;
  set.a.resize(n_pairs * per);
  set.b.resize(n_pairs * per);
  set.match.resize(n_pairs);
  const int side = static_cast<int>(hw);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const bool matched = i % 2 == 0;
    set.match[i] = matched ? 1 : 0;
    const Scene first = random_scene(rng, side);
    const Scene second = matched ? first : random_scene(rng, side);
    const View va = random_view(rng, jitter);
    const View vb = random_view(rng, jitter);
    render(first, va, side, rng, set.a.data() + i * per);
    render(second, vb, side, rng, set.b.data() + i * per);
  }
  return set;
}

}  // namespace bingan
