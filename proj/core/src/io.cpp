#include "bingan/io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "bingan/errors.hpp"

namespace bingan::io {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const std::size_t n = std::min(kChunk, bytes.size() - off);
    crc = ::crc32(crc, bytes.data() + off, static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(crc);
}

ByteWriter::ByteWriter(std::string_view magic, std::uint32_t version) {
  buf_.insert(buf_.end(), magic.begin(), magic.end());
  u32(version);
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

std::vector<std::uint8_t> ByteWriter::finish() && {
  const std::uint32_t crc = crc32(buf_);
  u32(crc);
  return std::move(buf_);
}

ByteReader::ByteReader(std::span<const std::uint8_t> bytes, std::string_view magic, std::uint32_t version)
    : buf_(bytes) {
  if (bytes.size() < magic.size() + 8) {
    throw FormatError("file too short for a " + std::string(magic) + " container", bytes.size());
  }
  if (std::memcmp(bytes.data(), magic.data(), magic.size()) != 0) {
    throw FormatError("bad magic, expected " + std::string(magic), 0);
  }
  end_ = bytes.size() - 4;
  const std::uint32_t stored = static_cast<std::uint32_t>(bytes[end_]) |
                               (static_cast<std::uint32_t>(bytes[end_ + 1]) << 8) |
                               (static_cast<std::uint32_t>(bytes[end_ + 2]) << 16) |
                               (static_cast<std::uint32_t>(bytes[end_ + 3]) << 24);
  if (stored != crc32(bytes.first(end_))) throw FormatError("CRC32 mismatch", end_);
  pos_ = magic.size();
  const std::uint32_t v = u32();
  if (v != version) {
    throw FormatError("unsupported " + std::string(magic) + " version " + std::to_string(v), magic.size());
  }
}

void ByteReader::need(std::size_t n) {
  if (n > end_ - pos_) fail("truncated payload: need " + std::to_string(n) + " more bytes");
}

void ByteReader::fail(const std::string& what) const { throw FormatError(what, pos_); }

std::uint8_t ByteReader::u8() {
  need(1);
  return buf_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  need(n);
  auto out = buf_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  auto b = bytes(n);
  return std::string(b.begin(), b.end());
}

void ByteReader::expect_end() const {
  if (pos_ != end_) fail(std::to_string(end_ - pos_) + " unexpected trailing payload bytes");
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to " + path.string());
}

}  // namespace bingan::io
