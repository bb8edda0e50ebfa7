#pragma once

// Little-endian byte streams for the BGDS / BGCK / BGBD containers.
//
// Every container shares one frame:
//   magic      4 bytes ASCII
//   version    u32
//   payload    container specific
//   crc32      u32, CRC-32 (IEEE, zlib polynomial) of all preceding bytes

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bingan::io {

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

class ByteWriter {
 public:
  ByteWriter(std::string_view magic, std::uint32_t version);

  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void u64(std::uint64_t v);
  void f64(double v);
  void bytes(std::span<const std::uint8_t> v) { buf_.insert(buf_.end(), v.begin(), v.end()); }
  void str(std::string_view s);  // u32 length + bytes

  // Appends the CRC and hands back the finished container.
  std::vector<std::uint8_t> finish() &&;

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  // Checks magic, version, size and trailing CRC before any payload read.
  ByteReader(std::span<const std::uint8_t> bytes, std::string_view magic, std::uint32_t version);

  std::uint8_t u8();
  std::uint32_t u32();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint64_t u64();
  double f64();
  std::span<const std::uint8_t> bytes(std::size_t n);
  std::string str();

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return end_ - pos_; }
  // Throws unless the payload has been consumed exactly.
  void expect_end() const;
  [[noreturn]] void fail(const std::string& what) const;

 private:
  void need(std::size_t n);
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;  // start of the CRC trailer
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace bingan::io
