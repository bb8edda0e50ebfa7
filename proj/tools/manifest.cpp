#include "manifest.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>

#include "bingan/errors.hpp"
#include "bingan/io.hpp"

#ifdef BINGAN_HAVE_OPENSSL
#include <openssl/evp.h>
#endif

namespace bingan::tools {

std::string content_hash(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = io::read_file(path);
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  std::vector<std::uint8_t> blob(header.begin(), header.end());
  blob.insert(blob.end(), bytes.begin(), bytes.end());
  char hex[3];
  std::string out;
#ifdef BINGAN_HAVE_OPENSSL
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(blob.data(), blob.size(), md, &len, EVP_sha1(), nullptr);
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(hex, sizeof(hex), "%02x", md[i]);
    out += hex;
  }
  return out;
#else
  const std::uint32_t crc = io::crc32(blob);
  out = "crc32:";
  for (int shift = 24; shift >= 0; shift -= 8) {
    std::snprintf(hex, sizeof(hex), "%02x", (crc >> shift) & 0xffu);
    out += hex;
  }
  return out;
#endif
}

RunManifest::RunManifest(std::string command) : start_(std::chrono::steady_clock::now()) {
  doc_["command"] = std::move(command);
  doc_["inputs"] = nlohmann::json::array();
  doc_["outputs"] = nlohmann::json::array();
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  doc_["started_at"] = stamp;
}

void RunManifest::input(const std::filesystem::path& path) {
  doc_["inputs"].push_back({{"path", path.string()}, {"hash", content_hash(path)}});
}

void RunManifest::output(const std::filesystem::path& path) { doc_["outputs"].push_back(path.string()); }

void RunManifest::write(const std::filesystem::path& path) {
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
  doc_["wall_clock_seconds"] = elapsed.count();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << doc_.dump(2) << '\n';
}

}  // namespace bingan::tools
