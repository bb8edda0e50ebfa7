#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace bingan::tools {

/// Git blob id ("blob <len>\0" + content, SHA-1) of a file. Falls back to a
/// CRC32-based id when built without OpenSSL.
std::string content_hash(const std::filesystem::path& path);

/// Audit record written next to every artifact a command produces.
class RunManifest {
 public:
  explicit RunManifest(std::string command);

  void config(const std::string& text) { doc_["config"] = text; }
  void seed(std::uint64_t s) { doc_["seed"] = s; }
  void input(const std::filesystem::path& path);
  void output(const std::filesystem::path& path);
  void note(const std::string& key, nlohmann::json value) { doc_["results"][key] = std::move(value); }

  /// Stamps wall-clock time and writes pretty JSON.
  void write(const std::filesystem::path& path);

 private:
  nlohmann::json doc_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace bingan::tools
