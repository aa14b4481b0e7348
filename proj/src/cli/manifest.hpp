#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace condvine::cli {

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

/// Record of one CLI run. Contains no timestamps or host details, so equal
/// inputs give byte-identical manifests.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  unsigned long long seed = 0;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  /// Hashes the listed files and serializes the manifest.
  std::string to_json() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace condvine::cli
