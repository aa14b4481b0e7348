#include "cli/manifest.hpp"

#include <array>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "condvine/csv.hpp"
#include "condvine/error.hpp"
#include "condvine/version.hpp"

namespace condvine::cli {

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw NumericError("SHA-256 digest failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

std::string RunManifest::to_json() const {
  using nlohmann::ordered_json;
  auto digests = [](const std::vector<std::filesystem::path>& files) {
    ordered_json list = ordered_json::array();
    for (const auto& f : files)
      list.push_back({{"path", f.generic_string()}, {"sha256", sha256_hex(read_text_file(f))}});
    return list;
  };
  ordered_json j;
  j["command"] = command;
  j["library_version"] = kVersion;
  j["seed"] = seed;
  j["config"] = config;
  j["inputs"] = digests(inputs);
  j["outputs"] = digests(outputs);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& path) const { write_text_file(path, to_json()); }

}  // namespace condvine::cli
