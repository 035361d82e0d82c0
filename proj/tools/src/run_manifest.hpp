#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace seje::cli {

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_text(const std::string& text);

// Seconds since the epoch; SOURCE_DATE_EPOCH wins when set so reruns are
// byte-identical.
std::string timestamp_now();

// run_manifest.json written next to a command's outputs.
class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed, nlohmann::json config);

  void add_input(const std::filesystem::path& path);
  // Hashes every file under `out` and writes out/run_manifest.json.
  void finish(const std::filesystem::path& out);

 private:
  std::string command_;
  std::uint64_t seed_;
  nlohmann::json config_;
  std::map<std::string, std::string> inputs_;
  std::string started_;
};

}  // namespace seje::cli
