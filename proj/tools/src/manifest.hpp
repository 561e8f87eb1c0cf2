#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace hierdg::cli {

// Every run directory starts with a manifest naming the effective config,
// the hashed inputs, and every artifact the command is about to write.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  uint64_t seed = 0;
  int threads = 1;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, content hash
  std::vector<std::string> outputs;                         // artifact names in the out dir
};

std::string file_content_hash(const std::filesystem::path& path);

// Creates the directory and writes manifest.json before any artifact exists.
void write_manifest(const std::filesystem::path& out_dir, const RunManifest& m);

}  // namespace hierdg::cli
