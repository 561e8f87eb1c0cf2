#include "manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <stdexcept>

namespace hierdg::cli {

std::string file_content_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read input file: " + path.string());
  uint64_t h = 1469598103934665603ull;
  char buf[1 << 14];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  char hex[20];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + hex;
}

void write_manifest(const std::filesystem::path& out_dir, const RunManifest& m) {
  std::filesystem::create_directories(out_dir);
  nlohmann::json j;
  j["schema"] = "hierdg-run-manifest/1";
  j["command"] = m.command;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["threads"] = m.threads;
  j["inputs"] = nlohmann::json::array();
  for (const auto& [path, hash] : m.inputs)
    j["inputs"].push_back({{"path", path}, {"content_hash", hash}});
  j["outputs"] = m.outputs;

  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
  j["started_at"] = stamp;

  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir.string());
  out << j.dump(2) << "\n";
}

}  // namespace hierdg::cli
