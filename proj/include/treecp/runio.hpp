#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "treecp/common.hpp"

namespace treecp {

using json = nlohmann::json;

// FNV-1a 64-bit content hash; manifests use it to make reruns verifiable.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

inline std::string content_hash_hex(const std::string& path) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(read_file(path))));
  return buf;
}

// Shortest round-trippable decimal form, stable across runs of the same build.
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// Run manifest: config + seed + content hash per input file. No timestamps,
// so reruns of the same inputs produce identical manifests.
inline void write_run_manifest(const std::string& dir, const std::string& command,
                               const json& config, std::uint64_t seed,
                               const std::vector<std::string>& inputs) {
  json m;
  m["command"] = command;
  m["config"] = config;
  m["seed"] = seed;
  json files = json::object();
  for (const std::string& path : inputs)
    if (!path.empty()) files[path] = "fnv1a64:" + content_hash_hex(path);
  m["inputs"] = files;
  std::filesystem::create_directories(dir);
  write_file(dir + "/manifest.json", m.dump(2) + "\n");
}

}  // namespace treecp
