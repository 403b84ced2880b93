#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "treecp/runio.hpp"
#include "treecp/tape.hpp"

namespace treecp {

// Flat binary container of named tensors: magic, count, then per tensor
// (name, rank, dims, raw little-endian float64). A JSON manifest with the
// model config sits next to it at <path>.json.

inline constexpr char kCheckpointMagic[8] = {'T', 'C', 'P', 'C', 'K', 'P', 'T', '1'};

namespace detail {

template <typename T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw format_error("checkpoint: truncated file");
  return v;
}

}  // namespace detail

inline void save_tensors(const std::string& path, const ParamStore& st) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw format_error("cannot write checkpoint " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod<std::uint64_t>(out, st.size());
  for (std::size_t i = 0; i < st.size(); ++i) {
    const Param& p = st[i];
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    detail::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t dsz : p.value.shape) detail::write_pod<std::uint64_t>(out, dsz);
    out.write(reinterpret_cast<const char*>(p.value.data.data()),
              static_cast<std::streamsize>(p.value.data.size() * sizeof(double)));
  }
  if (!out) throw format_error("checkpoint write failed for " + path);
}

inline void load_tensors(const std::string& path, ParamStore& st) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw format_error(path + " is not a checkpoint file");
  const auto count = detail::read_pod<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = detail::read_pod<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto rank = detail::read_pod<std::uint32_t>(in);
    std::vector<std::size_t> shape;
    for (std::uint32_t k = 0; k < rank; ++k)
      shape.push_back(static_cast<std::size_t>(detail::read_pod<std::uint64_t>(in)));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw format_error("checkpoint: truncated tensor " + name);
    st.add(name, std::move(t));
  }
}

inline void save_checkpoint(const std::string& path, const ParamStore& st,
                            const json& manifest) {
  save_tensors(path, st);
  write_file(path + ".json", manifest.dump(2) + "\n");
}

inline json load_checkpoint_manifest(const std::string& path) {
  return json::parse(read_file(path + ".json"));
}

}  // namespace treecp
