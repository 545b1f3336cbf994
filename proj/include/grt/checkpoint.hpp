#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "grt/errors.hpp"
#include "grt/param_store.hpp"

namespace grt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

// Binary checkpoint: magic + version, a config echo (the run configuration
// text), free-form metadata, then every parameter as name, shape, raw
// row-major values. Round-trips bit-exactly.
inline constexpr char kCheckpointMagic[9] = "GRTCKPT1";

namespace detail {

inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw DataError("checkpoint: truncated file");
  return v;
}

inline void write_str(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str(std::istream& is) {
  const std::uint64_t n = read_u64(is);
  if (n > (1ULL << 32)) throw DataError("checkpoint: unreasonable string size");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw DataError("checkpoint: truncated string");
  return s;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::string& path, const ParamStore<T>& store,
                     const std::string& config_echo,
                     const std::map<std::string, std::string>& metadata) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open " + path + " for writing");
  os.write(kCheckpointMagic, 8);
  const std::uint64_t width = sizeof(T);
  detail::write_u64(os, width);
  detail::write_str(os, config_echo);
  detail::write_u64(os, metadata.size());
  for (const auto& [k, v] : metadata) {
    detail::write_str(os, k);
    detail::write_str(os, v);
  }
  detail::write_u64(os, store.size());
  for (const auto& [name, p] : store) {
    detail::write_str(os, name);
    detail::write_u64(os, p.value.rank());
    for (std::size_t d : p.value.shape) detail::write_u64(os, d);
    detail::write_u64(os, p.value.numel());
    os.write(reinterpret_cast<const char*>(p.value.data.data()),
             static_cast<std::streamsize>(p.value.numel() * sizeof(T)));
  }
  if (!os) throw DataError("checkpoint: write failed for " + path);
}

template <typename T>
struct LoadedCheckpoint {
  std::string config_echo;
  std::map<std::string, std::string> metadata;
  // name -> (shape, data)
  std::vector<std::pair<std::string, ValueGrid<T>>> params;
};

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::string(magic, 8) != std::string(kCheckpointMagic, 8)) {
    throw DataError("checkpoint: bad magic in " + path);
  }
  const std::uint64_t width = detail::read_u64(is);
  if (width != sizeof(T)) {
    throw DataError("checkpoint: precision mismatch (file stores " +
                    std::to_string(width * 8) + "-bit values)");
  }
  LoadedCheckpoint<T> out;
  out.config_echo = detail::read_str(is);
  const std::uint64_t n_meta = detail::read_u64(is);
  for (std::uint64_t i = 0; i < n_meta; ++i) {
    std::string k = detail::read_str(is);
    out.metadata[k] = detail::read_str(is);
  }
  const std::uint64_t n_params = detail::read_u64(is);
  for (std::uint64_t i = 0; i < n_params; ++i) {
    std::string name = detail::read_str(is);
    const std::uint64_t rank = detail::read_u64(is);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = detail::read_u64(is);
    const std::uint64_t numel = detail::read_u64(is);
    if (numel != ValueGrid<T>::numel_of(shape)) {
      throw DataError("checkpoint: shape/count mismatch for " + name);
    }
    std::vector<T> data(numel);
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(numel * sizeof(T)));
    if (!is) throw DataError("checkpoint: truncated tensor " + name);
    out.params.emplace_back(std::move(name),
                            ValueGrid<T>(std::move(shape), std::move(data)));
  }
  return out;
}

// Loads values into an already-built store; every name and shape must match.
template <typename T>
void restore_params(ParamStore<T>& store, const LoadedCheckpoint<T>& ckpt) {
  if (ckpt.params.size() != store.size()) {
    throw DataError("checkpoint: parameter count mismatch (file " +
                    std::to_string(ckpt.params.size()) + ", model " +
                    std::to_string(store.size()) + ")");
  }
  for (const auto& [name, grid] : ckpt.params) {
    if (!store.contains(name)) {
      throw DataError("checkpoint: model has no parameter " + name);
    }
    auto& p = store.at(name);
    if (p.value.shape != grid.shape) {
      throw DataError("checkpoint: shape mismatch for " + name);
    }
    p.value = grid;
  }
}

}  // namespace grt
