#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tnt/common/error.hpp"
#include "tnt/common/sha256.hpp"
#include "tnt/core/tensor.hpp"
#include "tnt/nn/layers.hpp"

namespace tnt::nn {

using Json = nlohmann::ordered_json;

/// Versioned checkpoint container: a JSON metadata document followed by named
/// float64 tensors (parameters and running buffers), raw little-endian.
struct Checkpoint {
  Json meta;
  std::vector<std::pair<std::string, Tensor<double>>> tensors;

  const Tensor<double>* find(const std::string& name) const {
    for (const auto& [n, t] : tensors)
      if (n == name) return &t;
    return nullptr;
  }
};

namespace detail {

constexpr char kMagic[8] = {'T', 'N', 'T', 'C', 'K', 'P', 'T', '1'};

template <typename V>
void write_pod(std::ofstream& f, const V& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
V read_pod(std::ifstream& f) {
  V v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(V));
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("save_checkpoint: cannot open " + path);
  f.write(detail::kMagic, sizeof(detail::kMagic));
  const std::string meta = ckpt.meta.dump();
  detail::write_pod<std::uint64_t>(f, meta.size());
  f.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  detail::write_pod<std::uint64_t>(f, ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    detail::write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    detail::write_pod<std::uint8_t>(f, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) detail::write_pod<std::uint64_t>(f, d);
    f.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.numel() * sizeof(double)));
  }
  if (!f) throw IoError("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_checkpoint: cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, detail::kMagic, 8) != 0)
    throw IoError("load_checkpoint: bad magic in " + path);
  const auto meta_len = detail::read_pod<std::uint64_t>(f);
  std::string meta(meta_len, '\0');
  f.read(meta.data(), static_cast<std::streamsize>(meta_len));
  Checkpoint ckpt;
  ckpt.meta = Json::parse(meta);
  const auto count = detail::read_pod<std::uint64_t>(f);
  ckpt.tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = detail::read_pod<std::uint32_t>(f);
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    const auto rank = detail::read_pod<std::uint8_t>(f);
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = detail::read_pod<std::uint64_t>(f);
    Tensor<double> t(shape);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!f) throw IoError("load_checkpoint: truncated tensor data in " + path);
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

/// Snapshot of every parameter and buffer of a network, keyed by name.
inline std::vector<std::pair<std::string, Tensor<double>>> snapshot_state(Sequential<double>& net) {
  std::vector<std::pair<std::string, Tensor<double>>> out;
  for (auto& p : net.parameters()) out.emplace_back(p.name, *p.value);
  for (auto& b : net.buffers()) out.emplace_back(b.name, *b.value);
  return out;
}

inline void restore_state(Sequential<double>& net,
                          const std::vector<std::pair<std::string, Tensor<double>>>& state) {
  auto apply = [&](const std::string& name, Tensor<double>* dst) {
    for (const auto& [n, t] : state)
      if (n == name) {
        if (!t.same_shape(*dst))
          throw ShapeError("restore_state: shape mismatch for " + name);
        *dst = t;
        return;
      }
    throw IoError("restore_state: missing tensor " + name);
  };
  for (auto& p : net.parameters()) apply(p.name, p.value);
  for (auto& b : net.buffers()) apply(b.name, b.value);
}

/// SHA-256 over the raw parameter bytes, in declaration order. Used to prove
/// a model was not touched by an operation.
inline std::string parameter_digest(Sequential<double>& net) {
  Sha256 h;
  for (auto& p : net.parameters())
    h.update(p.value->data(), p.value->numel() * sizeof(double));
  return h.hex_digest();
}

}  // namespace tnt::nn
