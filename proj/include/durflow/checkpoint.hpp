#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "durflow/nn.hpp"

namespace durflow {

/// Binary model container. Layout (little-endian):
///   "DFCKPT" magic, u32 version,
///   u32 n_meta, then (str key, str value) pairs,
///   u32 n_layers, then (str name, str kind, u64 in, u64 out, u64 kernel),
///   u32 n_tensors, then (str name, u32 rank, u64 dims[rank], f64 data[]).
/// Strings are u32 length + bytes. Doubles are stored raw, so round trips are
/// bit-exact.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::map<std::string, std::string> meta;
  std::vector<LayerSpec> layers;
  std::vector<Parameter> tensors;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// FNV-1a over names, shapes and raw parameter bytes.
std::uint64_t fingerprint(const std::vector<Parameter>& params);

}  // namespace durflow
