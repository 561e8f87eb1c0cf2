#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hierdg/neural.hpp"

namespace hierdg {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// On-disk layout (all integers and floats little-endian):
//   magic "HDGC", uint32 version, uint32 meta length, meta bytes (JSON),
//   uint32 block count, then per block: uint32 name length, name bytes,
//   uint64 element count, that many float64 values.
// Blocks are written in the order given, which for models is their
// declaration order via collect_params.
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string meta;  // JSON text
  std::vector<std::pair<std::string, std::vector<double>>> blocks;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies current parameter values out of / back into live blocks by name and
// order; a mismatch in either direction throws.
Checkpoint snapshot_params(const std::vector<ParamBlock>& blocks, std::string meta = {});
void restore_params(const Checkpoint& ckpt, const std::vector<ParamBlock>& blocks);

}  // namespace hierdg
