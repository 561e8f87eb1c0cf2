#include "hierdg/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace hierdg {

namespace {

constexpr char kMagic[4] = {'H', 'D', 'G', 'C'};

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw CheckpointError(std::string("truncated checkpoint while reading ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open for write: " + path.string());
  os.write(kMagic, sizeof kMagic);
  write_pod<uint32_t>(os, kCheckpointVersion);
  write_pod<uint32_t>(os, static_cast<uint32_t>(ckpt.meta.size()));
  os.write(ckpt.meta.data(), static_cast<std::streamsize>(ckpt.meta.size()));
  write_pod<uint32_t>(os, static_cast<uint32_t>(ckpt.blocks.size()));
  for (const auto& [name, values] : ckpt.blocks) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<uint64_t>(os, static_cast<uint64_t>(values.size()));
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(double)));
  }
  if (!os) throw CheckpointError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path.string());
  char magic[4];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw CheckpointError("not a checkpoint file: " + path.string());
  const uint32_t version = read_pod<uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  const uint32_t meta_len = read_pod<uint32_t>(is, "meta length");
  ckpt.meta.resize(meta_len);
  is.read(ckpt.meta.data(), meta_len);
  if (!is) throw CheckpointError("truncated checkpoint meta");
  const uint32_t n_blocks = read_pod<uint32_t>(is, "block count");
  ckpt.blocks.reserve(n_blocks);
  for (uint32_t b = 0; b < n_blocks; ++b) {
    const uint32_t name_len = read_pod<uint32_t>(is, "block name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw CheckpointError("truncated block name");
    const uint64_t count = read_pod<uint64_t>(is, "block size");
    std::vector<double> values(count);
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw CheckpointError("truncated block data for " + name);
    ckpt.blocks.emplace_back(std::move(name), std::move(values));
  }
  return ckpt;
}

Checkpoint snapshot_params(const std::vector<ParamBlock>& blocks, std::string meta) {
  Checkpoint ckpt;
  ckpt.meta = std::move(meta);
  ckpt.blocks.reserve(blocks.size());
  for (const auto& b : blocks)
    ckpt.blocks.emplace_back(b.name, std::vector<double>(b.value, b.value + b.size));
  return ckpt;
}

void restore_params(const Checkpoint& ckpt, const std::vector<ParamBlock>& blocks) {
  if (ckpt.blocks.size() != blocks.size())
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.blocks.size()) +
                          " blocks, model has " + std::to_string(blocks.size()));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& [name, values] = ckpt.blocks[i];
    if (name != blocks[i].name)
      throw CheckpointError("block order mismatch: checkpoint has '" + name + "', model has '" +
                            blocks[i].name + "'");
    if (values.size() != blocks[i].size)
      throw CheckpointError("block '" + name + "' size mismatch");
    std::copy(values.begin(), values.end(), blocks[i].value);
  }
}

}  // namespace hierdg
