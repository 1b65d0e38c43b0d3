#pragma once

#include "dtd/controller.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace dtd {

// Binary layout, all integers u32 little-endian, all values f64 little-endian:
//   "DTD1" | version (1 byte) | env name (len + bytes) | record*
//   record = name (len + bytes) | rank | dims[rank] | values[prod(dims)]
// Matrices are stored row-major.
inline constexpr char kCheckpointMagic[4] = {'D', 'T', 'D', '1'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  DtdConfig config;
  Agents agents;
  int epoch = 0;  // epochs trained when saved
};

std::string encode_checkpoint(const DtdConfig& config, const Agents& agents, int epoch);
/// Throws FormatError on bad magic, version, truncation or missing records and
/// ShapeError when stored tensors do not fit the recorded environment.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const DtdConfig& config,
                     const Agents& agents, int epoch);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ShapeError if the checkpoint's networks cannot drive `spec`.
void check_compatible(const Checkpoint& ckpt, const EnvSpec& spec);

}  // namespace dtd
