#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pielab/mask.hpp"
#include "pielab/nn/model.hpp"
#include "pielab/nn/optimizer.hpp"

namespace pielab::nn {

inline constexpr std::string_view kCheckpointMagic = "PIELAB1\n";
inline constexpr int kCheckpointVersion = 1;

/// Model state at the end of an epoch.
///
/// On disk: the 8-byte magic, a little-endian u64 length followed by that many
/// bytes of JSON metadata (spec, epoch, RNG state and an array directory with
/// byte offsets), the raw arrays (f32 little-endian, masks bit-packed), and a
/// trailing little-endian CRC32 over everything between the magic and the CRC.
struct Checkpoint {
  int format_version = kCheckpointVersion;
  int epoch = 0;
  ParamSet<float> params;
  OptimizerState<float> optimizer;
  std::string rng_state;
  std::optional<PruneMask> mask;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const nlohmann::json& j);

/// Little-endian float32 encoding, independent of host byte order.
void append_f32_le(std::vector<std::uint8_t>& out, float v);
float read_f32_le(const std::uint8_t* p);

}  // namespace pielab::nn
