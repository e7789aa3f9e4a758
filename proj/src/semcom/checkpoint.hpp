#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semcom/gate.hpp"

namespace semcom {

// Layout: "SMCK", version byte 0x01, u32 LE manifest length, UTF-8 JSON
// manifest, then every tensor as little-endian float32, concatenated in
// manifest order. Offsets and counts in the manifest are in floats.
inline constexpr char kCheckpointMagic[4] = {'S', 'M', 'C', 'K'};
inline constexpr unsigned char kCheckpointVersion = 0x01;

struct Checkpoint {
  ExpertRegistry registry;
  std::optional<GateModel> gate;
  nlohmann::json meta = nlohmann::json::object();
};

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(std::span<const unsigned char> bytes);

// Writes through a temporary file and renames it into place.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace semcom
