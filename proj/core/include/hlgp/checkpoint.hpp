#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "hlgp/sparsity.hpp"
#include "hlgp/train.hpp"

namespace hlgp {

inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  TrainingState state;
  GpSchedule schedule;
  std::string config;  // run configuration text; may be empty

  bool operator==(const Checkpoint& other) const = default;
};

// Layout: "HLGP", version byte, then the sections CONF SPEC SCHD PHAS LAYR
// OPTM RNGS HIST in that order. Each section is a 4-byte tag, a u64 payload
// length and the payload. Integers and doubles are little-endian; masks are
// run-length encoded and only active weights (and their moments) are stored.
std::string encode_checkpoint(const Checkpoint& ckpt);
// Throws ParseError naming the first section that is missing, truncated or
// malformed.
Checkpoint decode_checkpoint(std::string_view bytes);

// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hlgp
