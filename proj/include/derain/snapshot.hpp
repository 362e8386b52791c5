#pragma once

// Binary OnlineState snapshots. Layout (all integers and reals little-endian,
// reals IEEE-754 binary64), see docs/snapshot-format.md:
//
//   "DRSNAPSH"  u32 version  i32 height  i32 width  i64 t  f64 sigma2
//   u32 scales  {i32 patch, i32 count}*
//   {f64 taps[p*p]}* per filter, row-major     f64 b[filters]
//   grid B, grid anchor, f64 anchor_to_current[6], u8 H[h*w]
//   grid T, grid F, grid tv_px, grid tv_py
//   u8 has_csc [ {grid}*filters maps, {grid}*filters dual, f64 penalty ]
//   f64 forgetting  i64 committed  u8 pending  u32 taps
//   f64 past_gram[taps*taps] past_cross[taps] frame_gram[..] frame_cross[..]
//   u32 n {grid}* recent    u32 n {grid, u32 len, bytes label}* pending
//   u64 FNV-1a of every preceding byte
//
// A grid is h*w f64 values with the snapshot's dimensions.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "derain/engine.hpp"

namespace derain {

class SnapshotError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kSnapshotVersion = 1;

std::vector<std::uint8_t> serialize_state(const OnlineState& s);
OnlineState deserialize_state(std::span<const std::uint8_t> bytes);

void save_state(const std::filesystem::path& path, const OnlineState& s);
OnlineState load_state(const std::filesystem::path& path);

/// FNV-1a over the serialized form; equal states hash equal.
std::uint64_t state_hash(const OnlineState& s);

}  // namespace derain
