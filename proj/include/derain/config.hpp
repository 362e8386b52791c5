#pragma once

// Plain-text configuration: `key = value` lines grouped under `[section]`
// headers, `#` or `;` starting a comment. Every key must be known; a typo is
// an error naming the file and line. The format is described in
// docs/config-format.md.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "derain/engine.hpp"
#include "derain/synth.hpp"

namespace derain {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sections: [model] [csc] [dictionary] [tv] [align]. Missing keys keep the
/// EngineConfig defaults. The result is validated.
EngineConfig parse_engine_config(std::string_view text, const std::string& origin = "<config>");
EngineConfig load_engine_config(const std::filesystem::path& path);
/// Writes every field, so parse_engine_config(format_engine_config(c)) == c.
std::string format_engine_config(const EngineConfig& cfg);

/// Section [streaks], keys as in StreakParams (angle, length, ..., *_rate).
StreakParams parse_streak_params(std::string_view text, const std::string& origin = "<params>");
StreakParams load_streak_params(const std::filesystem::path& path);
std::string format_streak_params(const StreakParams& p);

/// "13x3, 9x3, 3x3" <-> scale list.
std::vector<ScaleSpec> parse_scale_list(std::string_view text);
std::string format_scale_list(const std::vector<ScaleSpec>& scales);

}  // namespace derain
