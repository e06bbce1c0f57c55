#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "mfg/model.hpp"

namespace mfg {

/// Reads a config document. Syntax errors name the line and column; missing or
/// mistyped entries name the field path (e.g. rates.q_up[2][1], 1-based).
/// Throws ConfigError. Does not run validate().
GameConfig parse_config(const std::string& text, const std::string& source = "<config>");
GameConfig parse_config(const nlohmann::json& doc);

GameConfig load_config(const std::filesystem::path& path);

/// Canonical JSON form; parse_config(config_to_json(c)) reproduces c.
nlohmann::json config_to_json(const GameConfig& cfg);

/// FNV-1a 64 of the canonical dump, as 16 hex digits.
std::string config_hash(const GameConfig& cfg);

std::string fnv1a_hex(const std::string& bytes);

nlohmann::json matrix_to_json(const Matrix& a);

}  // namespace mfg
