#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace cocycle {

/// Lower-case hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 of a file's contents; throws std::runtime_error naming the path
/// when it cannot be read.
std::string sha256_file(const std::filesystem::path& path);

/// Canonical form: object keys sorted, no whitespace.
std::string canonical_json(const nlohmann::json& j);

/// First 16 hex digits of the SHA-256 of the canonical form.
std::string json_digest(const nlohmann::json& j);

}  // namespace cocycle
