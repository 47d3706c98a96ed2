#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace tutorqa {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file_hex(const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> bytes);

/// 64-bit FNV-1a; stable across platforms, used for seeding.
std::uint64_t fnv1a64(std::string_view data) noexcept;

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

}  // namespace tutorqa
