#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace s2p {

std::string sha256_hex(std::string_view data);

std::uint64_t fnv1a64(const void* data, std::size_t size);

std::string base64_encode(const void* data, std::size_t size);

/// Fixed-point decimal with round-half-to-even; "-0.00" is normalized to
/// "0.00" so coordinates at the origin print without a stray sign.
std::string format_fixed(double value, int precision);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

/// Writes only when the on-disk content differs, so reruns over unchanged
/// inputs keep mtimes. Returns true when the file was (re)written.
bool write_if_changed(const std::filesystem::path& path, std::string_view data);

}  // namespace s2p
