#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace ckrl {

// Shortest decimal form that parses back to the same double.
std::string format_double(double x);
// Throws DataError when `s` is not a complete floating-point literal.
double parse_double(std::string_view s);
std::uint64_t parse_uint(std::string_view s);

// 64-bit FNV-1a, used to fingerprint cache inputs.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t file_digest(std::span<const std::filesystem::path> files);
std::string to_hex(std::uint64_t x);

}  // namespace ckrl
