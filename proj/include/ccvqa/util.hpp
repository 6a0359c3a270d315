#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace ccvqa {

// 64-bit FNV-1a. Stable across platforms, used to seed stub vectors and key caches.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform double in [-1, 1) built directly from mt19937_64 output bits, so the
// sequence does not depend on the standard library's distribution classes.
inline double uniform_pm1(std::mt19937_64& rng) {
  const auto bits = rng() >> 11;  // 53 significant bits
  return static_cast<double>(bits) * 0x1.0p-52 - 1.0;
}

std::string to_lower(std::string_view text);
std::string trim(std::string_view text);
bool contains(std::string_view haystack, std::string_view needle);

// Reads a whole file; throws ccvqa::Error when it cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace ccvqa
