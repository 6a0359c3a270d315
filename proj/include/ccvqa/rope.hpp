#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

namespace ccvqa::lm {

using TokenId = std::uint32_t;

enum class Region { context, rvis, query, generated };
std::string_view to_string(Region r);

// Real-valued position per token plus the region each token came from.
struct PositionMap {
  std::vector<double> positions;
  std::vector<Region> regions;

  std::size_t size() const { return positions.size(); }
  // Appends one token `increment` after the current last position (or at
  // `increment - 1` when empty, matching start = -1).
  void append(Region region, double increment = 1.0);
  // Strictly increasing, +1 outside the context region, +1 or +alpha inside.
  bool is_valid(double alpha) const;
};

// Rotates each 2-plane (x[2i-2], x[2i-1]), i = 1..d/2, by m * theta_i with
// theta_i = base^(-2i/d). Fractional m is allowed. ShapeError on odd length.
std::vector<double> rope_rotate(std::span<const double> x, double m, double base = 10000.0);
void rope_rotate_in_place(std::span<double> x, double m, double base = 10000.0);

// Position interpolation: every position divided by `scale` (> 1).
std::vector<double> interpolate_positions(std::span<const double> positions, double scale);

struct StreamToken {
  TokenId token = 0;
  Region region = Region::query;
  std::optional<std::size_t> sentence;  // required for context tokens
};

// Correlation-aware positions. Each token advances by alpha when its sentence
// is in `low_set`, otherwise by 1; non-context tokens always advance by 1.
// The first token lands at start + its increment. Throws MappingError for a
// context token with a missing or out-of-range sentence index.
PositionMap assign_positions(std::span<const StreamToken> stream, const std::set<std::size_t>& low_set,
                             std::size_t sentence_count, double alpha, double start = -1.0);

}  // namespace ccvqa::lm
