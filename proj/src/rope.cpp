#include "ccvqa/rope.hpp"

#include <cmath>
#include <string>

#include "ccvqa/errors.hpp"

namespace ccvqa::lm {
namespace {

constexpr double kStepTolerance = 1e-9;

}  // namespace

std::string_view to_string(Region r) {
  switch (r) {
    case Region::context: return "context";
    case Region::rvis: return "rvis";
    case Region::query: return "query";
    case Region::generated: return "generated";
  }
  return "unknown";
}

void PositionMap::append(Region region, double increment) {
  const double last = positions.empty() ? -1.0 : positions.back();
  positions.push_back(last + increment);
  regions.push_back(region);
}

bool PositionMap::is_valid(double alpha) const {
  if (positions.size() != regions.size()) return false;
  for (std::size_t i = 1; i < positions.size(); ++i) {
    const double step = positions[i] - positions[i - 1];
    if (!(step > 0.0)) return false;
    if (regions[i] == Region::context) {
      if (std::abs(step - 1.0) > kStepTolerance && std::abs(step - alpha) > kStepTolerance) return false;
    } else if (std::abs(step - 1.0) > kStepTolerance) {
      return false;
    }
  }
  return true;
}

void rope_rotate_in_place(std::span<double> x, double m, double base) {
  if (x.size() % 2 != 0) throw ShapeError("rope_rotate needs an even dimension");
  if (!std::isfinite(m)) throw ParameterError("rope_rotate position must be finite");
  const double d = static_cast<double>(x.size());
  for (std::size_t i = 1; i <= x.size() / 2; ++i) {
    const double theta = std::pow(base, -2.0 * static_cast<double>(i) / d);
    const double angle = m * theta;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    double& a = x[2 * i - 2];
    double& b = x[2 * i - 1];
    const double ra = a * c - b * s;
    const double rb = a * s + b * c;
    a = ra;
    b = rb;
  }
}

std::vector<double> rope_rotate(std::span<const double> x, double m, double base) {
  std::vector<double> out(x.begin(), x.end());
  rope_rotate_in_place(out, m, base);
  return out;
}

std::vector<double> interpolate_positions(std::span<const double> positions, double scale) {
  if (!(scale > 1.0)) throw ParameterError("interpolation scale must be > 1");
  std::vector<double> out;
  out.reserve(positions.size());
  for (const double p : positions) out.push_back(p / scale);
  return out;
}

PositionMap assign_positions(std::span<const StreamToken> stream, const std::set<std::size_t>& low_set,
                             std::size_t sentence_count, double alpha, double start) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  if (!(start >= -1.0)) throw ParameterError("start position must be >= -1");
  PositionMap map;
  map.positions.reserve(stream.size());
  map.regions.reserve(stream.size());
  double pos = start;
  for (std::size_t j = 0; j < stream.size(); ++j) {
    const StreamToken& t = stream[j];
    double increment = 1.0;
    if (t.region == Region::context) {
      if (!t.sentence || *t.sentence >= sentence_count) {
        throw MappingError("context token " + std::to_string(j) + " has no known sentence");
      }
      if (low_set.contains(*t.sentence)) increment = alpha;
    }
    pos += increment;
    map.positions.push_back(pos);
    map.regions.push_back(t.region);
  }
  return map;
}

}  // namespace ccvqa::lm
