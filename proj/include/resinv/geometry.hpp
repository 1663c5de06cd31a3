#pragma once

#include <cmath>
#include <string>

namespace resinv {

/// Spatial extent of a 2D grid in pixels.
struct Size2 {
  int h = 0;
  int w = 0;

  friend bool operator==(const Size2&, const Size2&) = default;
  std::string str() const { return std::to_string(h) + "x" + std::to_string(w); }
};

/// Physical pixel spacing in mm per pixel along (y, x). Larger is coarser.
struct Spacing {
  double y = 1.0;
  double x = 1.0;

  friend bool operator==(const Spacing&, const Spacing&) = default;
  Spacing scaled(double f) const { return {y * f, x * f}; }
  std::string str() const { return std::to_string(y) + "," + std::to_string(x); }
};

/// True when `a` is at least as coarse as `b` along both axes (small relative slack).
inline bool coarser_or_equal(Spacing a, Spacing b) {
  constexpr double kRel = 1e-9;
  return a.y >= b.y * (1.0 - kRel) && a.x >= b.x * (1.0 - kRel);
}

}  // namespace resinv
