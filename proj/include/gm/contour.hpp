#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "gm/classes.hpp"
#include "gm/raster.hpp"

namespace gm {

/// Closed boundary of one discrete instance. Consecutive points (and last/first) are
/// 8-adjacent when produced by the tracer; hand-built polygons may use longer edges.
struct Contour {
  std::vector<PixelCoord> points;
  FeatureClass cls = FeatureClass::Background;
  int area = 0;  // pixel count of the traced component

  friend bool operator==(const Contour&, const Contour&) = default;
};

/// Pixels inside or on the contour polygon (even-odd rule at pixel centres), clipped to
/// the raster bounds. Sorted by (v, u).
inline std::vector<PixelCoord> enclosed_pixels(const Contour& contour, int width, int height) {
  std::vector<PixelCoord> out;
  const auto& pts = contour.points;
  if (pts.empty()) return out;

  int u_min = pts.front().u, u_max = u_min, v_min = pts.front().v, v_max = v_min;
  for (const auto& p : pts) {
    u_min = std::min(u_min, p.u);
    u_max = std::max(u_max, p.u);
    v_min = std::min(v_min, p.v);
    v_max = std::max(v_max, p.v);
  }
  v_min = std::max(v_min, 0);
  v_max = std::min(v_max, height - 1);
  u_min = std::max(u_min, 0);
  u_max = std::min(u_max, width - 1);

  const std::size_t n = pts.size();
  std::vector<double> crossings;
  std::vector<char> row_hits;
  for (int v = v_min; v <= v_max; ++v) {
    crossings.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const PixelCoord& a = pts[i];
      const PixelCoord& b = pts[(i + 1) % n];
      if ((a.v <= v && v < b.v) || (b.v <= v && v < a.v)) {
        crossings.push_back(a.u + static_cast<double>(v - a.v) * (b.u - a.u) / (b.v - a.v));
      }
    }
    std::sort(crossings.begin(), crossings.end());

    row_hits.assign(static_cast<std::size_t>(u_max - u_min + 1), 0);
    for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
      int lo = static_cast<int>(std::ceil(crossings[k] - 1e-9));
      int hi = static_cast<int>(std::floor(crossings[k + 1] + 1e-9));
      for (int u = std::max(lo, u_min); u <= std::min(hi, u_max); ++u) {
        row_hits[static_cast<std::size_t>(u - u_min)] = 1;
      }
    }
    for (const auto& p : pts) {
      if (p.v == v && p.u >= u_min && p.u <= u_max) row_hits[static_cast<std::size_t>(p.u - u_min)] = 1;
    }
    for (int u = u_min; u <= u_max; ++u) {
      if (row_hits[static_cast<std::size_t>(u - u_min)]) out.push_back({u, v});
    }
  }
  return out;
}

/// The instance sub-mask: enclosed pixels that carry the contour's class.
inline std::vector<PixelCoord> instance_pixels(const SegMask& mask, const Contour& contour) {
  auto pixels = enclosed_pixels(contour, mask.width(), mask.height());
  std::erase_if(pixels, [&](const PixelCoord& p) { return mask.at(p.u, p.v) != code(contour.cls); });
  return pixels;
}

}  // namespace gm
