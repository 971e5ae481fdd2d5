#pragma once

// Sidewalk ROI filtering, trapezoid extraction and width estimation.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "gm/classes.hpp"
#include "gm/error.hpp"
#include "gm/geo.hpp"
#include "gm/raster.hpp"

namespace gm::sidewalk {

inline constexpr double kDefaultRoiTopFraction = 0.45;
inline constexpr double kDefaultMinRunFraction = 0.15;

/// Half-open pixel rectangle [row_min, row_max) x [col_min, col_max).
struct RegionOfInterest {
  int row_min = 0, row_max = 0;
  int col_min = 0, col_max = 0;

  void validate(int width, int height) const {
    if (!(0 <= row_min && row_min < row_max && row_max <= height && 0 <= col_min && col_min < col_max &&
          col_max <= width)) {
      fail(ErrorCode::RoiOutOfBounds, "region of interest outside the mask");
    }
  }
  [[nodiscard]] int width() const noexcept { return col_max - col_min; }
  [[nodiscard]] bool contains(int u, int v) const noexcept {
    return v >= row_min && v < row_max && u >= col_min && u < col_max;
  }

  friend bool operator==(const RegionOfInterest&, const RegionOfInterest&) = default;
};

/// Rows [top_fraction * height, height), full width.
inline RegionOfInterest default_roi(int width, int height, double top_fraction = kDefaultRoiTopFraction) {
  return {static_cast<int>(std::floor(top_fraction * height)), height, 0, width};
}

/// Columns [start, end).
struct Span {
  int start = 0, end = 0;
  [[nodiscard]] int length() const noexcept { return end - start; }
  friend bool operator==(const Span&, const Span&) = default;
};

struct Trapezoid {
  int top_row = 0, bottom_row = 0;
  Span top_span, bottom_span;

  /// Corner pixel-edge coordinates (u, v): top-left, top-right, bottom-right, bottom-left.
  [[nodiscard]] std::array<std::array<double, 2>, 4> corners() const {
    return {{{top_span.start - 0.5, double(top_row)},
             {top_span.end - 0.5, double(top_row)},
             {bottom_span.end - 0.5, double(bottom_row)},
             {bottom_span.start - 0.5, double(bottom_row)}}};
  }

  friend bool operator==(const Trapezoid&, const Trapezoid&) = default;
};

struct SidewalkMeasurement {
  geo::GeoPoint location;
  double width_m = 0;
  double top_length_m = 0;
  double bottom_length_m = 0;
  std::array<geo::GeoPoint, 4> corners;  // same order as Trapezoid::corners()
};

inline SegMask apply_roi(const SegMask& mask, const RegionOfInterest& roi) {
  roi.validate(mask.width(), mask.height());
  SegMask out = mask;
  const Label sidewalk = code(FeatureClass::Sidewalk);
  for (int v = 0; v < out.height(); ++v) {
    for (int u = 0; u < out.width(); ++u) {
      if (out.at(u, v) == sidewalk && !roi.contains(u, v)) out.at(u, v) = code(FeatureClass::Background);
    }
  }
  return out;
}

/// Longest contiguous sidewalk run inside [col_min, col_max) of one row; leftmost on ties.
inline Span longest_run(const SegMask& mask, int row, int col_min, int col_max) {
  Span best{col_min, col_min};
  int start = -1;
  for (int u = col_min; u <= col_max; ++u) {
    const bool on = u < col_max && mask.at(u, row) == code(FeatureClass::Sidewalk);
    if (on && start < 0) start = u;
    if (!on && start >= 0) {
      if (u - start > best.length()) best = {start, u};
      start = -1;
    }
  }
  return best;
}

/// Top-down row scan: a row is valid when its longest run is non-empty and covers at least
/// `min_run_fraction` of the ROI width. Returns the band of consecutive valid rows (two or
/// more) with the largest run-length sum, preferring the lower band on ties.
inline Trapezoid extract_trapezoid(const SegMask& mask, const RegionOfInterest& roi,
                                   double min_run_fraction = kDefaultMinRunFraction) {
  roi.validate(mask.width(), mask.height());
  const double threshold = min_run_fraction * roi.width();

  std::vector<Span> runs;
  runs.reserve(static_cast<std::size_t>(roi.row_max - roi.row_min));
  for (int v = roi.row_min; v < roi.row_max; ++v) runs.push_back(longest_run(mask, v, roi.col_min, roi.col_max));
  auto valid = [&](int i) {
    const int len = runs[static_cast<std::size_t>(i)].length();
    return len >= 1 && len >= threshold;
  };

  const int n = static_cast<int>(runs.size());
  std::optional<std::pair<int, int>> best;  // [first, last] indices into runs
  long best_area = -1;
  for (int i = 0; i < n;) {
    if (!valid(i)) {
      ++i;
      continue;
    }
    int j = i;
    long area = 0;
    while (j < n && valid(j)) area += runs[static_cast<std::size_t>(j++)].length();
    if (j - i >= 2 && area >= best_area) {
      best_area = area;
      best = {i, j - 1};
    }
    i = j;
  }
  if (!best) fail(ErrorCode::NoSidewalk, "no band of valid sidewalk rows in the region of interest");

  return {roi.row_min + best->first, roi.row_min + best->second, runs[static_cast<std::size_t>(best->first)],
          runs[static_cast<std::size_t>(best->second)]};
}

namespace detail {

/// Depth at the sample pixel, or the valid-depth mean over the disc of radius r around it.
inline double sample_depth(const DepthMap& depth, PixelCoord px, double radius) {
  const int iu = std::clamp(px.u, 0, depth.width() - 1);
  const int iv = std::clamp(px.v, 0, depth.height() - 1);
  if (depth.valid(iu, iv)) return depth.at(iu, iv);
  auto d = geo::disc_depth(depth, iu, iv, radius);
  if (!d) fail(ErrorCode::NoValidDepth, "no valid depth near trapezoid corner");
  return *d;
}

/// Back-projects the (possibly fractional) image point using the depth sampled at `px`.
inline geo::GeoPoint localize_point(double u, double v, PixelCoord px, const DepthMap& depth,
                                    const geo::Intrinsics& k, const geo::Pose& pose, const geo::GpsFix& gps,
                                    double radius) {
  const double cu = std::clamp(u, 0.0, std::nextafter(double(k.width), 0.0));
  const double cv = std::clamp(v, 0.0, std::nextafter(double(k.height), 0.0));
  return geo::localize_pixel(cu, cv, sample_depth(depth, px, radius), k, pose, gps);
}

}  // namespace detail

/// Localizes the four trapezoid corners; width is the mean geodesic length of the top and
/// bottom edges. The location is the localized area centroid of the trapezoid.
inline SidewalkMeasurement measure_sidewalk(const Trapezoid& trap, const DepthMap& depth,
                                            const geo::Intrinsics& k, const geo::Pose& pose,
                                            const geo::GpsFix& gps, double radius = geo::kDefaultDepthRadiusPx) {
  const auto c = trap.corners();
  SidewalkMeasurement m;
  // Edges sit half a pixel outside the run; depth comes from the run's end pixels.
  const std::array<PixelCoord, 4> samples = {{{trap.top_span.start, trap.top_row},
                                              {trap.top_span.end - 1, trap.top_row},
                                              {trap.bottom_span.end - 1, trap.bottom_row},
                                              {trap.bottom_span.start, trap.bottom_row}}};
  for (std::size_t i = 0; i < 4; ++i) {
    m.corners[i] = detail::localize_point(c[i][0], c[i][1], samples[i], depth, k, pose, gps, radius);
  }
  m.top_length_m = geo::haversine_m(m.corners[0], m.corners[1]);
  m.bottom_length_m = geo::haversine_m(m.corners[3], m.corners[2]);
  m.width_m = 0.5 * (m.top_length_m + m.bottom_length_m);

  // Polygon (shoelace) centroid; falls back to the corner mean for zero-area trapezoids.
  double a2 = 0, cx = 0, cy = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& p = c[i];
    const auto& q = c[(i + 1) % 4];
    const double cross = p[0] * q[1] - q[0] * p[1];
    a2 += cross;
    cx += (p[0] + q[0]) * cross;
    cy += (p[1] + q[1]) * cross;
  }
  if (std::abs(a2) > 1e-12) {
    cx /= 3.0 * a2;
    cy /= 3.0 * a2;
  } else {
    cx = (c[0][0] + c[1][0] + c[2][0] + c[3][0]) / 4.0;
    cy = (c[0][1] + c[1][1] + c[2][1] + c[3][1]) / 4.0;
  }
  const PixelCoord centre_px{static_cast<int>(std::lround(cx)), static_cast<int>(std::lround(cy))};
  m.location = detail::localize_point(cx, cy, centre_px, depth, k, pose, gps, radius);
  if (!(m.width_m > 0) || !std::isfinite(m.width_m)) {
    fail(ErrorCode::InvariantViolation, "measured sidewalk width is not positive");
  }
  return m;
}

}  // namespace gm::sidewalk
