#pragma once

// Temporal mask fusion and discrete instance extraction.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "gm/classes.hpp"
#include "gm/contour.hpp"
#include "gm/error.hpp"
#include "gm/geo.hpp"
#include "gm/raster.hpp"

namespace gm::stabilize {

inline constexpr int kDefaultPreviousFrames = 4;
inline constexpr int kDefaultMinInstanceArea = 25;

/// Projective map from a source frame's pixels to a destination frame's pixels.
struct Homography {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();

  /// Scales so that h33 = 1 whenever h33 is usable as a divisor.
  [[nodiscard]] Homography normalized() const {
    if (std::abs(m(2, 2)) > 1e-12 && std::isfinite(m(2, 2))) return {m / m(2, 2)};
    return *this;
  }
  [[nodiscard]] bool invertible() const { return std::abs(m.determinant()) > 1e-12; }
};

/// K * R_rel * K^-1 with R_rel rotating previous-camera directions into the current camera.
/// Exact for pure rotation between the two poses.
inline Homography infinite_homography(const geo::Pose& previous, const geo::Pose& current,
                                      const geo::Intrinsics& k) {
  const Eigen::Matrix3d r_rel = current.rotation.transpose() * previous.rotation;
  const Eigen::Matrix3d km = k.matrix();
  return Homography{km * r_rel * km.inverse()}.normalized();
}

/// Inverse warp with nearest-neighbour label sampling; pixels mapping outside the source
/// become background.
inline SegMask warp_mask(const SegMask& mask, const Homography& h) {
  if (!h.invertible()) fail(ErrorCode::SingularHomography, "homography is not invertible");
  const Eigen::Matrix3d inv = h.m.inverse();
  SegMask out(mask.width(), mask.height(), code(FeatureClass::Background));
  for (int v = 0; v < mask.height(); ++v) {
    for (int u = 0; u < mask.width(); ++u) {
      const Eigen::Vector3d src = inv * Eigen::Vector3d(u, v, 1.0);
      if (std::abs(src.z()) < 1e-12) continue;
      const double su = src.x() / src.z();
      const double sv = src.y() / src.z();
      if (!std::isfinite(su) || !std::isfinite(sv)) continue;
      const double fu = std::floor(su + 0.5);
      const double fv = std::floor(sv + 0.5);
      if (fu < 0 || fv < 0 || fu >= mask.width() || fv >= mask.height()) continue;
      out.at(u, v) = mask.at(static_cast<int>(fu), static_cast<int>(fv));
    }
  }
  return out;
}

/// Per-pixel mode over the captured mask and the aligned previous masks. Ties go to the
/// captured label when it is among the modes, else to the lowest tied code.
inline SegMask majority_vote(const SegMask& captured, std::span<const SegMask> aligned_previous) {
  for (const auto& m : aligned_previous) {
    if (!m.same_shape(captured)) fail(ErrorCode::DimensionMismatch, "masks to fuse differ in size");
  }
  if (aligned_previous.empty()) return captured;

  SegMask out = captured;
  std::vector<std::pair<Label, int>> tally;
  tally.reserve(aligned_previous.size() + 1);
  for (int v = 0; v < captured.height(); ++v) {
    for (int u = 0; u < captured.width(); ++u) {
      tally.clear();
      auto add = [&](Label l) {
        for (auto& [label, count] : tally) {
          if (label == l) {
            ++count;
            return;
          }
        }
        tally.emplace_back(l, 1);
      };
      const Label own = captured.at(u, v);
      add(own);
      for (const auto& m : aligned_previous) add(m.at(u, v));

      int best_count = 0;
      for (const auto& [label, count] : tally) best_count = std::max(best_count, count);
      Label winner = 255;
      bool own_wins = false;
      for (const auto& [label, count] : tally) {
        if (count != best_count) continue;
        if (label == own) own_wins = true;
        winner = std::min(winner, label);
      }
      out.at(u, v) = own_wins ? own : winner;
    }
  }
  return out;
}

namespace detail {

// Clockwise in image coordinates (v grows downward), starting east.
inline constexpr std::array<int, 8> kDu = {1, 1, 0, -1, -1, -1, 0, 1};
inline constexpr std::array<int, 8> kDv = {0, 1, 1, 1, 0, -1, -1, -1};

/// Moore-neighbour border following around the component `id`, starting from its
/// first pixel in raster order. Stops on Jacob's criterion.
inline std::vector<PixelCoord> trace_border(const Grid<int>& components, int id, PixelCoord start) {
  auto inside = [&](int u, int v) { return components.contains(u, v) && components.at(u, v) == id; };
  auto next_dir = [&](PixelCoord p, int arrived) -> int {
    const int first = (arrived + 6) % 8;
    for (int i = 0; i < 8; ++i) {
      const int d = (first + i) % 8;
      if (inside(p.u + kDu[d], p.v + kDv[d])) return d;
    }
    return -1;
  };

  std::vector<PixelCoord> points{start};
  const int first_dir = next_dir(start, 0);
  if (first_dir < 0) return points;

  PixelCoord p = start;
  int d = first_dir;
  // Bounded by visiting each pixel's 8 neighbours at most once per direction.
  const std::size_t limit = components.size() * 8 + 8;
  for (std::size_t step = 0; step < limit; ++step) {
    p = {p.u + kDu[d], p.v + kDv[d]};
    const int nd = next_dir(p, d);
    if (p == start && nd == first_dir) break;
    points.push_back(p);
    d = nd;
  }
  return points;
}

}  // namespace detail

/// Traces every 8-connected component of the requested classes. Components smaller than
/// `min_instance_area` (or than the 3 pixels a closed contour needs) are dropped. Output is
/// ordered by class code, then descending area, then first pixel in raster order.
inline std::vector<Contour> extract_instances(const SegMask& mask, const ClassSet& classes,
                                              int min_instance_area = kDefaultMinInstanceArea) {
  struct Found {
    Contour contour;
    PixelCoord start;
  };
  std::vector<Found> found;

  Grid<int> components(mask.width(), mask.height(), -1);
  std::vector<PixelCoord> queue;
  int next_id = 0;
  for (int v = 0; v < mask.height(); ++v) {
    for (int u = 0; u < mask.width(); ++u) {
      const Label l = mask.at(u, v);
      if (components.at(u, v) >= 0 || l == code(FeatureClass::Background)) continue;
      if (!is_known_code(l) || !classes.contains(static_cast<FeatureClass>(l))) continue;

      const int id = next_id++;
      int area = 0;
      queue.assign(1, {u, v});
      components.at(u, v) = id;
      while (!queue.empty()) {
        PixelCoord p = queue.back();
        queue.pop_back();
        ++area;
        for (int d = 0; d < 8; ++d) {
          const int nu = p.u + detail::kDu[d];
          const int nv = p.v + detail::kDv[d];
          if (!mask.contains(nu, nv) || components.at(nu, nv) >= 0 || mask.at(nu, nv) != l) continue;
          components.at(nu, nv) = id;
          queue.push_back({nu, nv});
        }
      }
      if (area < min_instance_area || area < 3) continue;

      Contour c;
      c.cls = static_cast<FeatureClass>(l);
      c.area = area;
      c.points = detail::trace_border(components, id, {u, v});
      if (c.points.size() < 3) continue;
      found.push_back({std::move(c), {u, v}});
    }
  }

  std::sort(found.begin(), found.end(), [](const Found& a, const Found& b) {
    return std::make_tuple(code(a.contour.cls), -a.contour.area, a.start.v, a.start.u) <
           std::make_tuple(code(b.contour.cls), -b.contour.area, b.start.v, b.start.u);
  });
  std::vector<Contour> out;
  out.reserve(found.size());
  for (auto& f : found) out.push_back(std::move(f.contour));
  return out;
}

}  // namespace gm::stabilize
