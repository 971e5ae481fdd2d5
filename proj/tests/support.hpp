#pragma once

// Independent oracles and fixtures shared by the test binaries. The geodesy here works on
// Earth-centred unit vectors rather than the library's trigonometric forms.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

namespace oracle {

inline constexpr double kRadius = 6'371'000.0;
inline constexpr double kDeg = std::numbers::pi / 180.0;

inline Eigen::Vector3d unit(double lat_deg, double lon_deg) {
  const double p = lat_deg * kDeg, l = lon_deg * kDeg;
  return {std::cos(p) * std::cos(l), std::cos(p) * std::sin(l), std::sin(p)};
}

inline std::array<double, 2> lat_lon(const Eigen::Vector3d& n) {
  return {std::atan2(n.z(), std::hypot(n.x(), n.y())) / kDeg, std::atan2(n.y(), n.x()) / kDeg};
}

inline Eigen::Vector3d north_at(const Eigen::Vector3d& n) {
  return (Eigen::Vector3d::UnitZ() - n.z() * n).normalized();
}

inline Eigen::Vector3d east_at(const Eigen::Vector3d& n) { return north_at(n).cross(n); }

/// Great-circle distance from the chord length.
inline double distance_m(double lat1, double lon1, double lat2, double lon2) {
  const double chord = (unit(lat1, lon1) - unit(lat2, lon2)).norm();
  return 2.0 * kRadius * std::asin(std::min(1.0, chord / 2.0));
}

/// Initial bearing, radians clockwise from north.
inline double bearing_rad(double lat1, double lon1, double lat2, double lon2) {
  const Eigen::Vector3d a = unit(lat1, lon1), b = unit(lat2, lon2);
  const Eigen::Vector3d t = b - a.dot(b) * a;
  return std::atan2(t.dot(east_at(a)), t.dot(north_at(a)));
}

/// Point reached by walking `north`, `east` metres along the great circle.
inline std::array<double, 2> destination(double lat, double lon, double north, double east) {
  const Eigen::Vector3d n = unit(lat, lon);
  const double d = std::hypot(north, east);
  if (d == 0) return {lat, lon};
  const Eigen::Vector3d dir = (north * north_at(n) + east * east_at(n)) / d;
  const double a = d / kRadius;
  return lat_lon(std::cos(a) * n + std::sin(a) * dir);
}

inline double angle_diff(double a, double b) {
  return std::abs(std::remainder(a - b, 2 * std::numbers::pi));
}

/// Rotation about the world up axis by `yaw` (counter-clockwise seen from above).
inline Eigen::Matrix3d yaw(double rad) { return Eigen::AngleAxisd(rad, Eigen::Vector3d::UnitZ()).toRotationMatrix(); }

/// Population mean, standard deviation and rms, textbook single formulas.
struct Moments {
  double mean = 0, sd = 0, rms = 0;
};
template <typename Range>
Moments moments(const Range& xs) {
  double s = 0, s2 = 0, n = 0;
  for (double x : xs) {
    s += x;
    s2 += x * x;
    n += 1;
  }
  Moments m;
  m.mean = s / n;
  m.rms = std::sqrt(s2 / n);
  double v = 0;
  for (double x : xs) v += (x - m.mean) * (x - m.mean);
  m.sd = std::sqrt(v / n);
  return m;
}

}  // namespace oracle

namespace fixture {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("gm-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::string out;
  if (FILE* f = std::fopen(p.c_str(), "rb")) {
    char buf[65536];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
    std::fclose(f);
  }
  return out;
}

}  // namespace fixture

#include <map>
#include <optional>
#include <vector>

#include "gm/raster.hpp"

namespace oracle {

/// Mode with the captured label winning any tie it is part of, else the smallest label.
inline gm::Label vote(gm::Label own, const std::vector<gm::Label>& previous) {
  std::map<gm::Label, int> count;
  ++count[own];
  for (gm::Label l : previous) ++count[l];
  int best = 0;
  for (const auto& [l, c] : count) best = std::max(best, c);
  if (count[own] == best) return own;
  for (const auto& [l, c] : count) {
    if (c == best) return l;
  }
  return own;
}

struct Band {
  int top = 0, bottom = 0;
  int top_start = 0, top_end = 0, bottom_start = 0, bottom_end = 0;
};

/// Exhaustive band search: every [top, bottom] row pair with at least two rows, each row's
/// longest run found by testing every column interval. Ties go to the band lower in the image.
inline std::optional<Band> best_band(const gm::SegMask& m, gm::Label sidewalk, int row_min, int row_max, int col_min,
                                     int col_max, double min_run_fraction) {
  const int rows = row_max - row_min;
  std::vector<std::pair<int, int>> run(static_cast<std::size_t>(rows), {col_min, col_min});
  for (int r = 0; r < rows; ++r) {
    for (int s = col_min; s < col_max; ++s) {
      for (int e = s + 1; e <= col_max; ++e) {
        bool all = true;
        for (int u = s; u < e && all; ++u) all = m.at(u, row_min + r) == sidewalk;
        if (all && e - s > run[r].second - run[r].first) run[r] = {s, e};
      }
    }
  }
  const double threshold = min_run_fraction * (col_max - col_min);
  auto valid = [&](int r) {
    const int len = run[r].second - run[r].first;
    return len >= 1 && len >= threshold;
  };
  std::optional<Band> best;
  long best_area = -1;
  for (int a = 0; a < rows; ++a) {
    for (int b = a + 1; b < rows; ++b) {
      long area = 0;
      bool ok = true;
      for (int r = a; r <= b && ok; ++r) {
        ok = valid(r);
        area += run[r].second - run[r].first;
      }
      if (!ok) continue;
      if (area > best_area || (area == best_area && b > best->bottom - row_min)) {
        best_area = area;
        best = Band{row_min + a, row_min + b, run[a].first, run[a].second, run[b].first, run[b].second};
      }
    }
  }
  return best;
}

}  // namespace oracle
