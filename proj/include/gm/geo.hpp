#pragma once

// Camera and geodesic math: pixel -> camera -> world -> GPS.
//
// Frames: camera +x right, +y down, +z forward (optical axis). World x = east,
// y = north, z = up. Poses are camera-to-world.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "gm/contour.hpp"
#include "gm/error.hpp"
#include "gm/raster.hpp"

namespace gm::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kDefaultDepthRadiusPx = 5.0;

constexpr double deg2rad(double deg) noexcept { return deg * std::numbers::pi / 180.0; }
constexpr double rad2deg(double rad) noexcept { return rad * 180.0 / std::numbers::pi; }

/// Maps any finite longitude into (-180, 180]. Values already in range are returned untouched.
inline double normalize_longitude(double lon) {
  if (lon > -180.0 && lon <= 180.0) return lon;
  double r = std::fmod(lon + 180.0, 360.0);
  if (r <= 0.0) r += 360.0;
  return r - 180.0;
}

struct Intrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) fail(ErrorCode::InvariantViolation, "focal lengths must be positive");
    if (width <= 0 || height <= 0) fail(ErrorCode::InvariantViolation, "image size must be positive");
    if (!(cx >= 0 && cx < width && cy >= 0 && cy < height)) {
      fail(ErrorCode::InvariantViolation, "principal point outside image");
    }
  }

  [[nodiscard]] Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  void validate(double tol = 1e-9) const {
    if (!rotation.allFinite() || !translation.allFinite()) {
      fail(ErrorCode::InvariantViolation, "pose has non-finite entries");
    }
    double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (ortho > tol) fail(ErrorCode::InvariantViolation, "pose rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > tol) {
      fail(ErrorCode::InvariantViolation, "pose rotation determinant is not +1");
    }
  }

  friend bool operator==(const Pose& a, const Pose& b) {
    return a.rotation == b.rotation && a.translation == b.translation;
  }
};

struct GeoPoint {
  double latitude = 0;
  double longitude = 0;

  GeoPoint() = default;
  GeoPoint(double lat, double lon) : latitude(lat), longitude(normalize_longitude(lon)) {
    if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 || lat > 90.0) {
      fail(ErrorCode::InvalidCoordinates,
           "coordinate out of range: " + std::to_string(lat) + ", " + std::to_string(lon));
    }
  }

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

struct GpsFix {
  double latitude = 0;
  double longitude = 0;
  double horizontal_accuracy = 0;

  GpsFix() = default;
  GpsFix(double lat, double lon, double accuracy = 0.0)
      : latitude(lat), longitude(normalize_longitude(lon)), horizontal_accuracy(accuracy) {
    if (!std::isfinite(lat) || !std::isfinite(lon) || lat < -90.0 || lat > 90.0) {
      fail(ErrorCode::InvalidCoordinates, "GPS fix out of range");
    }
    if (!(accuracy >= 0.0)) fail(ErrorCode::InvalidCoordinates, "GPS accuracy must be >= 0");
  }

  [[nodiscard]] GeoPoint point() const { return {latitude, longitude}; }

  friend bool operator==(const GpsFix&, const GpsFix&) = default;
};

struct CameraPoint {
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();
};

struct WorldPoint {
  Eigen::Vector3d xyz = Eigen::Vector3d::Zero();  // east, north, up
};

struct PlanarDelta {
  double north = 0;
  double east = 0;
};

inline CameraPoint back_project(double u, double v, double depth, const Intrinsics& k) {
  if (!std::isfinite(depth) || depth <= 0.0) {
    fail(ErrorCode::InvalidDepth, "depth must be positive and finite");
  }
  if (!(u >= 0.0 && u < k.width && v >= 0.0 && v < k.height)) {
    fail(ErrorCode::OutOfBounds, "pixel outside image");
  }
  return {Eigen::Vector3d((u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth)};
}

inline WorldPoint to_world(const CameraPoint& p, const Pose& pose) {
  return {pose.rotation * p.xyz + pose.translation};
}

/// Horizontal offset of a world point from the camera origin; height is dropped.
inline PlanarDelta planar_delta(const WorldPoint& x_world, const Eigen::Vector3d& origin) {
  Eigen::Vector3d d = x_world.xyz - origin;
  return {d.y(), d.x()};
}

/// Destination point on a spherical Earth reached from `origin` by the planar offset.
inline GeoPoint spherical_destination(const GpsFix& origin, const PlanarDelta& delta) {
  const double ground_distance = std::hypot(delta.north, delta.east);
  if (ground_distance == 0.0) return origin.point();

  const double bearing = std::atan2(delta.east, delta.north);
  const double angular = ground_distance / kEarthRadiusM;
  const double lat0 = deg2rad(origin.latitude);
  const double lon0 = deg2rad(origin.longitude);

  double s = std::sin(lat0) * std::cos(angular) + std::cos(lat0) * std::sin(angular) * std::cos(bearing);
  if (std::abs(s) > 1.0 + 1e-12) {
    fail(ErrorCode::InvariantViolation, "latitude sine out of range");
  }
  s = std::clamp(s, -1.0, 1.0);
  const double lat = std::asin(s);
  const double lon = lon0 + std::atan2(std::sin(bearing) * std::sin(angular) * std::cos(lat0),
                                       std::cos(angular) - std::sin(lat0) * std::sin(lat));
  return {rad2deg(lat), rad2deg(lon)};
}

/// Great-circle distance in metres (haversine form).
inline double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  const double dlat = deg2rad(b.latitude - a.latitude);
  const double dlon = deg2rad(b.longitude - a.longitude);
  const double h = std::pow(std::sin(dlat / 2), 2) +
                   std::cos(deg2rad(a.latitude)) * std::cos(deg2rad(b.latitude)) * std::pow(std::sin(dlon / 2), 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Pixel + depth straight through to GPS.
inline GeoPoint localize_pixel(double u, double v, double depth, const Intrinsics& k, const Pose& pose,
                               const GpsFix& gps) {
  const WorldPoint world = to_world(back_project(u, v, depth, k), pose);
  return spherical_destination(gps, planar_delta(world, pose.translation));
}

/// Mean of valid depths over pixels within `radius` of `center`, optionally restricted to members.
template <typename Pixels>
std::optional<double> mean_valid_depth(const DepthMap& depth, const Pixels& pixels, double cu, double cv,
                                       double radius) {
  double sum = 0;
  std::size_t n = 0;
  const double r2 = radius * radius;
  for (const PixelCoord& p : pixels) {
    const double du = p.u - cu;
    const double dv = p.v - cv;
    if (du * du + dv * dv > r2 || !depth.contains(p.u, p.v)) continue;
    const float d = depth.at(p.u, p.v);
    if (!DepthMap::valid_value(d)) continue;
    sum += d;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/// Valid-depth mean over the full disc of radius r around an integer pixel.
inline std::optional<double> disc_depth(const DepthMap& depth, int u, int v, double radius) {
  std::vector<PixelCoord> disc;
  const int ir = static_cast<int>(std::floor(radius));
  for (int dv = -ir; dv <= ir; ++dv) {
    for (int du = -ir; du <= ir; ++du) disc.push_back({u + du, v + dv});
  }
  return mean_valid_depth(depth, disc, u, v, radius);
}

struct InstanceLocalization {
  GeoPoint location;
  double centroid_u = 0;
  double centroid_v = 0;
  double centroid_depth = 0;
  std::size_t member_count = 0;
};

/// Feature localization for one instance: sub-mask, centroid, disc-averaged depth,
/// back-projection, world transform, planar delta, spherical projection.
inline InstanceLocalization localize_instance_detailed(const SegMask& mask, const Contour& contour,
                                                       const DepthMap& depth, const Intrinsics& k,
                                                       const Pose& pose, const GpsFix& gps,
                                                       double radius = kDefaultDepthRadiusPx) {
  if (!(radius >= 0.0)) fail(ErrorCode::InvalidArgument, "radius must be >= 0");
  if (!mask.same_shape(depth)) fail(ErrorCode::DimensionMismatch, "mask and depth sizes differ");

  const auto members = instance_pixels(mask, contour);
  if (members.empty()) fail(ErrorCode::EmptyInstance, "contour encloses no pixels of its class");

  double su = 0, sv = 0;
  for (const auto& p : members) {
    su += p.u;
    sv += p.v;
  }
  const double cu = su / static_cast<double>(members.size());
  const double cv = sv / static_cast<double>(members.size());

  // Sample depth around the centroid while it lies on the object, otherwise around the
  // member pixel nearest to it.
  const PixelCoord rounded{static_cast<int>(std::lround(cu)), static_cast<int>(std::lround(cv))};
  const bool centroid_on_object = std::binary_search(
      members.begin(), members.end(), rounded,
      [](const PixelCoord& a, const PixelCoord& b) { return std::tie(a.v, a.u) < std::tie(b.v, b.u); });

  double center_u = cu, center_v = cv;
  PixelCoord center_px = rounded;
  if (!centroid_on_object) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : members) {
      const double d2 = (p.u - cu) * (p.u - cu) + (p.v - cv) * (p.v - cv);
      if (d2 < best) {
        best = d2;
        center_px = p;
      }
    }
    center_u = center_px.u;
    center_v = center_px.v;
  }

  auto avg = mean_valid_depth(depth, members, center_u, center_v, radius);
  if (!avg) {
    // A disc narrower than a pixel around a fractional centre can miss every member.
    bool any_in_disc = false;
    const double r2 = radius * radius;
    for (const auto& p : members) {
      if ((p.u - center_u) * (p.u - center_u) + (p.v - center_v) * (p.v - center_v) <= r2) {
        any_in_disc = true;
        break;
      }
    }
    if (!any_in_disc && depth.valid(center_px.u, center_px.v)) avg = depth.at(center_px.u, center_px.v);
  }
  if (!avg) fail(ErrorCode::NoValidDepth, "no valid depth within the sampling disc");

  InstanceLocalization out;
  out.location = localize_pixel(cu, cv, *avg, k, pose, gps);
  out.centroid_u = cu;
  out.centroid_v = cv;
  out.centroid_depth = *avg;
  out.member_count = members.size();
  return out;
}

inline GeoPoint localize_instance(const SegMask& mask, const Contour& contour, const DepthMap& depth,
                                  const Intrinsics& k, const Pose& pose, const GpsFix& gps,
                                  double radius = kDefaultDepthRadiusPx) {
  return localize_instance_detailed(mask, contour, depth, k, pose, gps, radius).location;
}

}  // namespace gm::geo
