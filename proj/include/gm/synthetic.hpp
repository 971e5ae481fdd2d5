#pragma once

// Synthetic scene generator: ray-cast ground plane, sidewalk strip and vertical objects,
// producing ideal depth and masks with known ground truth, plus optional sensor noise.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "json.hpp"

#include "gm/classes.hpp"
#include "gm/error.hpp"
#include "gm/geo.hpp"
#include "gm/session.hpp"
#include "gm/stabilize.hpp"

namespace gm::synthetic {

using Json = nlohmann::json;

enum class Shape {
  Billboard,  // vertical rectangle through the anchor, facing the camera's horizontal heading
  Cylinder,   // vertical cylinder around the anchor; its visible surface is radius-offset
};

struct SceneObject {
  std::string id;
  FeatureClass cls = FeatureClass::Pole;
  double east = 0, north = 0;  // anchor, metres from the scene origin
  Shape shape = Shape::Billboard;
  double width = 0.12;  // billboard width or cylinder diameter
  double base = 0.0, top = 3.0;
};

struct SidewalkStrip {
  Eigen::Vector2d start = Eigen::Vector2d::Zero();  // (east, north) of the centre line
  Eigen::Vector2d end = Eigen::Vector2d(0, 100);
  double width = 2.0;
};

struct SceneSpec {
  geo::GeoPoint origin{47.6205, -122.3493};
  geo::Intrinsics camera{450.0, 450.0, 319.5, 239.5, 640, 480};
  double max_depth_m = 10.0;  // depth sensor range; farther surfaces read as dropouts
  std::optional<SidewalkStrip> sidewalk = SidewalkStrip{};
  std::vector<SceneObject> objects;
  ClassSet classes;  // empty = sidewalk (if present) + object classes
};

struct TrajectorySpec {
  Eigen::Vector2d start = Eigen::Vector2d(0, 0);
  Eigen::Vector2d end = Eigen::Vector2d(0, 98);
  int captures = 50;
  int frames_per_capture = 5;  // captured frame plus preceding video frames
  double camera_height = 1.4;
  double pitch_deg = 0.0;  // downward
  double roll_deg = 5.0;
  double jitter_deg = 0.0;  // rotation-only hand jitter on preceding frames
  double frame_interval_s = 1.0 / 30.0;
  double capture_interval_s = 1.5;
  bool write_homographies = false;
};

struct NoiseSpec {
  double gps_sigma_m = 0.0;    // horizontal 2D standard deviation (sigma / sqrt(2) per axis)
  double depth_sigma_m = 0.0;  // per-pixel Gaussian
  std::uint64_t seed = 1;
};

struct TrajectoryPoint {
  geo::Pose pose;
  std::optional<geo::GpsFix> gps;  // derived from the pose when absent
  double timestamp = 0;
  bool capture = false;
};

/// East/north offset to latitude/longitude on the sphere via rotation of the origin's unit
/// vector. Independent of the trig destination formulas in gm::geo.
inline geo::GeoPoint enu_to_geo(const geo::GeoPoint& origin, double east, double north) {
  const double lat = geo::deg2rad(origin.latitude);
  const double lon = geo::deg2rad(origin.longitude);
  const Eigen::Vector3d up(std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat));
  const Eigen::Vector3d e(-std::sin(lon), std::cos(lon), 0.0);
  const Eigen::Vector3d n = up.cross(e);
  const double d = std::hypot(east, north);
  if (d == 0.0) return origin;
  const double delta = d / geo::kEarthRadiusM;
  const Eigen::Vector3d dir = (north * n + east * e) / d;
  const Eigen::Vector3d p = std::cos(delta) * up + std::sin(delta) * dir;
  return {geo::rad2deg(std::atan2(p.z(), std::hypot(p.x(), p.y()))), geo::rad2deg(std::atan2(p.y(), p.x()))};
}

/// Camera-to-world rotation for a camera heading `heading_rad` (clockwise from north),
/// pitched down by `pitch_rad` and rolled by `roll_rad` about its optical axis.
inline Eigen::Matrix3d camera_rotation(double heading_rad, double pitch_rad, double roll_rad = 0.0) {
  const Eigen::Vector3d forward(std::sin(heading_rad) * std::cos(pitch_rad), std::cos(heading_rad) * std::cos(pitch_rad),
                                -std::sin(pitch_rad));
  const Eigen::Vector3d right(std::cos(heading_rad), -std::sin(heading_rad), 0.0);
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return r * Eigen::AngleAxisd(roll_rad, Eigen::Vector3d::UnitZ()).toRotationMatrix();
}

inline void validate(const SceneSpec& scene) {
  try {
    scene.camera.validate();
  } catch (const Error& e) {
    fail(ErrorCode::DegenerateScene, e.what());
  }
  if (!(scene.max_depth_m > 0)) fail(ErrorCode::DegenerateScene, "depth range must be positive");
  if (scene.sidewalk && !(scene.sidewalk->width > 0)) fail(ErrorCode::DegenerateScene, "sidewalk width must be positive");
  if (scene.sidewalk && (scene.sidewalk->end - scene.sidewalk->start).norm() == 0) {
    fail(ErrorCode::DegenerateScene, "sidewalk centre line has zero length");
  }
  for (const auto& o : scene.objects) {
    if (!is_mappable(o.cls) || o.cls == FeatureClass::Sidewalk) {
      fail(ErrorCode::DegenerateScene, "object " + o.id + " must be a vertical feature class");
    }
    if (!(o.width > 0) || !(o.top > o.base) || o.base < 0) {
      fail(ErrorCode::DegenerateScene, "object " + o.id + " has degenerate extent");
    }
  }
}

namespace detail {

struct Hit {
  double depth = std::numeric_limits<double>::infinity();
  Label label = code(FeatureClass::Background);
};

inline void hit_object(const SceneObject& o, const Eigen::Vector3d& t, const Eigen::Vector3d& d,
                       const Eigen::Vector2d& facing, Hit& best) {
  const Eigen::Vector2d c(o.east, o.north);
  double s = std::numeric_limits<double>::infinity();
  if (o.shape == Shape::Billboard) {
    const double denom = d.head<2>().dot(facing);
    if (std::abs(denom) < 1e-12) return;
    s = (c - t.head<2>()).dot(facing) / denom;
    if (!(s > 0)) return;
    const Eigen::Vector3d p = t + s * d;
    const Eigen::Vector2d lateral(facing.y(), -facing.x());
    if (std::abs((p.head<2>() - c).dot(lateral)) > 0.5 * o.width) return;
  } else {
    const Eigen::Vector2d oc = t.head<2>() - c;
    const double a = d.head<2>().squaredNorm();
    if (a < 1e-18) return;
    const double b = 2.0 * oc.dot(d.head<2>());
    const double cc = oc.squaredNorm() - 0.25 * o.width * o.width;
    const double disc = b * b - 4 * a * cc;
    if (disc < 0) return;
    const double sq = std::sqrt(disc);
    const double s0 = (-b - sq) / (2 * a);
    const double s1 = (-b + sq) / (2 * a);
    s = s0 > 0 ? s0 : s1;
    if (!(s > 0)) return;
  }
  const double z = t.z() + s * d.z();
  if (z < o.base || z > o.top) return;
  if (s < best.depth) best = {s, code(o.cls)};
}

}  // namespace detail

struct RenderedFrame {
  SegMask mask;
  DepthMap depth;
};

/// Pixel rectangle [u0, u1) x [v0, v1) that may see the object: empty when the bounding box
/// is entirely behind the camera, the full image when it straddles the camera plane.
inline std::array<int, 4> screen_bounds(const SceneObject& o, const geo::Intrinsics& k, const geo::Pose& pose) {
  const double r = 0.5 * o.width;
  double umin = std::numeric_limits<double>::infinity(), umax = -umin, vmin = umin, vmax = -umin;
  int behind = 0;
  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector3d w(o.east + ((i & 1) ? r : -r), o.north + ((i & 2) ? r : -r), (i & 4) ? o.top : o.base);
    const Eigen::Vector3d c = pose.rotation.transpose() * (w - pose.translation);
    if (c.z() < 1e-3) {
      ++behind;
      continue;
    }
    const double u = k.fx * c.x() / c.z() + k.cx;
    const double v = k.fy * c.y() / c.z() + k.cy;
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  if (behind == 8) return {0, 0, 0, 0};
  if (behind > 0) return {0, k.width, 0, k.height};
  auto lo = [](double x, int n) { return static_cast<int>(std::clamp(std::floor(x) - 1, 0.0, double(n))); };
  auto hi = [](double x, int n) { return static_cast<int>(std::clamp(std::ceil(x) + 2, 0.0, double(n))); };
  return {lo(umin, k.width), hi(umax, k.width), lo(vmin, k.height), hi(vmax, k.height)};
}

/// Ideal z-depth and nearest-hit class for every pixel.
inline RenderedFrame render(const SceneSpec& scene, const geo::Pose& pose) {
  const auto& k = scene.camera;
  RenderedFrame out{SegMask(k.width, k.height, code(FeatureClass::Background)), DepthMap(k.width, k.height, 0.0f)};
  const Eigen::Vector3d& t = pose.translation;
  Eigen::Vector2d facing = pose.rotation.col(2).head<2>();
  if (facing.norm() < 1e-9) facing = pose.rotation.col(1).head<2>() * -1.0;
  facing.normalize();

  std::vector<std::array<int, 4>> bounds;
  for (const auto& o : scene.objects) bounds.push_back(screen_bounds(o, k, pose));

  std::optional<Eigen::Vector2d> side_dir;
  double side_len = 0;
  if (scene.sidewalk) {
    side_dir = (scene.sidewalk->end - scene.sidewalk->start).normalized();
    side_len = (scene.sidewalk->end - scene.sidewalk->start).norm();
  }

  auto labels = out.mask.values();
  auto depths = out.depth.values();
  const Eigen::Vector3d col_u = pose.rotation.col(0) / k.fx;
  for (int v = 0; v < k.height; ++v) {
    const Eigen::Vector3d row = pose.rotation.col(1) * ((v - k.cy) / k.fy) + pose.rotation.col(2) - col_u * k.cx;
    for (int u = 0; u < k.width; ++u) {
      const Eigen::Vector3d d = row + col_u * u;
      detail::Hit best;
      if (d.z() < 0) {
        const double s = -t.z() / d.z();
        best.depth = s;
        best.label = code(FeatureClass::Background);
        if (scene.sidewalk) {
          const Eigen::Vector2d p = (t + s * d).head<2>() - scene.sidewalk->start;
          const double along = p.dot(*side_dir);
          const double across = p.dot(Eigen::Vector2d(side_dir->y(), -side_dir->x()));
          if (along >= 0 && along <= side_len && std::abs(across) <= 0.5 * scene.sidewalk->width) {
            best.label = code(FeatureClass::Sidewalk);
          }
        }
      }
      for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const auto& b = bounds[i];
        if (u < b[0] || u >= b[1] || v < b[2] || v >= b[3]) continue;
        detail::hit_object(scene.objects[i], t, d, facing, best);
      }
      if (!std::isfinite(best.depth)) continue;  // sky
      const std::size_t i = static_cast<std::size_t>(v) * static_cast<std::size_t>(k.width) + static_cast<std::size_t>(u);
      labels[i] = best.label;
      if (best.depth <= scene.max_depth_m) depths[i] = static_cast<float>(best.depth);
    }
  }
  return out;
}

/// Walks the trajectory line: each capture is preceded by `frames_per_capture - 1` video
/// frames at the same position (optionally with rotation jitter).
inline std::vector<TrajectoryPoint> build_trajectory(const TrajectorySpec& spec, std::uint64_t seed = 7) {
  if (spec.captures < 1 || spec.frames_per_capture < 1) fail(ErrorCode::DegenerateScene, "trajectory needs captures");
  if (!(spec.camera_height > 0)) fail(ErrorCode::DegenerateScene, "camera below ground");
  if (!(spec.frame_interval_s > 0) || !(spec.capture_interval_s > spec.frame_interval_s * spec.frames_per_capture)) {
    fail(ErrorCode::DegenerateScene, "capture interval too short for its preceding frames");
  }
  const Eigen::Vector2d dir = spec.end - spec.start;
  const double heading = dir.norm() > 0 ? std::atan2(dir.x(), dir.y()) : 0.0;
  const Eigen::Matrix3d base =
      camera_rotation(heading, geo::deg2rad(spec.pitch_deg), geo::deg2rad(spec.roll_deg));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, geo::deg2rad(spec.jitter_deg));

  std::vector<TrajectoryPoint> out;
  for (int c = 0; c < spec.captures; ++c) {
    const double f = spec.captures == 1 ? 0.0 : double(c) / (spec.captures - 1);
    const Eigen::Vector2d p = spec.start + f * dir;
    const Eigen::Vector3d t(p.x(), p.y(), spec.camera_height);
    const double t_capture = (c + 1) * spec.capture_interval_s;
    for (int j = spec.frames_per_capture - 1; j >= 0; --j) {
      TrajectoryPoint tp;
      tp.pose.translation = t;
      tp.pose.rotation = base;
      if (j > 0 && spec.jitter_deg > 0) {
        const Eigen::Matrix3d jr = (Eigen::AngleAxisd(jitter(rng), Eigen::Vector3d::UnitX()) *
                                    Eigen::AngleAxisd(jitter(rng), Eigen::Vector3d::UnitY()) *
                                    Eigen::AngleAxisd(jitter(rng), Eigen::Vector3d::UnitZ()))
                                       .toRotationMatrix();
        tp.pose.rotation = base * jr;
      }
      tp.timestamp = t_capture - j * spec.frame_interval_s;
      tp.capture = j == 0;
      out.push_back(tp);
    }
  }
  return out;
}

/// Renders every trajectory point into a session with ground truth.
inline session::Session generate_synthetic(const SceneSpec& scene, const std::vector<TrajectoryPoint>& trajectory,
                                           const NoiseSpec& noise, bool write_homographies = false,
                                           std::string session_id = "synthetic") {
  validate(scene);
  if (trajectory.empty()) fail(ErrorCode::DegenerateScene, "empty trajectory");
  if (noise.gps_sigma_m < 0 || noise.depth_sigma_m < 0) fail(ErrorCode::DegenerateScene, "noise sigma must be >= 0");

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gps_axis(0.0, noise.gps_sigma_m / std::numbers::sqrt2);
  std::normal_distribution<double> depth_noise(0.0, noise.depth_sigma_m);

  session::Session s;
  s.session_id = std::move(session_id);
  s.class_selection = scene.classes;
  if (s.class_selection.empty()) {
    if (scene.sidewalk) s.class_selection.insert(FeatureClass::Sidewalk);
    for (const auto& o : scene.objects) s.class_selection.insert(o.cls);
  }

  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto& tp = trajectory[i];
    try {
      tp.pose.validate();
    } catch (const Error& e) {
      fail(ErrorCode::DegenerateScene, e.what());
    }
    if (!(tp.pose.translation.z() > 0)) fail(ErrorCode::DegenerateScene, "camera at or below the ground plane");

    session::FrameBundle f;
    f.frame_id = static_cast<int>(i);
    f.timestamp = tp.timestamp;
    f.intrinsics = scene.camera;
    f.pose = tp.pose;
    RenderedFrame r = render(scene, tp.pose);
    f.mask = std::move(r.mask);
    f.depth = std::move(r.depth);
    if (noise.depth_sigma_m > 0) {
      for (float& d : f.depth.values()) {
        if (DepthMap::valid_value(d)) d = static_cast<float>(d + depth_noise(rng));
      }
    }
    if (tp.gps) {
      f.gps = *tp.gps;
    } else {
      geo::GeoPoint truth = enu_to_geo(scene.origin, tp.pose.translation.x(), tp.pose.translation.y());
      if (noise.gps_sigma_m > 0) {
        const double de = gps_axis(rng);
        const double dn = gps_axis(rng);
        truth = enu_to_geo(scene.origin, tp.pose.translation.x() + de, tp.pose.translation.y() + dn);
      }
      f.gps = geo::GpsFix(truth.latitude, truth.longitude, noise.gps_sigma_m);
    }
    if (tp.capture) s.capture_indices.push_back(f.frame_id);
    s.frames.push_back(std::move(f));
  }
  if (write_homographies) {
    for (std::size_t i = 0; i + 1 < s.frames.size(); ++i) {
      s.frames[i].homography_to_next =
          stabilize::infinite_homography(s.frames[i].pose, s.frames[i + 1].pose, scene.camera);
    }
  }

  session::GroundTruth gt;
  for (const auto& o : scene.objects) gt.objects.push_back({o.id, o.cls, enu_to_geo(scene.origin, o.east, o.north)});
  if (scene.sidewalk) gt.sidewalk_width_m = scene.sidewalk->width;
  s.ground_truth = std::move(gt);
  s.validate();
  return s;
}

/// Five poles east of the walk line, three signs west of it, a 2 m sidewalk along north.
inline SceneSpec default_scene() {
  SceneSpec scene;
  scene.sidewalk = SidewalkStrip{Eigen::Vector2d(0, -5), Eigen::Vector2d(0, 120), 2.0};
  const double pole_north[] = {10, 30, 50, 70, 90};
  for (int i = 0; i < 5; ++i) {
    scene.objects.push_back({"pole-" + std::to_string(i + 1), FeatureClass::Pole, 1.6, pole_north[i],
                             Shape::Billboard, 0.12, 0.0, 3.0});
  }
  const double sign_north[] = {20, 45, 80};
  for (int i = 0; i < 3; ++i) {
    scene.objects.push_back({"sign-" + std::to_string(i + 1), FeatureClass::TrafficSign, -1.8, sign_north[i],
                             Shape::Billboard, 0.6, 1.6, 2.2});
  }
  return scene;
}

// JSON scene description used by the CLI.

inline Json to_json(const SceneSpec& scene, const TrajectorySpec& traj) {
  Json objects = Json::array();
  for (const auto& o : scene.objects) {
    objects.push_back({{"id", o.id},
                       {"class", class_name(o.cls)},
                       {"east", o.east},
                       {"north", o.north},
                       {"shape", o.shape == Shape::Billboard ? "billboard" : "cylinder"},
                       {"width", o.width},
                       {"base", o.base},
                       {"top", o.top}});
  }
  Json j = {{"origin", {{"lat", scene.origin.latitude}, {"lon", scene.origin.longitude}}},
            {"camera",
             {{"fx", scene.camera.fx},
              {"fy", scene.camera.fy},
              {"cx", scene.camera.cx},
              {"cy", scene.camera.cy},
              {"width", scene.camera.width},
              {"height", scene.camera.height},
              {"max_depth_m", scene.max_depth_m}}},
            {"objects", objects},
            {"trajectory",
             {{"start", {traj.start.x(), traj.start.y()}},
              {"end", {traj.end.x(), traj.end.y()}},
              {"captures", traj.captures},
              {"frames_per_capture", traj.frames_per_capture},
              {"camera_height", traj.camera_height},
              {"pitch_deg", traj.pitch_deg},
              {"roll_deg", traj.roll_deg},
              {"jitter_deg", traj.jitter_deg},
              {"frame_interval_s", traj.frame_interval_s},
              {"capture_interval_s", traj.capture_interval_s},
              {"write_homographies", traj.write_homographies}}}};
  if (scene.sidewalk) {
    j["sidewalk"] = {{"start", {scene.sidewalk->start.x(), scene.sidewalk->start.y()}},
                     {"end", {scene.sidewalk->end.x(), scene.sidewalk->end.y()}},
                     {"width", scene.sidewalk->width}};
  }
  if (!scene.classes.empty()) {
    Json classes = Json::array();
    for (FeatureClass c : scene.classes) classes.push_back(class_name(c));
    j["classes"] = classes;
  }
  return j;
}

/// Parses a scene description; absent keys keep the defaults of SceneSpec/TrajectorySpec.
inline std::pair<SceneSpec, TrajectorySpec> scene_from_json(const Json& j) {
  SceneSpec scene;
  scene.sidewalk.reset();
  TrajectorySpec traj;
  try {
    if (j.contains("origin")) scene.origin = geo::GeoPoint(j["origin"].at("lat").get<double>(), j["origin"].at("lon").get<double>());
    if (j.contains("camera")) {
      const Json& c = j["camera"];
      scene.camera.fx = c.value("fx", scene.camera.fx);
      scene.camera.fy = c.value("fy", scene.camera.fy);
      scene.camera.cx = c.value("cx", scene.camera.cx);
      scene.camera.cy = c.value("cy", scene.camera.cy);
      scene.camera.width = c.value("width", scene.camera.width);
      scene.camera.height = c.value("height", scene.camera.height);
      scene.max_depth_m = c.value("max_depth_m", scene.max_depth_m);
    }
    if (j.contains("sidewalk")) {
      const Json& s = j["sidewalk"];
      SidewalkStrip strip;
      strip.start = {s.at("start").at(0).get<double>(), s.at("start").at(1).get<double>()};
      strip.end = {s.at("end").at(0).get<double>(), s.at("end").at(1).get<double>()};
      strip.width = s.at("width").get<double>();
      scene.sidewalk = strip;
    }
    for (const auto& o : j.value("objects", Json::array())) {
      SceneObject obj;
      obj.id = o.at("id").get<std::string>();
      obj.cls = parse_class(o.at("class").get<std::string>());
      obj.east = o.at("east").get<double>();
      obj.north = o.at("north").get<double>();
      const std::string shape = o.value("shape", std::string("billboard"));
      if (shape == "billboard") {
        obj.shape = Shape::Billboard;
      } else if (shape == "cylinder") {
        obj.shape = Shape::Cylinder;
      } else {
        fail(ErrorCode::FormatError, "unknown shape '" + shape + "'");
      }
      obj.width = o.value("width", obj.width);
      obj.base = o.value("base", obj.base);
      obj.top = o.value("top", obj.top);
      scene.objects.push_back(obj);
    }
    for (const auto& c : j.value("classes", Json::array())) scene.classes.insert(parse_class(c.get<std::string>()));
    if (j.contains("trajectory")) {
      const Json& t = j["trajectory"];
      if (t.contains("start")) traj.start = {t["start"].at(0).get<double>(), t["start"].at(1).get<double>()};
      if (t.contains("end")) traj.end = {t["end"].at(0).get<double>(), t["end"].at(1).get<double>()};
      traj.captures = t.value("captures", traj.captures);
      traj.frames_per_capture = t.value("frames_per_capture", traj.frames_per_capture);
      traj.camera_height = t.value("camera_height", traj.camera_height);
      traj.pitch_deg = t.value("pitch_deg", traj.pitch_deg);
      traj.roll_deg = t.value("roll_deg", traj.roll_deg);
      traj.jitter_deg = t.value("jitter_deg", traj.jitter_deg);
      traj.frame_interval_s = t.value("frame_interval_s", traj.frame_interval_s);
      traj.capture_interval_s = t.value("capture_interval_s", traj.capture_interval_s);
      traj.write_homographies = t.value("write_homographies", traj.write_homographies);
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::FormatError, std::string("scene description: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidCoordinates) fail(ErrorCode::FormatError, e.what());
    throw;
  }
  validate(scene);
  return {scene, traj};
}

}  // namespace gm::synthetic
