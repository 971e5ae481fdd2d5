#pragma once

// Recorded-session directory format.
//
//   manifest.json      session metadata, frame index, class selection, ground truth
//   NNNN.meta.json     timestamp, intrinsics (9 numbers, row-major), pose (16 numbers,
//                      row-major camera-to-world), gps lat/lon/accuracy
//   NNNN.depth.f32     little-endian float32 depth, row-major, width x height
//   NNNN.mask.png      8-bit grayscale, pixel value = class code
//
// No RGB imagery is stored.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gm/classes.hpp"
#include "gm/error.hpp"
#include "gm/geo.hpp"
#include "gm/png.hpp"
#include "gm/raster.hpp"
#include "gm/stabilize.hpp"

namespace gm::session {

using Json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

struct FrameBundle {
  int frame_id = 0;
  double timestamp = 0;
  SegMask mask;
  DepthMap depth;
  geo::Intrinsics intrinsics;
  geo::Pose pose;
  geo::GpsFix gps;
  std::optional<stabilize::Homography> homography_to_next;

  friend bool operator==(const FrameBundle& a, const FrameBundle& b) {
    const bool h_eq = a.homography_to_next.has_value() == b.homography_to_next.has_value() &&
                      (!a.homography_to_next || a.homography_to_next->m == b.homography_to_next->m);
    // Depth compared bitwise so NaN dropouts compare equal to themselves.
    const auto da = a.depth.values();
    const auto db = b.depth.values();
    const bool depth_eq = a.depth.same_shape(b.depth) &&
                          std::equal(da.begin(), da.end(), db.begin(), db.end(), [](float x, float y) {
                            return std::bit_cast<std::uint32_t>(x) == std::bit_cast<std::uint32_t>(y);
                          });
    return a.frame_id == b.frame_id && a.timestamp == b.timestamp && a.mask == b.mask && depth_eq &&
           a.intrinsics == b.intrinsics && a.pose == b.pose && a.gps == b.gps && h_eq;
  }
};

struct GroundTruthObject {
  std::string id;
  FeatureClass cls = FeatureClass::Background;
  geo::GeoPoint location;
  friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

struct GroundTruth {
  std::vector<GroundTruthObject> objects;
  std::optional<double> sidewalk_width_m;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct Session {
  std::string session_id;
  std::vector<FrameBundle> frames;
  std::vector<int> capture_indices;  // frame ids the user chose to capture
  ClassSet class_selection;
  std::optional<GroundTruth> ground_truth;

  /// Position of the frame with this id, if any.
  [[nodiscard]] std::optional<std::size_t> frame_index(int frame_id) const {
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (frames[i].frame_id == frame_id) return i;
    }
    return std::nullopt;
  }

  void validate() const {
    if (frames.empty()) fail(ErrorCode::FormatError, "session has no frames");
    std::set<int> ids;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& f = frames[i];
      const std::string where = "frame " + std::to_string(f.frame_id);
      if (!ids.insert(f.frame_id).second) fail(ErrorCode::InvariantViolation, where + ": duplicate frame id");
      if (i > 0 && !(f.timestamp > frames[i - 1].timestamp)) {
        fail(ErrorCode::InvariantViolation, where + ": timestamps not strictly increasing");
      }
      if (!f.mask.same_shape(f.depth)) fail(ErrorCode::InvariantViolation, where + ": depth/mask size mismatch");
      if (f.mask.width() != f.intrinsics.width || f.mask.height() != f.intrinsics.height) {
        fail(ErrorCode::InvariantViolation, where + ": raster size differs from intrinsics");
      }
      try {
        f.intrinsics.validate();
        f.pose.validate();
      } catch (const Error& e) {
        fail(ErrorCode::InvariantViolation, where + ": " + e.what());
      }
      for (Label l : f.mask.values()) {
        if (!is_known_code(l)) fail(ErrorCode::InvariantViolation, where + ": mask label outside class table");
      }
      if (f.homography_to_next && !f.homography_to_next->invertible()) {
        fail(ErrorCode::InvariantViolation, where + ": singular homography");
      }
    }
    for (int c : capture_indices) {
      if (!ids.contains(c)) fail(ErrorCode::InvariantViolation, "capture " + std::to_string(c) + " is not a frame id");
    }
    if (class_selection.empty()) fail(ErrorCode::InvariantViolation, "class selection is empty");
    for (FeatureClass c : class_selection) {
      if (!is_mappable(c)) fail(ErrorCode::InvariantViolation, "background is not a selectable class");
    }
  }
};

namespace detail {

inline std::string stem(int frame_id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d", frame_id);
  return buf;
}

inline Json class_table() {
  Json t = Json::object();
  for (Label c = 0; c <= code(FeatureClass::Pole); ++c) t[std::to_string(c)] = class_name(static_cast<FeatureClass>(c));
  return t;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::FormatError, path.string() + ": cannot open");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_depth(const fs::path& path, const DepthMap& depth) {
  std::vector<char> bytes(depth.size() * 4);
  std::size_t o = 0;
  for (float d : depth.values()) {
    auto bits = std::bit_cast<std::uint32_t>(d);
    for (int b = 0; b < 4; ++b) bytes[o++] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "write failed: " + path.string());
}

inline DepthMap read_depth(const fs::path& path, int width, int height) {
  const std::string bytes = read_text(path);
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  if (bytes.size() != n * 4) {
    fail(ErrorCode::InvariantViolation, path.string() + ": depth size " + std::to_string(bytes.size()) +
                                            " bytes, expected " + std::to_string(n * 4));
  }
  std::vector<float> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
    values[i] = std::bit_cast<float>(bits);
  }
  return DepthMap(Grid<float>(width, height, std::move(values)));
}

inline Json matrix_json(const Eigen::Matrix3d& m) {
  Json a = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(m(r, c));
  return a;
}

inline Eigen::Matrix3d matrix_from(const Json& a, const std::string& where) {
  if (!a.is_array() || a.size() != 9) fail(ErrorCode::FormatError, where + ": expected 9 numbers");
  Eigen::Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = a.at(static_cast<std::size_t>(r * 3 + c)).get<double>();
  return m;
}

inline Json frame_meta(const FrameBundle& f) {
  const auto& k = f.intrinsics;
  Json pose = Json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) pose.push_back(f.pose.rotation(r, c));
    pose.push_back(f.pose.translation(r));
  }
  for (double x : {0.0, 0.0, 0.0, 1.0}) pose.push_back(x);
  Json meta = {{"frame_id", f.frame_id},
               {"timestamp", f.timestamp},
               {"width", f.mask.width()},
               {"height", f.mask.height()},
               {"intrinsics", matrix_json(k.matrix())},
               {"pose", pose},
               {"gps", {{"lat", f.gps.latitude}, {"lon", f.gps.longitude}, {"accuracy", f.gps.horizontal_accuracy}}}};
  if (f.homography_to_next) meta["homography_to_next"] = matrix_json(f.homography_to_next->m);
  return meta;
}

inline FrameBundle frame_from(const fs::path& dir, const std::string& stem_name) {
  const fs::path meta_path = dir / (stem_name + ".meta.json");
  FrameBundle f;
  const std::string where = meta_path.string();
  Json meta;
  try {
    meta = Json::parse(read_text(meta_path));
    f.frame_id = meta.at("frame_id").get<int>();
    f.timestamp = meta.at("timestamp").get<double>();
    const int width = meta.at("width").get<int>();
    const int height = meta.at("height").get<int>();
    const Eigen::Matrix3d k = matrix_from(meta.at("intrinsics"), where + " intrinsics");
    if (k(0, 1) != 0 || k(1, 0) != 0 || k(2, 0) != 0 || k(2, 1) != 0 || k(2, 2) != 1) {
      fail(ErrorCode::FormatError, where + ": intrinsics must be [fx 0 cx; 0 fy cy; 0 0 1]");
    }
    f.intrinsics = {k(0, 0), k(1, 1), k(0, 2), k(1, 2), width, height};
    const Json& p = meta.at("pose");
    if (!p.is_array() || p.size() != 16) fail(ErrorCode::FormatError, where + " pose: expected 16 numbers");
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) f.pose.rotation(r, c) = p.at(static_cast<std::size_t>(r * 4 + c)).get<double>();
      f.pose.translation(r) = p.at(static_cast<std::size_t>(r * 4 + 3)).get<double>();
    }
    if (p[12] != 0.0 || p[13] != 0.0 || p[14] != 0.0 || p[15] != 1.0) {
      fail(ErrorCode::FormatError, where + " pose: last row must be 0 0 0 1");
    }
    const Json& g = meta.at("gps");
    f.gps = geo::GpsFix(g.at("lat").get<double>(), g.at("lon").get<double>(), g.at("accuracy").get<double>());
    if (meta.contains("homography_to_next")) {
      f.homography_to_next = stabilize::Homography{matrix_from(meta.at("homography_to_next"), where + " homography")};
    }
    f.depth = read_depth(dir / (stem_name + ".depth.f32"), width, height);
  } catch (const Json::exception& e) {
    fail(ErrorCode::FormatError, where + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidCoordinates) fail(ErrorCode::FormatError, where + " gps: " + e.what());
    throw;
  }
  f.mask = png::read_gray8(dir / (stem_name + ".mask.png"));
  return f;
}

}  // namespace detail

/// Loads and fully validates a session directory.
inline Session read_session(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  Session s;
  Json manifest;
  std::vector<std::string> stems;
  try {
    manifest = Json::parse(detail::read_text(manifest_path));
    if (manifest.at("format") != "gm-session") fail(ErrorCode::FormatError, manifest_path.string() + ": not a session manifest");
    if (manifest.at("version").get<int>() != kFormatVersion) {
      fail(ErrorCode::FormatError, manifest_path.string() + ": unsupported version");
    }
    if (manifest.at("class_table") != detail::class_table()) {
      fail(ErrorCode::FormatError, manifest_path.string() + ": class_table differs from the fixed code table");
    }
    s.session_id = manifest.at("session_id").get<std::string>();
    for (const auto& name : manifest.at("class_selection")) s.class_selection.insert(parse_class(name.get<std::string>()));
    s.capture_indices = manifest.at("capture_indices").get<std::vector<int>>();
    for (const auto& f : manifest.at("frames")) stems.push_back(f.at("stem").get<std::string>());
    if (manifest.contains("ground_truth")) {
      GroundTruth gt;
      const Json& g = manifest.at("ground_truth");
      for (const auto& o : g.at("objects")) {
        gt.objects.push_back({o.at("id").get<std::string>(), parse_class(o.at("class").get<std::string>()),
                              geo::GeoPoint(o.at("lat").get<double>(), o.at("lon").get<double>())});
      }
      if (g.contains("sidewalk_width_m")) gt.sidewalk_width_m = g.at("sidewalk_width_m").get<double>();
      s.ground_truth = std::move(gt);
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::FormatError, manifest_path.string() + ": " + e.what());
  }

  for (const auto& st : stems) s.frames.push_back(detail::frame_from(dir, st));
  for (std::size_t i = 0; i < stems.size(); ++i) {
    if (manifest.at("frames")[i].at("frame_id").get<int>() != s.frames[i].frame_id) {
      fail(ErrorCode::FormatError, manifest_path.string() + ": frame index disagrees with " + stems[i] + ".meta.json");
    }
  }
  s.validate();
  return s;
}

/// Writes the session into a fresh sibling directory, then swaps it into place.
inline void write_session(const Session& s, const fs::path& dir) {
  s.validate();

  fs::path target = fs::absolute(dir);
  if (target.filename().empty()) target = target.parent_path();
  std::random_device rd;
  const std::string suffix = std::to_string(rd());
  const fs::path staging = target.parent_path() / (target.filename().string() + ".tmp-" + suffix);
  const fs::path retired = target.parent_path() / (target.filename().string() + ".old-" + suffix);

  std::error_code ec;
  fs::create_directories(staging, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + staging.string() + ": " + ec.message());

  try {
    Json frames = Json::array();
    for (const auto& f : s.frames) {
      const std::string st = detail::stem(f.frame_id);
      frames.push_back({{"frame_id", f.frame_id}, {"stem", st}});
      detail::write_text(staging / (st + ".meta.json"), detail::frame_meta(f).dump(2) + "\n");
      detail::write_depth(staging / (st + ".depth.f32"), f.depth);
      png::write_gray8(staging / (st + ".mask.png"), f.mask);
    }
    Json selection = Json::array();
    for (FeatureClass c : s.class_selection) selection.push_back(class_name(c));
    Json manifest = {{"format", "gm-session"},
                     {"version", kFormatVersion},
                     {"session_id", s.session_id},
                     {"class_table", detail::class_table()},
                     {"class_selection", selection},
                     {"frames", frames},
                     {"capture_indices", s.capture_indices}};
    if (s.ground_truth) {
      Json objects = Json::array();
      for (const auto& o : s.ground_truth->objects) {
        objects.push_back({{"id", o.id},
                           {"class", class_name(o.cls)},
                           {"lat", o.location.latitude},
                           {"lon", o.location.longitude}});
      }
      Json gt = {{"objects", objects}};
      if (s.ground_truth->sidewalk_width_m) gt["sidewalk_width_m"] = *s.ground_truth->sidewalk_width_m;
      manifest["ground_truth"] = gt;
    }
    detail::write_text(staging / "manifest.json", manifest.dump(2) + "\n");
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }

  const bool existed = fs::exists(target);
  if (existed) {
    fs::rename(target, retired, ec);
    if (ec) {
      fs::remove_all(staging, ec);
      fail(ErrorCode::IoError, "cannot move aside " + target.string());
    }
  }
  fs::rename(staging, target, ec);
  if (ec) {
    if (existed) fs::rename(retired, target, ec);
    fs::remove_all(staging, ec);
    fail(ErrorCode::IoError, "cannot install " + target.string());
  }
  if (existed) fs::remove_all(retired, ec);
}

}  // namespace gm::session
