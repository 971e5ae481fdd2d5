#pragma once

// Capture processing: temporal fusion, instance extraction, localization and sidewalk
// measurement, with per-item error isolation.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gm/classes.hpp"
#include "gm/contour.hpp"
#include "gm/error.hpp"
#include "gm/geo.hpp"
#include "gm/session.hpp"
#include "gm/sidewalk.hpp"
#include "gm/stabilize.hpp"
#include "gm/vetting.hpp"

namespace gm::pipeline {

struct PipelineConfig {
  int previous_frames = stabilize::kDefaultPreviousFrames;
  double depth_radius_px = geo::kDefaultDepthRadiusPx;
  int min_instance_area = stabilize::kDefaultMinInstanceArea;
  double roi_top_fraction = sidewalk::kDefaultRoiTopFraction;
  double min_run_fraction = sidewalk::kDefaultMinRunFraction;
  std::optional<sidewalk::RegionOfInterest> roi;  // overrides roi_top_fraction
  bool reject_side_clipped = true;  // instances touching the left/right image edge

  void validate() const {
    if (previous_frames < 0) fail(ErrorCode::InvalidArgument, "previous frame count must be >= 0");
    if (!(depth_radius_px >= 0)) fail(ErrorCode::InvalidArgument, "depth radius must be >= 0");
    if (min_instance_area < 0) fail(ErrorCode::InvalidArgument, "min instance area must be >= 0");
    if (!(roi_top_fraction >= 0 && roi_top_fraction < 1)) fail(ErrorCode::InvalidArgument, "roi top fraction must be in [0, 1)");
    if (!(min_run_fraction >= 0 && min_run_fraction <= 1)) fail(ErrorCode::InvalidArgument, "min run fraction must be in [0, 1]");
  }
};

struct FeatureInstance {
  std::string instance_id;
  FeatureClass cls = FeatureClass::Background;
  Contour contour;
  double centroid_u = 0, centroid_v = 0;
  std::optional<geo::GeoPoint> geolocation;
  int capture_id = -1;
  double timestamp = 0;
  std::optional<double> width_m;  // sidewalk only
};

struct ItemError {
  FeatureClass cls = FeatureClass::Background;
  std::string instance_id;
  ErrorCode code = ErrorCode::InvalidArgument;
  std::string message;
};

struct CaptureResult {
  int capture_id = -1;
  double timestamp = 0;
  geo::GpsFix gps;
  vetting::Detections<FeatureInstance> instances;  // localized instances only
  std::optional<sidewalk::Trapezoid> trapezoid;
  std::optional<sidewalk::SidewalkMeasurement> sidewalk;
  std::vector<ItemError> errors;

  [[nodiscard]] std::size_t instance_count() const {
    std::size_t n = 0;
    for (const auto& [c, list] : instances) n += list.size();
    return n;
  }
};

/// Maps frame `from` onto frame `to` (from < to) by chaining per-step homographies; each step
/// uses the recorded homography when present, otherwise the rotation-only one from the poses.
inline stabilize::Homography chain_homography(const session::Session& s, std::size_t from, std::size_t to) {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
  for (std::size_t i = from; i < to; ++i) {
    const auto& a = s.frames[i];
    const auto& b = s.frames[i + 1];
    const stabilize::Homography step =
        a.homography_to_next ? *a.homography_to_next : stabilize::infinite_homography(a.pose, b.pose, b.intrinsics);
    h = step.m * h;
  }
  return stabilize::Homography{h}.normalized();
}

/// Captured mask fused with up to `previous_frames` aligned predecessors.
inline SegMask fuse_capture(const session::Session& s, std::size_t index, int previous_frames) {
  const auto& cur = s.frames.at(index);
  std::vector<SegMask> aligned;
  for (int j = 1; j <= previous_frames && static_cast<std::size_t>(j) <= index; ++j) {
    const std::size_t prev = index - static_cast<std::size_t>(j);
    aligned.push_back(stabilize::warp_mask(s.frames[prev].mask, chain_homography(s, prev, index)));
  }
  return stabilize::majority_vote(cur.mask, aligned);
}

inline std::string instance_id(int capture_id, FeatureClass cls, std::size_t n) {
  return "c" + std::to_string(capture_id) + "-" + std::string(class_name(cls)) + "-" + std::to_string(n);
}

/// True when the instance's object, as seen in the captured frame itself, reaches the left or
/// right image edge. Fusion can erode the edge column, so the unfused mask is consulted.
inline bool clipped_by_side(const SegMask& captured, const SegMask& fused, const Contour& c) {
  const Label l = code(c.cls);
  Grid<std::uint8_t> seen(captured.width(), captured.height(), 0);
  std::vector<PixelCoord> stack;
  for (const auto& p : instance_pixels(fused, c)) {
    if (captured.at(p.u, p.v) == l) {
      seen.at(p.u, p.v) = 1;
      stack.push_back(p);
    }
  }
  while (!stack.empty()) {
    const PixelCoord p = stack.back();
    stack.pop_back();
    if (p.u == 0 || p.u == captured.width() - 1) return true;
    for (int d = 0; d < 8; ++d) {
      const int nu = p.u + stabilize::detail::kDu[d];
      const int nv = p.v + stabilize::detail::kDv[d];
      if (!captured.contains(nu, nv) || seen.at(nu, nv) || captured.at(nu, nv) != l) continue;
      seen.at(nu, nv) = 1;
      stack.push_back({nu, nv});
    }
  }
  return false;
}

inline CaptureResult process_capture(const session::Session& s, int capture_id, const PipelineConfig& cfg = {}) {
  cfg.validate();
  if (std::find(s.capture_indices.begin(), s.capture_indices.end(), capture_id) == s.capture_indices.end()) {
    fail(ErrorCode::InvalidArgument, "frame " + std::to_string(capture_id) + " is not a capture");
  }
  const std::size_t index = *s.frame_index(capture_id);
  const auto& frame = s.frames[index];

  CaptureResult out;
  out.capture_id = capture_id;
  out.timestamp = frame.timestamp;
  out.gps = frame.gps;

  const SegMask fused = fuse_capture(s, index, cfg.previous_frames);

  ClassSet objects;
  for (FeatureClass c : s.class_selection) {
    if (c != FeatureClass::Sidewalk && is_mappable(c)) objects.insert(c);
  }
  std::map<FeatureClass, std::size_t> seen;
  for (auto& contour : stabilize::extract_instances(fused, objects, cfg.min_instance_area)) {
    FeatureInstance inst;
    inst.cls = contour.cls;
    inst.instance_id = instance_id(capture_id, contour.cls, seen[contour.cls]++);
    inst.capture_id = capture_id;
    inst.timestamp = frame.timestamp;
    if (cfg.reject_side_clipped && clipped_by_side(frame.mask, fused, contour)) {
      out.errors.push_back({inst.cls, inst.instance_id, ErrorCode::OutOfBounds, "instance clipped by the image side edge"});
      continue;
    }
    try {
      const auto loc = geo::localize_instance_detailed(fused, contour, frame.depth, frame.intrinsics, frame.pose,
                                                       frame.gps, cfg.depth_radius_px);
      inst.centroid_u = loc.centroid_u;
      inst.centroid_v = loc.centroid_v;
      inst.geolocation = loc.location;
      inst.contour = std::move(contour);
      out.instances[inst.cls].push_back(std::move(inst));
    } catch (const Error& e) {
      out.errors.push_back({inst.cls, inst.instance_id, e.code(), e.what()});
    }
  }

  if (s.class_selection.contains(FeatureClass::Sidewalk)) {
    const std::string id = instance_id(capture_id, FeatureClass::Sidewalk, 0);
    try {
      const auto roi = cfg.roi ? *cfg.roi : sidewalk::default_roi(fused.width(), fused.height(), cfg.roi_top_fraction);
      const SegMask in_roi = sidewalk::apply_roi(fused, roi);
      const auto trap = sidewalk::extract_trapezoid(in_roi, roi, cfg.min_run_fraction);
      out.trapezoid = trap;
      const auto m = sidewalk::measure_sidewalk(trap, frame.depth, frame.intrinsics, frame.pose, frame.gps,
                                                cfg.depth_radius_px);
      out.sidewalk = m;

      FeatureInstance inst;
      inst.instance_id = id;
      inst.cls = FeatureClass::Sidewalk;
      inst.capture_id = capture_id;
      inst.timestamp = frame.timestamp;
      inst.geolocation = m.location;
      inst.width_m = m.width_m;
      inst.contour.cls = FeatureClass::Sidewalk;
      inst.contour.area = static_cast<int>((trap.top_span.length() + trap.bottom_span.length()) *
                                           (trap.bottom_row - trap.top_row + 1) / 2);
      double su = 0, sv = 0;
      for (const auto& c : trap.corners()) {
        inst.contour.points.push_back({static_cast<int>(std::lround(c[0])), static_cast<int>(std::lround(c[1]))});
        su += c[0];
        sv += c[1];
      }
      inst.centroid_u = su / 4;
      inst.centroid_v = sv / 4;
      out.instances[FeatureClass::Sidewalk].push_back(std::move(inst));
    } catch (const Error& e) {
      out.errors.push_back({FeatureClass::Sidewalk, id, e.code(), e.what()});
    }
  }
  return out;
}

inline std::vector<CaptureResult> process_session(const session::Session& s, const PipelineConfig& cfg = {}) {
  std::vector<CaptureResult> out;
  out.reserve(s.capture_indices.size());
  for (int id : s.capture_indices) out.push_back(process_capture(s, id, cfg));
  return out;
}

}  // namespace gm::pipeline
