#pragma once

// Capture summaries (the sparse, image-free view of a processed capture), their wire form,
// vetting-record documents, and conversion of vetted captures into workspace nodes.

#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gm/classes.hpp"
#include "gm/error.hpp"
#include "gm/geo.hpp"
#include "gm/osw.hpp"
#include "gm/pipeline.hpp"
#include "gm/vetting.hpp"

namespace gm::staging {

using Json = nlohmann::json;

inline constexpr const char* kCaptureTag = "capture";
inline constexpr const char* kWidthTag = "width";

struct InstanceSummary {
  std::string instance_id;
  FeatureClass cls = FeatureClass::Background;
  std::vector<PixelCoord> contour;
  double centroid_u = 0, centroid_v = 0;
  geo::GeoPoint location;
  std::optional<double> width_m;

  friend bool operator==(const InstanceSummary&, const InstanceSummary&) = default;
};

struct CaptureSummary {
  std::string capture_id;
  double timestamp = 0;
  geo::GpsFix gps;
  vetting::Detections<InstanceSummary> detections;
  std::optional<std::array<std::array<double, 2>, 4>> trapezoid;  // TL, TR, BR, BL pixel corners

  [[nodiscard]] const InstanceSummary* sidewalk() const {
    auto it = detections.find(FeatureClass::Sidewalk);
    return it == detections.end() || it->second.empty() ? nullptr : &it->second.front();
  }
};

inline CaptureSummary summarize(const pipeline::CaptureResult& r, std::string capture_id) {
  CaptureSummary s;
  s.capture_id = std::move(capture_id);
  s.timestamp = r.timestamp;
  s.gps = r.gps;
  for (const auto& [cls, list] : r.instances) {
    auto& out = s.detections[cls];
    for (const auto& inst : list) {
      if (!inst.geolocation) continue;
      out.push_back({inst.instance_id, inst.cls, inst.contour.points, inst.centroid_u, inst.centroid_v,
                     *inst.geolocation, inst.width_m});
    }
    if (out.empty()) s.detections.erase(cls);
  }
  if (r.trapezoid && r.sidewalk) s.trapezoid = r.trapezoid->corners();
  return s;
}

/// One node per accepted instance. Sidewalk nodes carry the width unless it was rejected.
/// Missing flags go on the capture's sidewalk node, or on every node when it has none.
inline std::vector<osw::OswNode> stage_nodes(const CaptureSummary& capture,
                                             const vetting::VettedCapture<InstanceSummary>& vetted,
                                             const std::string& key_prefix = {}) {
  std::vector<osw::OswNode> nodes;
  std::optional<std::size_t> sidewalk_node;
  for (const auto& [cls, list] : vetted.accepted) {
    for (const auto& inst : list) {
      osw::OswNode n;
      n.location = inst.location;
      n.cls = cls;
      n.timestamp = capture.timestamp;
      n.tags[kCaptureTag] = capture.capture_id;
      if (cls == FeatureClass::Sidewalk) {
        if (inst.width_m && !vetted.width_rejected.contains(cls)) n.tags[kWidthTag] = osw::format_width(*inst.width_m);
        if (!sidewalk_node) sidewalk_node = nodes.size();
      }
      n.client_key = key_prefix + capture.capture_id + "/" + inst.instance_id;
      nodes.push_back(std::move(n));
    }
  }
  for (FeatureClass c : vetted.missing_flags) {
    const std::string key = "missing:" + std::string(class_name(c));
    if (sidewalk_node) {
      nodes[*sidewalk_node].tags[key] = "true";
    } else {
      for (auto& n : nodes) n.tags[key] = "true";
    }
  }
  return nodes;
}

// Wire documents. Parsers reject unknown keys so that nothing unexpected rides along.

namespace detail {

inline void only_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) fail(ErrorCode::FormatError, what + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) fail(ErrorCode::FormatError, what + ": unexpected field '" + k + "'");
  }
}

template <typename F>
auto guarded(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    fail(ErrorCode::FormatError, what + ": " + e.what());
  }
}

inline Json geo_json(const geo::GeoPoint& p) { return {{"lat", p.latitude}, {"lon", p.longitude}}; }

inline geo::GeoPoint geo_from(const Json& j, const std::string& what) {
  only_keys(j, {"lat", "lon"}, what);
  return geo::GeoPoint(j.at("lat").get<double>(), j.at("lon").get<double>());
}

}  // namespace detail

inline Json to_json(const InstanceSummary& i, std::size_t index) {
  Json contour = Json::array();
  for (const auto& p : i.contour) contour.push_back({p.u, p.v});
  Json j = {{"index", index},
            {"instance_id", i.instance_id},
            {"class", class_name(i.cls)},
            {"contour", contour},
            {"centroid", {i.centroid_u, i.centroid_v}},
            {"location", detail::geo_json(i.location)}};
  if (i.width_m) j["width_m"] = *i.width_m;
  return j;
}

inline Json to_json(const CaptureSummary& c) {
  Json classes = Json::array();
  for (const auto& [cls, list] : c.detections) {
    Json instances = Json::array();
    for (std::size_t i = 0; i < list.size(); ++i) instances.push_back(to_json(list[i], i));
    classes.push_back({{"class", class_name(cls)}, {"instances", instances}});
  }
  Json j = {{"capture_id", c.capture_id},
            {"timestamp", c.timestamp},
            {"gps", {{"lat", c.gps.latitude}, {"lon", c.gps.longitude}, {"accuracy", c.gps.horizontal_accuracy}}},
            {"classes", classes}};
  if (c.trapezoid) {
    Json corners = Json::array();
    for (const auto& p : *c.trapezoid) corners.push_back({p[0], p[1]});
    j["trapezoid"] = corners;
  }
  return j;
}

inline CaptureSummary capture_from_json(const Json& j) {
  return detail::guarded("capture document", [&] {
    detail::only_keys(j, {"capture_id", "timestamp", "gps", "classes", "trapezoid"}, "capture document");
    CaptureSummary c;
    c.capture_id = j.at("capture_id").get<std::string>();
    if (c.capture_id.empty()) fail(ErrorCode::FormatError, "capture_id must not be empty");
    c.timestamp = j.at("timestamp").get<double>();
    const Json& g = j.at("gps");
    detail::only_keys(g, {"lat", "lon", "accuracy"}, "gps");
    c.gps = geo::GpsFix(g.at("lat").get<double>(), g.at("lon").get<double>(), g.value("accuracy", 0.0));
    for (const Json& cj : j.at("classes")) {
      detail::only_keys(cj, {"class", "instances"}, "class entry");
      const FeatureClass cls = parse_class(cj.at("class").get<std::string>());
      if (!is_mappable(cls)) fail(ErrorCode::FormatError, "background is not a detectable class");
      if (c.detections.contains(cls)) fail(ErrorCode::FormatError, "class listed twice");
      auto& list = c.detections[cls];
      for (const Json& ij : cj.at("instances")) {
        detail::only_keys(ij, {"index", "instance_id", "class", "contour", "centroid", "location", "width_m"}, "instance");
        InstanceSummary s;
        s.instance_id = ij.at("instance_id").get<std::string>();
        s.cls = cls;
        if (ij.contains("class") && parse_class(ij["class"].get<std::string>()) != cls) {
          fail(ErrorCode::FormatError, "instance class differs from its group");
        }
        if (ij.contains("index") && ij["index"].get<std::size_t>() != list.size()) {
          fail(ErrorCode::FormatError, "instance indices must be consecutive from 0");
        }
        for (const Json& p : ij.value("contour", Json::array())) s.contour.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
        const Json& cen = ij.at("centroid");
        s.centroid_u = cen.at(0).get<double>();
        s.centroid_v = cen.at(1).get<double>();
        s.location = detail::geo_from(ij.at("location"), "instance location");
        if (ij.contains("width_m")) s.width_m = ij["width_m"].get<double>();
        list.push_back(std::move(s));
      }
      if (list.empty()) c.detections.erase(cls);
    }
    if (j.contains("trapezoid")) {
      std::array<std::array<double, 2>, 4> t{};
      const Json& a = j["trapezoid"];
      if (!a.is_array() || a.size() != 4) fail(ErrorCode::FormatError, "trapezoid needs four corners");
      for (std::size_t i = 0; i < 4; ++i) t[i] = {a[i].at(0).get<double>(), a[i].at(1).get<double>()};
      c.trapezoid = t;
    }
    return c;
  });
}

inline Json to_json(const vetting::VettingRecord& r) {
  Json verdicts = Json::array();
  for (const auto& v : r.verdicts) {
    verdicts.push_back({{"class", class_name(v.cls)},
                        {"verdict", vetting::verdict_name(v.verdict)},
                        {"rejected_instances", v.rejected_instances},
                        {"reject_width", v.reject_width}});
  }
  return {{"capture_id", r.capture_id}, {"completed", r.completed}, {"verdicts", verdicts}};
}

inline vetting::VettingRecord record_from_json(const Json& j) {
  return detail::guarded("vetting record", [&] {
    detail::only_keys(j, {"capture_id", "completed", "verdicts"}, "vetting record");
    vetting::VettingRecord r;
    const Json& id = j.at("capture_id");
    r.capture_id = id.is_number_integer() ? std::to_string(id.get<long long>()) : id.get<std::string>();
    r.completed = j.at("completed").get<bool>();
    for (const Json& vj : j.at("verdicts")) {
      detail::only_keys(vj, {"class", "verdict", "rejected_instances", "reject_width"}, "class verdict");
      vetting::ClassVerdict v;
      v.cls = parse_class(vj.at("class").get<std::string>());
      v.verdict = vetting::parse_verdict(vj.at("verdict").get<std::string>());
      for (const Json& idx : vj.value("rejected_instances", Json::array())) {
        if (!idx.is_number_integer() || idx.get<long long>() < 0) fail(ErrorCode::FormatError, "instance index must be a non-negative integer");
        if (!v.rejected_instances.insert(idx.get<std::size_t>()).second) fail(ErrorCode::FormatError, "instance index listed twice");
      }
      v.reject_width = vj.value("reject_width", false);
      r.verdicts.push_back(std::move(v));
    }
    return r;
  });
}

/// Batch vetting file: {"records": [record, ...]}, keyed by capture id.
inline std::map<std::string, vetting::VettingRecord> read_vet_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FormatError, "cannot read vetting file " + path.string());
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    fail(ErrorCode::FormatError, path.string() + ": " + e.what());
  }
  std::map<std::string, vetting::VettingRecord> out;
  detail::guarded(path.string(), [&] {
    detail::only_keys(doc, {"records"}, "vetting file");
    for (const Json& rj : doc.at("records")) {
      auto r = record_from_json(rj);
      const std::string id = r.capture_id;
      if (!out.emplace(id, std::move(r)).second) fail(ErrorCode::FormatError, "two records for capture " + id);
    }
    return 0;
  });
  return out;
}

/// Node submission body.
inline Json node_request(const osw::OswNode& n) {
  Json j = {{"lat", n.location.latitude},
            {"lon", n.location.longitude},
            {"class", class_name(n.cls)},
            {"tags", n.tags},
            {"timestamp", n.timestamp}};
  if (!n.client_key.empty()) j["client_key"] = n.client_key;
  return j;
}

inline osw::OswNode node_from_request(const Json& j) {
  return detail::guarded("node document", [&] {
    detail::only_keys(j, {"lat", "lon", "class", "tags", "timestamp", "client_key"}, "node document");
    osw::OswNode n;
    const double lat = j.at("lat").get<double>();
    const double lon = j.at("lon").get<double>();
    n.location = geo::GeoPoint(lat, lon);
    n.cls = parse_class(j.at("class").get<std::string>());
    if (!is_mappable(n.cls)) fail(ErrorCode::FormatError, "background nodes are not accepted");
    const Json tags = j.value("tags", Json::object());
    if (!tags.is_object()) fail(ErrorCode::FormatError, "tags must be an object");
    for (const auto& [k, v] : tags.items()) {
      if (!v.is_string()) fail(ErrorCode::FormatError, "tag '" + k + "' must be a string");
      n.tags[k] = v.get<std::string>();
    }
    n.timestamp = j.at("timestamp").get<double>();
    n.client_key = j.value("client_key", std::string{});
    return n;
  });
}

}  // namespace gm::staging
