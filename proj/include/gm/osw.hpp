#pragma once

// OpenSidewalks-aligned nodes, ways and changesets, plus GeoJSON serialization.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gm/classes.hpp"
#include "gm/error.hpp"
#include "gm/geo.hpp"

namespace gm::osw {

using Json = nlohmann::json;
using NodeId = std::uint64_t;
using WayId = std::uint64_t;
using ChangesetId = std::uint64_t;
using Tags = std::map<std::string, std::string>;

/// Property keys owned by the model; tags may not shadow them.
inline const std::set<std::string>& reserved_keys() {
  static const std::set<std::string> keys = {"element", "node_id", "way_id",   "class",    "changeset_id",
                                             "user_id", "timestamp", "node_refs", "client_key"};
  return keys;
}

struct OswNode {
  NodeId node_id = 0;
  geo::GeoPoint location;
  FeatureClass cls = FeatureClass::Background;
  Tags tags;
  ChangesetId changeset_id = 0;
  std::string user_id;
  double timestamp = 0;    // capture time, seconds
  std::string client_key;  // client-chosen idempotency key, may be empty

  friend bool operator==(const OswNode&, const OswNode&) = default;
};

struct OswWay {
  WayId way_id = 0;
  std::vector<NodeId> node_refs;
  Tags tags;
  ChangesetId changeset_id = 0;

  friend bool operator==(const OswWay&, const OswWay&) = default;
};

enum class ChangesetState { Open, Closed };

struct Changeset {
  ChangesetId changeset_id = 0;
  std::string user_id;
  ChangesetState state = ChangesetState::Open;
  double created_at = 0;
  std::optional<double> closed_at;
  std::vector<NodeId> node_ids;  // in add order
  std::vector<WayId> way_ids;

  friend bool operator==(const Changeset&, const Changeset&) = default;
};

inline Tags sidewalk_way_tags() { return {{"footway", "sidewalk"}, {"highway", "footway"}}; }

/// Width tag value: metres with two decimals.
inline std::string format_width(double metres) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", metres);
  return buf;
}

inline void validate_tags(const Tags& tags) {
  for (const auto& [k, v] : tags) {
    if (k.empty()) fail(ErrorCode::InvalidRecord, "empty tag key");
    if (reserved_keys().contains(k)) fail(ErrorCode::InvalidRecord, "tag key '" + k + "' is reserved");
  }
}

// Value-level changeset transitions.

inline Changeset open_changeset(ChangesetId id, const std::string& user_id, double now) {
  if (user_id.empty()) fail(ErrorCode::Unauthenticated, "opening a changeset requires a user");
  return {id, user_id, ChangesetState::Open, now, std::nullopt, {}, {}};
}

inline Changeset add_node(Changeset cs, const OswNode& node) {
  if (cs.state != ChangesetState::Open) fail(ErrorCode::ChangesetClosed, "changeset " + std::to_string(cs.changeset_id) + " is closed");
  if (std::find(cs.node_ids.begin(), cs.node_ids.end(), node.node_id) != cs.node_ids.end()) {
    fail(ErrorCode::DuplicateNodeId, "node " + std::to_string(node.node_id) + " already in changeset");
  }
  cs.node_ids.push_back(node.node_id);
  return cs;
}

/// Sidewalk nodes of the changeset in capture order (timestamp, then add order).
inline std::vector<NodeId> sidewalk_sequence(const Changeset& cs, const std::map<NodeId, OswNode>& nodes) {
  std::vector<const OswNode*> side;
  for (NodeId id : cs.node_ids) {
    auto it = nodes.find(id);
    if (it == nodes.end()) fail(ErrorCode::DanglingReference, "changeset references missing node");
    if (it->second.cls == FeatureClass::Sidewalk) side.push_back(&it->second);
  }
  std::stable_sort(side.begin(), side.end(),
                   [](const OswNode* a, const OswNode* b) { return a->timestamp < b->timestamp; });
  std::vector<NodeId> out;
  for (const auto* n : side) out.push_back(n->node_id);
  return out;
}

/// Closes the changeset, assembling one sidewalk way when two or more sidewalk nodes exist.
/// `way_id` is the identifier to use if a way is formed.
inline std::pair<Changeset, std::optional<OswWay>> close_changeset(Changeset cs, const std::map<NodeId, OswNode>& nodes,
                                                                   WayId way_id, double now) {
  if (cs.state != ChangesetState::Open) fail(ErrorCode::AlreadyClosed, "changeset " + std::to_string(cs.changeset_id) + " already closed");
  std::optional<OswWay> way;
  auto seq = sidewalk_sequence(cs, nodes);
  if (seq.size() >= 2) {
    way = OswWay{way_id, std::move(seq), sidewalk_way_tags(), cs.changeset_id};
    cs.way_ids.push_back(way_id);
  }
  cs.state = ChangesetState::Closed;
  cs.closed_at = now;
  return {std::move(cs), std::move(way)};
}

/// In-memory store with sequential 64-bit identifiers.
class Workspace {
 public:
  Workspace() = default;
  explicit Workspace(std::string id) : id_(std::move(id)) {}

  [[nodiscard]] const std::string& id() const noexcept { return id_; }
  [[nodiscard]] const std::map<NodeId, OswNode>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::map<WayId, OswWay>& ways() const noexcept { return ways_; }
  [[nodiscard]] const std::map<ChangesetId, Changeset>& changesets() const noexcept { return changesets_; }

  const Changeset& open_changeset(const std::string& user_id, double now) {
    Changeset cs = osw::open_changeset(next_changeset_, user_id, now);
    ++next_changeset_;
    return changesets_.emplace(cs.changeset_id, std::move(cs)).first->second;
  }

  /// Adds a node on behalf of `user_id`. Node id 0 asks the store to allocate one. A repeated
  /// non-empty client_key within the same changeset returns the node stored the first time.
  NodeId add_node(ChangesetId cs_id, const std::string& user_id, OswNode node) {
    Changeset& cs = changeset_for(cs_id, user_id);
    if (!node.client_key.empty()) {
      for (NodeId id : cs.node_ids) {
        if (nodes_.at(id).client_key == node.client_key) return id;
      }
    }
    if (cs.state != ChangesetState::Open) fail(ErrorCode::ChangesetClosed, "changeset is closed");
    validate_tags(node.tags);
    if (node.node_id == 0) {
      node.node_id = next_node_;
    } else if (nodes_.contains(node.node_id)) {
      fail(ErrorCode::DuplicateNodeId, "node " + std::to_string(node.node_id) + " exists");
    }
    node.changeset_id = cs_id;
    node.user_id = user_id;
    cs = osw::add_node(std::move(cs), node);
    next_node_ = std::max(next_node_, node.node_id + 1);
    const NodeId id = node.node_id;
    nodes_.emplace(id, std::move(node));
    return id;
  }

  std::optional<WayId> close_changeset(ChangesetId cs_id, const std::string& user_id, double now) {
    Changeset& cs = changeset_for(cs_id, user_id);
    auto [closed, way] = osw::close_changeset(cs, nodes_, next_way_, now);
    cs = std::move(closed);
    if (!way) return std::nullopt;
    ++next_way_;
    const WayId id = way->way_id;
    ways_.emplace(id, std::move(*way));
    return id;
  }

  [[nodiscard]] const Changeset& changeset(ChangesetId cs_id) const {
    auto it = changesets_.find(cs_id);
    if (it == changesets_.end()) fail(ErrorCode::NotFound, "changeset " + std::to_string(cs_id) + " not found");
    return it->second;
  }

 private:
  Changeset& changeset_for(ChangesetId cs_id, const std::string& user_id) {
    if (user_id.empty()) fail(ErrorCode::Unauthenticated, "no user");
    auto it = changesets_.find(cs_id);
    if (it == changesets_.end()) fail(ErrorCode::NotFound, "changeset " + std::to_string(cs_id) + " not found");
    if (it->second.user_id != user_id) fail(ErrorCode::NotOwner, "changeset owned by another user");
    return it->second;
  }

  std::string id_;
  std::map<NodeId, OswNode> nodes_;
  std::map<WayId, OswWay> ways_;
  std::map<ChangesetId, Changeset> changesets_;
  NodeId next_node_ = 1;
  WayId next_way_ = 1;
  ChangesetId next_changeset_ = 1;
};

// GeoJSON

inline Json point_coordinates(const geo::GeoPoint& p) { return Json::array({p.longitude, p.latitude}); }

inline Json node_feature(const OswNode& n) {
  Json props = Json::object();
  for (const auto& [k, v] : n.tags) props[k] = v;
  props["element"] = "node";
  props["node_id"] = n.node_id;
  props["class"] = std::string(class_name(n.cls));
  props["changeset_id"] = n.changeset_id;
  props["user_id"] = n.user_id;
  props["timestamp"] = n.timestamp;
  if (!n.client_key.empty()) props["client_key"] = n.client_key;
  return {{"type", "Feature"},
          {"id", "node/" + std::to_string(n.node_id)},
          {"geometry", {{"type", "Point"}, {"coordinates", point_coordinates(n.location)}}},
          {"properties", std::move(props)}};
}

inline Json way_feature(const OswWay& w, const std::map<NodeId, OswNode>& nodes) {
  Json coords = Json::array();
  for (NodeId ref : w.node_refs) {
    auto it = nodes.find(ref);
    if (it == nodes.end()) {
      fail(ErrorCode::DanglingReference, "way " + std::to_string(w.way_id) + " references missing node " + std::to_string(ref));
    }
    coords.push_back(point_coordinates(it->second.location));
  }
  Json props = Json::object();
  for (const auto& [k, v] : w.tags) props[k] = v;
  props["element"] = "way";
  props["way_id"] = w.way_id;
  props["changeset_id"] = w.changeset_id;
  props["node_refs"] = w.node_refs;
  return {{"type", "Feature"},
          {"id", "way/" + std::to_string(w.way_id)},
          {"geometry", {{"type", "LineString"}, {"coordinates", std::move(coords)}}},
          {"properties", std::move(props)}};
}

/// FeatureCollection: nodes by id, then ways by id.
inline Json serialize_workspace(const std::map<NodeId, OswNode>& nodes, const std::map<WayId, OswWay>& ways) {
  Json features = Json::array();
  for (const auto& [id, n] : nodes) features.push_back(node_feature(n));
  for (const auto& [id, w] : ways) {
    if (w.node_refs.size() < 2) fail(ErrorCode::InvariantViolation, "way with fewer than two nodes");
    features.push_back(way_feature(w, nodes));
  }
  return {{"type", "FeatureCollection"}, {"features", std::move(features)}};
}

inline Json serialize_workspace(const Workspace& ws) { return serialize_workspace(ws.nodes(), ws.ways()); }

struct ParsedWorkspace {
  std::map<NodeId, OswNode> nodes;
  std::map<WayId, OswWay> ways;
};

namespace detail {

inline Tags extract_tags(const Json& props) {
  Tags tags;
  for (const auto& [k, v] : props.items()) {
    if (reserved_keys().contains(k)) continue;
    if (!v.is_string()) fail(ErrorCode::FormatError, "tag '" + k + "' is not a string");
    tags[k] = v.get<std::string>();
  }
  return tags;
}

}  // namespace detail

inline ParsedWorkspace parse_workspace(const Json& doc) {
  ParsedWorkspace out;
  try {
    if (doc.at("type") != "FeatureCollection") fail(ErrorCode::FormatError, "not a FeatureCollection");
    for (const Json& f : doc.at("features")) {
      const Json& props = f.at("properties");
      const std::string element = props.at("element").get<std::string>();
      if (element == "node") {
        OswNode n;
        const Json& c = f.at("geometry").at("coordinates");
        n.node_id = props.at("node_id").get<NodeId>();
        n.location = geo::GeoPoint(c.at(1).get<double>(), c.at(0).get<double>());
        n.cls = parse_class(props.at("class").get<std::string>());
        n.changeset_id = props.at("changeset_id").get<ChangesetId>();
        n.user_id = props.at("user_id").get<std::string>();
        n.timestamp = props.at("timestamp").get<double>();
        n.client_key = props.value("client_key", std::string{});
        n.tags = detail::extract_tags(props);
        out.nodes.emplace(n.node_id, std::move(n));
      } else if (element == "way") {
        OswWay w;
        w.way_id = props.at("way_id").get<WayId>();
        w.changeset_id = props.at("changeset_id").get<ChangesetId>();
        w.node_refs = props.at("node_refs").get<std::vector<NodeId>>();
        w.tags = detail::extract_tags(props);
        out.ways.emplace(w.way_id, std::move(w));
      } else {
        fail(ErrorCode::FormatError, "unknown element '" + element + "'");
      }
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::FormatError, std::string("malformed workspace document: ") + e.what());
  }
  for (const auto& [id, w] : out.ways) {
    for (NodeId ref : w.node_refs) {
      if (!out.nodes.contains(ref)) fail(ErrorCode::DanglingReference, "way references missing node");
    }
  }
  return out;
}

}  // namespace gm::osw
