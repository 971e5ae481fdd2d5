#pragma once

// Workspace service core, independent of the HTTP transport: users and tokens, per-workspace
// changeset stores with an append-only operation log, and the capture review queue.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gm/error.hpp"
#include "gm/osw.hpp"
#include "gm/privacy.hpp"
#include "gm/staging.hpp"
#include "gm/vetting.hpp"

namespace gm::tdei {

using Json = nlohmann::json;
using Clock = std::function<double()>;

inline double wall_clock() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

struct User {
  std::string user_id;
  std::string secret;
};

struct ServiceConfig {
  std::vector<User> users;
  std::vector<std::string> workspaces;
  double token_ttl_s = 3600;
  double draft_lock_s = 300;
  std::filesystem::path storage_dir;  // empty keeps everything in memory

  static ServiceConfig defaults() {
    ServiceConfig c;
    c.users = {{"mapper", "mapper-secret"}};
    c.workspaces = {"default"};
    return c;
  }

  static ServiceConfig from_json(const Json& j) {
    ServiceConfig c;
    try {
      for (const Json& u : j.at("users")) c.users.push_back({u.at("user_id").get<std::string>(), u.at("secret").get<std::string>()});
      c.workspaces = j.at("workspaces").get<std::vector<std::string>>();
      c.token_ttl_s = j.value("token_ttl_s", c.token_ttl_s);
      c.draft_lock_s = j.value("draft_lock_s", c.draft_lock_s);
    } catch (const Json::exception& e) {
      fail(ErrorCode::FormatError, std::string("service config: ") + e.what());
    }
    for (const auto& w : c.workspaces) {
      if (w.empty() || w.find_first_of("/\\. ") != std::string::npos) fail(ErrorCode::FormatError, "bad workspace id '" + w + "'");
    }
    if (c.users.empty()) fail(ErrorCode::FormatError, "service config has no users");
    return c;
  }
};

/// HTTP status for an error code raised by the store.
inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::Unauthenticated: return 401;
    case ErrorCode::NotOwner: return 403;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::ChangesetClosed:
    case ErrorCode::AlreadyClosed:
    case ErrorCode::DuplicateNodeId:
    case ErrorCode::UnknownInstance:
    case ErrorCode::Conflict: return 409;
    case ErrorCode::InvalidCoordinates:
    case ErrorCode::InvalidRecord:
    case ErrorCode::IncompleteVetting:
    case ErrorCode::PrivacyViolation: return 422;
    case ErrorCode::FormatError:
    case ErrorCode::InvalidArgument: return 400;
    case ErrorCode::Unavailable: return 503;
    default: return 500;
  }
}

inline Json error_body(ErrorCode code, const std::string& message) {
  return {{"error", std::string(to_string(code))}, {"message", message}};
}

enum class ReviewState { Pending, Vetted };

struct ReviewItem {
  std::string capture_id;
  std::string workspace_id;
  osw::ChangesetId changeset_id = 0;
  std::string user_id;
  staging::CaptureSummary capture;
  Json capture_doc;
  ReviewState state = ReviewState::Pending;
  std::optional<vetting::VettingRecord> record;
  std::vector<osw::NodeId> staged;
  std::string lock_token;
  double lock_expiry = 0;
};

/// Reply of a mutating call: status plus body, `replayed` when an idempotent retry hit.
struct Reply {
  int status = 200;
  Json body;
};

class Store {
 public:
  explicit Store(ServiceConfig cfg, Clock clock = wall_clock) : cfg_(std::move(cfg)), clock_(std::move(clock)) {
    for (const auto& u : cfg_.users) users_[u.user_id] = u.secret;
    if (!cfg_.storage_dir.empty()) std::filesystem::create_directories(cfg_.storage_dir);
    for (const auto& w : cfg_.workspaces) {
      auto entry = std::make_unique<Entry>();
      entry->ws = osw::Workspace(w);
      workspaces_.emplace(w, std::move(entry));
    }
    for (const auto& w : cfg_.workspaces) replay_log(w);
  }

  [[nodiscard]] const ServiceConfig& config() const noexcept { return cfg_; }

  // Authentication

  Json login(const Json& body) {
    privacy::require_no_raster(body, "login request");
    std::string user, secret;
    staging::detail::guarded("login request", [&] {
      staging::detail::only_keys(body, {"user_id", "secret"}, "login request");
      user = body.at("user_id").get<std::string>();
      secret = body.at("secret").get<std::string>();
      return 0;
    });
    auto it = users_.find(user);
    if (it == users_.end() || it->second != secret) fail(ErrorCode::Unauthenticated, "bad credentials");
    const double expiry = clock_() + cfg_.token_ttl_s;
    std::string token = new_token();
    {
      std::lock_guard lock(tokens_mu_);
      tokens_[token] = {user, expiry};
    }
    return {{"user_id", user}, {"token", token}, {"expiry", expiry}};
  }

  /// User behind a bearer token.
  std::string authenticate(const std::string& token) {
    std::lock_guard lock(tokens_mu_);
    auto it = tokens_.find(token);
    if (token.empty() || it == tokens_.end()) fail(ErrorCode::Unauthenticated, "missing or unknown token");
    if (clock_() >= it->second.second) {
      tokens_.erase(it);
      fail(ErrorCode::Unauthenticated, "token expired");
    }
    return it->second.first;
  }

  // Changeset protocol

  Reply open_changeset(const std::string& user, const std::string& ws_id, const Json& body) {
    privacy::require_no_raster(body, "changeset request");
    std::string key;
    staging::detail::guarded("changeset request", [&] {
      if (!body.is_null()) {
        staging::detail::only_keys(body, {"client_key"}, "changeset request");
        key = body.value("client_key", std::string{});
      }
      return 0;
    });
    Entry& e = entry(ws_id);
    std::unique_lock lock(e.mu);
    const auto before = e.open_keys.size();
    const auto id = apply_open(e, user, clock_(), key);
    const bool fresh = e.open_keys.size() != before || key.empty();
    if (fresh) append(ws_id, {{"op", "open"}, {"user", user}, {"now", e.ws.changeset(id).created_at}, {"client_key", key}});
    return {fresh ? 201 : 200, changeset_json(e.ws.changeset(id))};
  }

  Json changeset(const std::string& user, const std::string& ws_id, osw::ChangesetId cs) {
    Entry& e = entry(ws_id);
    std::shared_lock lock(e.mu);
    const auto& c = e.ws.changeset(cs);
    if (c.user_id != user) fail(ErrorCode::NotOwner, "changeset owned by another user");
    return changeset_json(c);
  }

  Reply add_node(const std::string& user, const std::string& ws_id, osw::ChangesetId cs, const Json& body) {
    privacy::require_no_raster(body, "node request");
    osw::OswNode node = staging::node_from_request(body);
    Entry& e = entry(ws_id);
    std::unique_lock lock(e.mu);
    const auto before = e.ws.nodes().size();
    const auto id = e.ws.add_node(cs, user, node);
    const bool fresh = e.ws.nodes().size() != before;
    if (fresh) append(ws_id, {{"op", "node"}, {"user", user}, {"cs", cs}, {"node", body}});
    return {fresh ? 201 : 200, {{"node_id", id}, {"changeset_id", cs}}};
  }

  Reply close_changeset(const std::string& user, const std::string& ws_id, osw::ChangesetId cs) {
    Entry& e = entry(ws_id);
    std::unique_lock lock(e.mu);
    const double now = clock_();
    const auto way = e.ws.close_changeset(cs, user, now);
    append(ws_id, {{"op", "close"}, {"user", user}, {"cs", cs}, {"now", now}});
    Json body = {{"changeset_id", cs}, {"state", "closed"}, {"way_id", nullptr}};
    if (way) body["way_id"] = *way;
    return {200, body};
  }

  /// Export bytes; identical states give identical bytes.
  std::string export_workspace(const std::string& ws_id) {
    Entry& e = entry(ws_id);
    std::shared_lock lock(e.mu);
    Json doc = osw::serialize_workspace(e.ws);
    privacy::require_no_raster(doc, "export");
    return doc.dump();
  }

  // Review queue

  Reply submit_capture(const std::string& user, const std::string& ws_id, osw::ChangesetId cs, const Json& body) {
    privacy::require_no_raster(body, "capture document");
    staging::CaptureSummary capture = staging::capture_from_json(body);
    Entry& e = entry(ws_id);
    std::unique_lock lock(e.mu);
    const auto& c = e.ws.changeset(cs);
    if (c.user_id != user) fail(ErrorCode::NotOwner, "changeset owned by another user");
    if (c.state != osw::ChangesetState::Open) fail(ErrorCode::ChangesetClosed, "changeset is closed");
    std::lock_guard rlock(review_mu_);
    auto it = reviews_.find(capture.capture_id);
    if (it != reviews_.end()) {
      const ReviewItem& r = it->second;
      if (r.user_id == user && r.workspace_id == ws_id && r.changeset_id == cs && r.capture_doc == body) {
        return {200, review_summary(r)};
      }
      fail(ErrorCode::Conflict, "capture " + capture.capture_id + " already submitted");
    }
    ReviewItem item;
    item.capture_id = capture.capture_id;
    item.workspace_id = ws_id;
    item.changeset_id = cs;
    item.user_id = user;
    item.capture = std::move(capture);
    item.capture_doc = body;
    auto& stored = reviews_.emplace(item.capture_id, std::move(item)).first->second;
    append(ws_id, {{"op", "capture"}, {"user", user}, {"cs", cs}, {"capture", body}});
    return {201, review_summary(stored)};
  }

  Json review_queue(const std::string& user) {
    std::vector<const ReviewItem*> items;
    std::lock_guard rlock(review_mu_);
    for (const auto& [id, r] : reviews_) {
      if (r.user_id == user && r.state == ReviewState::Pending) items.push_back(&r);
    }
    std::stable_sort(items.begin(), items.end(), [](const ReviewItem* a, const ReviewItem* b) {
      return std::tie(a->capture.timestamp, a->capture_id) < std::tie(b->capture.timestamp, b->capture_id);
    });
    Json out = Json::array();
    for (const auto* r : items) out.push_back(review_summary(*r));
    return {{"items", out}};
  }

  /// Capture detail; also takes the draft lock for this token.
  Json review_item(const std::string& user, const std::string& token, const std::string& capture_id) {
    std::lock_guard rlock(review_mu_);
    ReviewItem& r = review_for(user, capture_id);
    const double now = clock_();
    if (r.state == ReviewState::Pending) {
      if (!r.lock_token.empty() && r.lock_token != token && now < r.lock_expiry) {
        fail(ErrorCode::Conflict, "capture is being reviewed in another session");
      }
      r.lock_token = token;
      r.lock_expiry = now + cfg_.draft_lock_s;
    }
    Json out = review_summary(r);
    out["capture"] = r.capture_doc;
    out["record"] = r.record ? staging::to_json(*r.record) : Json(nullptr);
    out["staged_node_ids"] = r.staged;
    out["lock_expiry"] = r.lock_expiry;
    return out;
  }

  Reply submit_verdict(const std::string& user, const std::string& token, const std::string& capture_id,
                       const Json& body) {
    privacy::require_no_raster(body, "vetting record");
    vetting::VettingRecord record = staging::record_from_json(body);
    if (record.capture_id.empty()) record.capture_id = capture_id;
    if (record.capture_id != capture_id) fail(ErrorCode::InvalidRecord, "record is for a different capture");

    std::string ws_id;
    {
      std::lock_guard rlock(review_mu_);
      ReviewItem& r = review_for(user, capture_id);
      if (!r.lock_token.empty() && r.lock_token != token && clock_() < r.lock_expiry) {
        fail(ErrorCode::Conflict, "capture is being reviewed in another session");
      }
      ws_id = r.workspace_id;
    }
    Entry& e = entry(ws_id);
    std::unique_lock lock(e.mu);
    std::lock_guard rlock(review_mu_);
    ReviewItem& r = review_for(user, capture_id);
    apply_verdict(e, r, record);
    append(ws_id, {{"op", "verdict"}, {"user", user}, {"capture_id", capture_id}, {"record", body}});
    Json out = review_summary(r);
    out["staged_node_ids"] = r.staged;
    return {200, out};
  }

 private:
  struct Entry {
    std::shared_mutex mu;
    osw::Workspace ws;
    std::map<std::pair<std::string, std::string>, osw::ChangesetId> open_keys;
  };

  Entry& entry(const std::string& ws_id) {
    auto it = workspaces_.find(ws_id);
    if (it == workspaces_.end()) fail(ErrorCode::NotFound, "workspace '" + ws_id + "' not found");
    return *it->second;
  }

  ReviewItem& review_for(const std::string& user, const std::string& capture_id) {
    auto it = reviews_.find(capture_id);
    if (it == reviews_.end()) fail(ErrorCode::NotFound, "capture '" + capture_id + "' not found");
    if (it->second.user_id != user) fail(ErrorCode::NotOwner, "capture belongs to another user");
    return it->second;
  }

  static osw::ChangesetId apply_open(Entry& e, const std::string& user, double now, const std::string& key) {
    if (!key.empty()) {
      auto it = e.open_keys.find({user, key});
      if (it != e.open_keys.end()) return it->second;
    }
    const auto id = e.ws.open_changeset(user, now).changeset_id;
    if (!key.empty()) e.open_keys[{user, key}] = id;
    return id;
  }

  void apply_verdict(Entry& e, ReviewItem& r, const vetting::VettingRecord& record) {
    if (r.state != ReviewState::Pending) fail(ErrorCode::Conflict, "capture already vetted");
    const auto vetted = vetting::apply_vetting(r.capture.detections, record);
    if (e.ws.changeset(r.changeset_id).state != osw::ChangesetState::Open) {
      fail(ErrorCode::ChangesetClosed, "changeset closed before the capture was vetted");
    }
    for (auto& n : staging::stage_nodes(r.capture, vetted)) r.staged.push_back(e.ws.add_node(r.changeset_id, r.user_id, n));
    r.record = record;
    r.state = ReviewState::Vetted;
    r.lock_token.clear();
  }

  static Json changeset_json(const osw::Changeset& c) {
    Json j = {{"changeset_id", c.changeset_id},
              {"user_id", c.user_id},
              {"state", c.state == osw::ChangesetState::Open ? "open" : "closed"},
              {"created_at", c.created_at},
              {"closed_at", c.closed_at ? Json(*c.closed_at) : Json(nullptr)},
              {"node_ids", c.node_ids},
              {"way_ids", c.way_ids}};
    return j;
  }

  static Json review_summary(const ReviewItem& r) {
    Json classes = Json::array();
    for (const auto& [cls, list] : r.capture.detections) classes.push_back({{"class", class_name(cls)}, {"count", list.size()}});
    return {{"capture_id", r.capture_id},
            {"workspace_id", r.workspace_id},
            {"changeset_id", r.changeset_id},
            {"timestamp", r.capture.timestamp},
            {"status", r.state == ReviewState::Pending ? "pending" : "vetted"},
            {"classes", classes}};
  }

  std::string new_token() {
    std::lock_guard lock(tokens_mu_);
    char buf[33];
    std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(rng_()),
                  static_cast<unsigned long long>(rng_()));
    return buf;
  }

  [[nodiscard]] std::filesystem::path log_path(const std::string& ws_id) const {
    return cfg_.storage_dir / (ws_id + ".log.jsonl");
  }

  void append(const std::string& ws_id, const Json& event) {
    if (cfg_.storage_dir.empty()) return;
    std::ofstream out(log_path(ws_id), std::ios::app | std::ios::binary);
    out << event.dump() << '\n';
    out.flush();
    if (!out) fail(ErrorCode::IoError, "cannot append to the log of workspace " + ws_id);
  }

  void replay_log(const std::string& ws_id) {
    if (cfg_.storage_dir.empty()) return;
    std::ifstream in(log_path(ws_id), std::ios::binary);
    if (!in) return;
    Entry& e = entry(ws_id);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (line.empty()) continue;
      try {
        const Json ev = Json::parse(line);
        const std::string op = ev.at("op").get<std::string>();
        const std::string user = ev.at("user").get<std::string>();
        if (op == "open") {
          apply_open(e, user, ev.at("now").get<double>(), ev.value("client_key", std::string{}));
        } else if (op == "node") {
          e.ws.add_node(ev.at("cs").get<osw::ChangesetId>(), user, staging::node_from_request(ev.at("node")));
        } else if (op == "close") {
          e.ws.close_changeset(ev.at("cs").get<osw::ChangesetId>(), user, ev.at("now").get<double>());
        } else if (op == "capture") {
          ReviewItem item;
          item.capture = staging::capture_from_json(ev.at("capture"));
          item.capture_id = item.capture.capture_id;
          item.workspace_id = ws_id;
          item.changeset_id = ev.at("cs").get<osw::ChangesetId>();
          item.user_id = user;
          item.capture_doc = ev.at("capture");
          reviews_.emplace(item.capture_id, std::move(item));
        } else if (op == "verdict") {
          ReviewItem& r = review_for(user, ev.at("capture_id").get<std::string>());
          apply_verdict(e, r, staging::record_from_json(ev.at("record")));
        } else {
          fail(ErrorCode::FormatError, "unknown operation '" + op + "'");
        }
      } catch (const std::exception& ex) {
        // A torn final line from an interrupted append is dropped; anything else is corruption.
        if (in.peek() == std::char_traits<char>::eof() && line.back() != '}') break;
        fail(ErrorCode::FormatError, log_path(ws_id).string() + ":" + std::to_string(n) + ": " + ex.what());
      }
    }
  }

  ServiceConfig cfg_;
  Clock clock_;
  std::map<std::string, std::string> users_;
  std::map<std::string, std::unique_ptr<Entry>> workspaces_;
  std::mutex tokens_mu_;
  std::map<std::string, std::pair<std::string, double>> tokens_;
  std::mt19937_64 rng_{std::random_device{}()};
  std::mutex review_mu_;
  std::map<std::string, ReviewItem> reviews_;
};

}  // namespace gm::tdei
