#pragma once

// Workspace service client with bounded retries on transport failures.

#include <chrono>
#include <optional>
#include <regex>
#include <string>
#include <thread>

#include "json.hpp"

#include "gm/error.hpp"
#include "gm/osw.hpp"
#include "gm/privacy.hpp"
#include "gm/staging.hpp"
#include "gm/vetting.hpp"

#include "httplib.h"

namespace gm::tdei {

using Json = nlohmann::json;

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::seconds connect_timeout{2};
  std::chrono::seconds read_timeout{30};
};

/// Error raised for a non-success HTTP reply.
class HttpError : public Error {
 public:
  HttpError(int status, ErrorCode code, const std::string& message) : Error(code, message), status_(status) {}
  [[nodiscard]] int status() const noexcept { return status_; }

 private:
  int status_;
};

class Client {
 public:
  explicit Client(const std::string& base_url, RetryPolicy policy = {}) : policy_(policy) {
    static const std::regex url(R"(^(https?://)?([^/:]+)(:(\d+))?/?$)");
    std::smatch m;
    if (!std::regex_match(base_url, m, url)) fail(ErrorCode::InvalidArgument, "bad server url '" + base_url + "'");
    if (m[1].matched && m[1].str() == "https://") fail(ErrorCode::InvalidArgument, "https is not supported");
    host_ = m[2];
    port_ = m[4].matched ? std::stoi(m[4]) : 80;
  }

  [[nodiscard]] std::size_t requests_sent() const noexcept { return requests_; }
  void set_token(std::string token) { token_ = std::move(token); }
  [[nodiscard]] const std::string& token() const noexcept { return token_; }

  bool health() {
    try {
      return call("GET", "/v1/health", Json(nullptr)).value("status", "") == "ok";
    } catch (const Error&) {
      return false;
    }
  }

  void login(const std::string& user, const std::string& secret) {
    token_ = call("POST", "/v1/login", {{"user_id", user}, {"secret", secret}}).at("token").get<std::string>();
  }

  osw::ChangesetId open_changeset(const std::string& ws, const std::string& client_key = {}) {
    Json body = Json::object();
    if (!client_key.empty()) body["client_key"] = client_key;
    return call("POST", "/v1/workspaces/" + ws + "/changesets", body).at("changeset_id").get<osw::ChangesetId>();
  }

  Json changeset(const std::string& ws, osw::ChangesetId cs) {
    return call("GET", "/v1/workspaces/" + ws + "/changesets/" + std::to_string(cs), Json(nullptr));
  }

  osw::NodeId add_node(const std::string& ws, osw::ChangesetId cs, const osw::OswNode& node) {
    return call("POST", cs_path(ws, cs) + "/nodes", staging::node_request(node)).at("node_id").get<osw::NodeId>();
  }

  std::optional<osw::WayId> close_changeset(const std::string& ws, osw::ChangesetId cs) {
    const Json r = call("PUT", cs_path(ws, cs) + "/close", Json(nullptr));
    if (r.at("way_id").is_null()) return std::nullopt;
    return r.at("way_id").get<osw::WayId>();
  }

  Json export_workspace(const std::string& ws) { return call("GET", "/v1/workspaces/" + ws + "/export", Json(nullptr)); }

  Json submit_capture(const std::string& ws, osw::ChangesetId cs, const staging::CaptureSummary& capture) {
    return call("POST", cs_path(ws, cs) + "/captures", staging::to_json(capture));
  }

  Json review_queue() { return call("GET", "/review/queue", Json(nullptr)); }
  Json review_item(const std::string& capture_id) { return call("GET", "/review/" + capture_id, Json(nullptr)); }
  Json submit_verdict(const std::string& capture_id, const vetting::VettingRecord& record) {
    return call("POST", "/review/" + capture_id + "/verdict", staging::to_json(record));
  }

  /// One request with retries on transport failure and 503. Every request here is safe to
  /// repeat: creates carry client keys and the rest are reads or state-checked transitions.
  Json call(const std::string& method, const std::string& path, const Json& body) {
    if (!body.is_null()) privacy::require_no_raster(body, "request");
    httplib::Client cli(host_, port_);
    cli.set_connection_timeout(policy_.connect_timeout);
    cli.set_read_timeout(policy_.read_timeout);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    const std::string payload = body.is_null() ? std::string{} : body.dump();

    auto backoff = policy_.initial_backoff;
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < std::max(1, policy_.attempts); ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      ++requests_;
      httplib::Result res = method == "GET"    ? cli.Get(path, headers)
                            : method == "POST" ? cli.Post(path, headers, payload, "application/json")
                            : method == "PUT"  ? cli.Put(path, headers, payload, "application/json")
                                               : httplib::Result{};
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status == 503) {
        last_error = "service unavailable";
        continue;
      }
      Json reply;
      try {
        reply = res->body.empty() ? Json::object() : Json::parse(res->body);
      } catch (const Json::exception&) {
        fail(ErrorCode::FormatError, method + " " + path + ": reply is not JSON");
      }
      if (res->status >= 200 && res->status < 300) return reply;
      const ErrorCode code = error_code_from_string(reply.value("error", ""), ErrorCode::InvariantViolation);
      throw HttpError(res->status, code, reply.value("message", method + " " + path + " failed"));
    }
    fail(ErrorCode::Unavailable, "cannot reach " + host_ + ":" + std::to_string(port_) + " (" + last_error + ")");
  }

 private:
  static std::string cs_path(const std::string& ws, osw::ChangesetId cs) {
    return "/v1/workspaces/" + ws + "/changesets/" + std::to_string(cs);
  }

  RetryPolicy policy_;
  std::string host_;
  int port_ = 80;
  std::string token_;
  std::size_t requests_ = 0;
};

}  // namespace gm::tdei
