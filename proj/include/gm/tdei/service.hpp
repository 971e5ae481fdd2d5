#pragma once

// HTTP/1.1 front end for the workspace store, plus optional static asset serving.

#include <filesystem>
#include <functional>
#include <memory>
#include <string>

#include "json.hpp"

#include "gm/error.hpp"
#include "gm/privacy.hpp"
#include "gm/tdei/store.hpp"

#include "httplib.h"

namespace gm::tdei {

class Service {
 public:
  explicit Service(std::shared_ptr<Store> store, std::filesystem::path ui_dir = {})
      : store_(std::move(store)), ui_dir_(std::move(ui_dir)) {
    // No SO_REUSEPORT: a second server on a bound port must fail.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
    });
    routes();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;
  ~Service() { stop(); }

  /// Binds without serving; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }

  /// Serves until stop(); requires a successful bind().
  bool serve() { return server_.listen_after_bind(); }

  void stop() {
    if (server_.is_running()) server_.stop();
  }

  void wait_until_ready() const { server_.wait_until_ready(); }

  /// Observer of every finished exchange: method, path, status, request body, response body.
  using ExchangeHook = std::function<void(const std::string&, const std::string&, int, const std::string&,
                                          const std::string&)>;
  /// Install before serve().
  void on_exchange(ExchangeHook hook) {
    server_.set_logger([hook = std::move(hook)](const httplib::Request& req, const httplib::Response& res) {
      hook(req.method, req.path, res.status, req.body, res.body);
    });
  }
  [[nodiscard]] Store& store() noexcept { return *store_; }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  static std::string bearer(const Req& req) {
    const std::string h = req.get_header_value("Authorization");
    const std::string prefix = "Bearer ";
    return h.rfind(prefix, 0) == 0 ? h.substr(prefix.size()) : std::string{};
  }

  static Json body_of(const Req& req) {
    if (req.body.empty()) return Json(nullptr);
    try {
      return Json::parse(req.body);
    } catch (const Json::exception& e) {
      fail(ErrorCode::FormatError, std::string("request body is not JSON: ") + e.what());
    }
  }

  static osw::ChangesetId changeset_id(const std::string& s) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      fail(ErrorCode::NotFound, "bad changeset id");
    }
  }

  static void send(Res& res, int status, const Json& body) {
    privacy::require_no_raster(body, "response");
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  /// Runs a handler, mapping store errors onto status codes.
  template <typename F>
  static void guarded(Res& res, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      res.status = http_status(e.code());
      res.set_content(error_body(e.code(), e.what()).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(error_body(ErrorCode::InvariantViolation, e.what()).dump(), "application/json");
    }
  }

  void routes() {
    auto& s = *store_;
    server_.Get("/v1/health", [](const Req&, Res& res) { send(res, 200, {{"status", "ok"}}); });

    server_.Post("/v1/login", [&s](const Req& req, Res& res) {
      guarded(res, [&] { send(res, 200, s.login(body_of(req))); });
    });

    server_.Post(R"(/v1/workspaces/([^/]+)/changesets)", [&s](const Req& req, Res& res) {
      guarded(res, [&] {
        const auto user = s.authenticate(bearer(req));
        const auto r = s.open_changeset(user, req.matches[1], body_of(req));
        send(res, r.status, r.body);
      });
    });

    server_.Get(R"(/v1/workspaces/([^/]+)/changesets/([^/]+))", [&s](const Req& req, Res& res) {
      guarded(res, [&] {
        const auto user = s.authenticate(bearer(req));
        send(res, 200, s.changeset(user, req.matches[1], changeset_id(req.matches[2])));
      });
    });

    server_.Post(R"(/v1/workspaces/([^/]+)/changesets/([^/]+)/nodes)", [&s](const Req& req, Res& res) {
      guarded(res, [&] {
        const auto user = s.authenticate(bearer(req));
        const auto r = s.add_node(user, req.matches[1], changeset_id(req.matches[2]), body_of(req));
        send(res, r.status, r.body);
      });
    });

    server_.Put(R"(/v1/workspaces/([^/]+)/changesets/([^/]+)/close)", [&s](const Req& req, Res& res) {
      guarded(res, [&] {
        const auto user = s.authenticate(bearer(req));
        const auto r = s.close_changeset(user, req.matches[1], changeset_id(req.matches[2]));
        send(res, r.status, r.body);
      });
    });

    server_.Post(R"(/v1/workspaces/([^/]+)/changesets/([^/]+)/captures)", [&s](const Req& req, Res& res) {
      guarded(res, [&] {
        const auto user = s.authenticate(bearer(req));
        const auto r = s.submit_capture(user, req.matches[1], changeset_id(req.matches[2]), body_of(req));
        send(res, r.status, r.body);
      });
    });

    server_.Get(R"(/v1/workspaces/([^/]+)/export)", [&s](const Req& req, Res& res) {
      guarded(res, [&] {
        s.authenticate(bearer(req));
        res.status = 200;
        res.set_content(s.export_workspace(req.matches[1]), "application/geo+json");
      });
    });

    server_.Get("/review/queue", [&s](const Req& req, Res& res) {
      guarded(res, [&] { send(res, 200, s.review_queue(s.authenticate(bearer(req)))); });
    });

    server_.Get(R"(/review/([^/]+))", [&s](const Req& req, Res& res) {
      guarded(res, [&] {
        const std::string token = bearer(req);
        send(res, 200, s.review_item(s.authenticate(token), token, req.matches[1]));
      });
    });

    server_.Post(R"(/review/([^/]+)/verdict)", [&s](const Req& req, Res& res) {
      guarded(res, [&] {
        const std::string token = bearer(req);
        const auto user = s.authenticate(token);
        const auto r = s.submit_verdict(user, token, req.matches[1], body_of(req));
        send(res, r.status, r.body);
      });
    });

    if (!ui_dir_.empty()) server_.set_mount_point("/", ui_dir_.string());
  }

  std::shared_ptr<Store> store_;
  std::filesystem::path ui_dir_;
  httplib::Server server_;
};

}  // namespace gm::tdei
