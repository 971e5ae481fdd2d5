// gm: synthetic generation, session replay, evaluation and the workspace service.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "gm/evaluate.hpp"
#include "gm/osw.hpp"
#include "gm/pipeline.hpp"
#include "gm/replay.hpp"
#include "gm/session.hpp"
#include "gm/synthetic.hpp"
#include "gm/tdei/client.hpp"
#include "gm/tdei/service.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 2;
constexpr int kEnvError = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

gm::ClassSet parse_classes(const std::string& list) {
  gm::ClassSet out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const gm::FeatureClass c = gm::parse_class(item);
    if (!gm::is_mappable(c)) throw UsageError("background is not a selectable class");
    out.insert(c);
  }
  return out;
}

struct PipelineFlags {
  int previous_frames = gm::stabilize::kDefaultPreviousFrames;
  double radius = gm::geo::kDefaultDepthRadiusPx;
  int min_area = gm::stabilize::kDefaultMinInstanceArea;
  double roi_top = gm::sidewalk::kDefaultRoiTopFraction;
  double min_run = gm::sidewalk::kDefaultMinRunFraction;
  bool keep_side_clipped = false;

  void add(CLI::App* app) {
    app->add_option("--frames", previous_frames, "Preceding frames fused with each capture")->capture_default_str();
    app->add_option("--radius", radius, "Depth sampling disc radius in pixels")->capture_default_str();
    app->add_option("--min-area", min_area, "Minimum instance area in pixels")->capture_default_str();
    app->add_option("--roi-top", roi_top, "Sidewalk ROI top edge as a fraction of image height")->capture_default_str();
    app->add_option("--min-run", min_run, "Minimum sidewalk run as a fraction of ROI width")->capture_default_str();
    app->add_flag("--keep-side-clipped", keep_side_clipped, "Keep instances clipped by the image side edges");
  }

  [[nodiscard]] gm::pipeline::PipelineConfig config() const {
    gm::pipeline::PipelineConfig c;
    c.previous_frames = previous_frames;
    c.depth_radius_px = radius;
    c.min_instance_area = min_area;
    c.roi_top_fraction = roi_top;
    c.min_run_fraction = min_run;
    c.reject_side_clipped = !keep_side_clipped;
    c.validate();
    return c;
  }
};

// generate

struct GenerateArgs {
  std::string scene = "default";
  std::string out;
  std::uint64_t seed = 1;
  double gps_noise = 0;
  double depth_noise = 0;
  int captures = 0;
  double jitter = -1;
  std::string session_id = "synthetic";
};

int run_generate(const GenerateArgs& a) {
  if (a.gps_noise < 0 || a.depth_noise < 0) throw UsageError("noise sigma must be >= 0");
  gm::synthetic::SceneSpec scene;
  gm::synthetic::TrajectorySpec traj;
  if (a.scene == "default") {
    scene = gm::synthetic::default_scene();
  } else {
    std::ifstream in(a.scene);
    if (!in) throw UsageError("cannot read scene " + a.scene);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(a.scene + ": " + e.what());
    }
    std::tie(scene, traj) = gm::synthetic::scene_from_json(j);
  }
  if (a.captures > 0) traj.captures = a.captures;
  if (a.jitter >= 0) traj.jitter_deg = a.jitter;
  const auto trajectory = gm::synthetic::build_trajectory(traj, a.seed);
  const auto s = gm::synthetic::generate_synthetic(scene, trajectory, {a.gps_noise, a.depth_noise, a.seed},
                                                   traj.write_homographies, a.session_id);
  gm::session::write_session(s, a.out);
  std::cout << "wrote " << s.frames.size() << " frames, " << s.capture_indices.size() << " captures to " << a.out
            << "\n";
  return kOk;
}

// replay

struct ReplayArgs {
  std::string session;
  std::string server;
  std::string classes;
  std::string workspace = "default";
  std::string user = "mapper";
  std::string secret = "mapper-secret";
  bool auto_vet = false;
  std::string vet_file;
  bool interactive = false;
  bool review = false;
  bool dry_run = false;
  PipelineFlags pipeline;
};

gm::vetting::VettingRecord ask_terminal(const gm::staging::CaptureSummary& c) {
  gm::vetting::VettingRecord r;
  r.capture_id = c.capture_id;
  std::cout << "capture " << c.capture_id << "\n";
  for (const auto& [cls, list] : c.detections) {
    for (;;) {
      std::cout << "  " << gm::class_name(cls) << ": " << list.size() << " instance(s)";
      for (std::size_t i = 0; i < list.size(); ++i) {
        std::cout << "\n    [" << i << "] " << list[i].location.latitude << ", " << list[i].location.longitude;
        if (list[i].width_m) std::cout << "  width " << gm::osw::format_width(*list[i].width_m) << " m";
      }
      std::cout << "\n  verdict (a|d|m) [reject indices...] [w = reject width]: " << std::flush;
      std::string line;
      if (!std::getline(std::cin, line)) throw UsageError("vetting aborted: input closed");
      std::stringstream ss(line);
      std::string word;
      gm::vetting::ClassVerdict v;
      v.cls = cls;
      bool ok = static_cast<bool>(ss >> word);
      if (ok && (word == "a" || word == "d" || word == "m")) {
        v.verdict = word == "a" ? gm::vetting::Verdict::Agree
                    : word == "d" ? gm::vetting::Verdict::Discard
                                  : gm::vetting::Verdict::Missing;
        while (ok && ss >> word) {
          if (word == "w") {
            v.reject_width = true;
          } else {
            try {
              const auto idx = std::stoul(word);
              ok = idx < list.size();
              v.rejected_instances.insert(idx);
            } catch (const std::exception&) {
              ok = false;
            }
          }
        }
        if (v.verdict == gm::vetting::Verdict::Discard && !v.rejected_instances.empty()) ok = false;
      } else {
        ok = false;
      }
      if (ok) {
        r.verdicts.push_back(v);
        break;
      }
      std::cout << "  not understood, try again\n";
    }
  }
  r.completed = true;
  return r;
}

int run_replay(const ReplayArgs& a) {
  const int modes = int(a.auto_vet) + int(!a.vet_file.empty()) + int(a.interactive) + int(a.review);
  if (modes > 1) throw UsageError("choose one of --auto-vet, --vet-file, --interactive, --review");
  if (!a.dry_run && a.server.empty()) throw UsageError("--server is required unless --dry-run is given");
  if (a.dry_run && a.review) throw UsageError("--review needs a server");

  gm::replay::ReplayOptions opt;
  opt.workspace = a.workspace;
  opt.user = a.user;
  opt.secret = a.secret;
  opt.pipeline = a.pipeline.config();
  if (!a.classes.empty()) opt.classes = parse_classes(a.classes);
  if (!a.vet_file.empty()) {
    opt.mode = gm::replay::VetMode::File;
    opt.records = gm::staging::read_vet_file(a.vet_file);
  } else if (a.interactive) {
    opt.mode = gm::replay::VetMode::Interactive;
    opt.ask = ask_terminal;
  } else if (a.review) {
    opt.mode = gm::replay::VetMode::Review;
  }

  const auto session = gm::session::read_session(a.session);
  std::optional<gm::tdei::Client> client;
  if (!a.dry_run) client.emplace(a.server);
  const auto summary = gm::replay::replay(session, opt, client ? &*client : nullptr);

  std::cout << "captures " << summary.captures << "\n"
            << "detections " << summary.detections << "\n"
            << "item_errors " << summary.item_errors << "\n"
            << "vetted " << summary.vetted << "\n"
            << "unvetted " << summary.unvetted << "\n"
            << "staged_nodes " << summary.staged.size() << "\n"
            << "uploaded_nodes " << summary.nodes << "\n";
  if (summary.submitted_for_review) std::cout << "submitted_for_review " << summary.submitted_for_review << "\n";
  if (summary.changeset) std::cout << "changeset " << *summary.changeset << "\n";
  std::cout << "way " << (summary.way ? std::to_string(*summary.way) : std::string("none")) << "\n";
  std::cout << "network_requests " << (client ? client->requests_sent() : 0) << "\n";
  return kOk;
}

// eval

struct EvalArgs {
  std::string session;
  std::string pred;
  std::string out = "-";
  double gate = gm::metrics::kMatchGateM;
  PipelineFlags pipeline;
};

int run_eval(const EvalArgs& a) {
  const auto session = gm::session::read_session(a.session);
  if (!session.ground_truth) throw UsageError(a.session + " has no ground truth");

  std::vector<gm::evaluate::CapturePrediction> preds;
  if (!a.pred.empty()) {
    std::ifstream in(a.pred);
    if (!in) throw UsageError("cannot read " + a.pred);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(a.pred + ": " + e.what());
    }
    preds = gm::evaluate::predictions_from_export(gm::osw::parse_workspace(doc));
  } else {
    std::vector<gm::staging::CaptureSummary> summaries;
    for (const auto& r : gm::pipeline::process_session(session, a.pipeline.config())) {
      summaries.push_back(gm::staging::summarize(r, gm::replay::capture_key(session, r.capture_id)));
    }
    preds = gm::evaluate::predictions_from_summaries(summaries);
  }
  const auto ev = gm::evaluate::evaluate(*session.ground_truth, preds, a.gate);
  const auto rows = ev.table();
  if (rows.empty()) throw UsageError("no prediction matched the ground truth");

  if (a.out == "-") {
    gm::metrics::write_csv(std::cout, rows);
  } else {
    std::ofstream out(a.out);
    if (!out) throw gm::Error(gm::ErrorCode::IoError, "cannot write " + a.out);
    gm::metrics::write_csv(out, rows);
  }
  if (ev.unmatched_predictions) std::cerr << ev.unmatched_predictions << " prediction(s) matched no truth\n";
  return kOk;
}

// serve

std::atomic<bool> g_stop{false};

struct ServeArgs {
  std::string listen = "127.0.0.1:8080";
  std::string ui_dir;
  std::string service_config;
  std::string workspace_dir;
};

int run_serve(const ServeArgs& a) {
  const auto colon = a.listen.rfind(':');
  if (colon == std::string::npos) throw UsageError("--listen expects host:port");
  const std::string host = a.listen.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(a.listen.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("bad port in --listen");
  }
  if (port < 0 || port > 65535) throw UsageError("bad port in --listen");

  auto cfg = gm::tdei::ServiceConfig::defaults();
  if (!a.service_config.empty()) {
    std::ifstream in(a.service_config);
    if (!in) throw UsageError("cannot read " + a.service_config);
    try {
      cfg = gm::tdei::ServiceConfig::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(a.service_config + ": " + e.what());
    }
  }
  if (!a.workspace_dir.empty()) {
    cfg.storage_dir = a.workspace_dir;
  } else if (const char* env = std::getenv("GM_WORKSPACE_DIR")) {
    cfg.storage_dir = env;
  }
  if (!a.ui_dir.empty() && !std::filesystem::is_directory(a.ui_dir)) throw UsageError("no such directory " + a.ui_dir);

  auto store = std::make_shared<gm::tdei::Store>(cfg);
  gm::tdei::Service service(store, a.ui_dir);
  static std::mutex log_mu;
  service.on_exchange([](const std::string& method, const std::string& path, int status, const std::string&,
                         const std::string& body) {
    std::ostringstream line;
    line << method << ' ' << path << ' ' << status << ' ' << body.size() << '\n';
    std::lock_guard lock(log_mu);
    std::cerr << line.str() << std::flush;
  });
  const int bound = service.bind(host, port);
  if (bound < 0) {
    std::cerr << "gm: cannot bind " << a.listen << "\n";
    return kEnvError;
  }
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  std::thread watcher([&] {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    service.stop();
  });
  std::cout << "listening on " << host << ":" << bound << std::endl;
  service.serve();
  g_stop = true;
  watcher.join();
  return kOk;
}

int exit_code(const gm::Error& e) {
  if (const auto* h = dynamic_cast<const gm::tdei::HttpError*>(&e)) {
    return h->status() == 400 || h->status() == 422 ? kInputError : kEnvError;
  }
  switch (e.code()) {
    case gm::ErrorCode::IoError:
    case gm::ErrorCode::Unavailable: return kEnvError;
    default: return kInputError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sidewalk feature mapping: synthetic sessions, replay, evaluation and workspace service"};
  app.set_config("--config", "", "Key/value defaults file (TOML-style)");
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic session with ground truth");
  g->add_option("--scene", gen.scene, "Scene description JSON, or 'default'")->capture_default_str();
  g->add_option("--out", gen.out, "Output session directory")->required();
  g->add_option("--seed", gen.seed, "Noise seed")->capture_default_str();
  g->add_option("--gps-noise", gen.gps_noise, "Horizontal GPS noise sigma, metres")->capture_default_str();
  g->add_option("--depth-noise", gen.depth_noise, "Per-pixel depth noise sigma, metres")->capture_default_str();
  g->add_option("--captures", gen.captures, "Override the trajectory's capture count");
  g->add_option("--jitter", gen.jitter, "Override rotation jitter of preceding frames, degrees");
  g->add_option("--session-id", gen.session_id)->capture_default_str();

  ReplayArgs rep;
  auto* r = app.add_subcommand("replay", "Process a session, vet, and upload to a workspace");
  r->add_option("--session", rep.session, "Session directory")->required();
  r->add_option("--server", rep.server, "Workspace service URL, e.g. http://127.0.0.1:8080");
  r->add_option("--classes", rep.classes, "Comma-separated classes (default: the session's selection)");
  r->add_option("--workspace", rep.workspace)->capture_default_str();
  r->add_option("--user", rep.user)->capture_default_str();
  r->add_option("--secret", rep.secret);
  r->add_flag("--auto-vet", rep.auto_vet, "Accept every detection (the default)");
  r->add_option("--vet-file", rep.vet_file, "Batch vetting records");
  r->add_flag("--interactive", rep.interactive, "Vet each capture in the terminal");
  r->add_flag("--review", rep.review, "Submit captures to the service's review queue instead");
  r->add_flag("--dry-run", rep.dry_run, "Process and vet without contacting the server");
  rep.pipeline.add(r);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Error statistics against the session's ground truth");
  e->add_option("--session", ev.session, "Session directory with ground truth")->required();
  e->add_option("--pred", ev.pred, "Workspace export to score (default: run the pipeline)");
  e->add_option("--out", ev.out, "CSV output path, '-' for stdout")->capture_default_str();
  e->add_option("--gate", ev.gate, "Match gate, metres")->capture_default_str();
  ev.pipeline.add(e);

  ServeArgs sv;
  auto* s = app.add_subcommand("serve", "Run the workspace service");
  s->add_option("--listen", sv.listen, "Bind address host:port")->capture_default_str();
  s->add_option("--ui-dir", sv.ui_dir, "Static review UI assets served at /");
  s->add_option("--service-config", sv.service_config, "Users and workspaces JSON");
  s->add_option("--workspace-dir", sv.workspace_dir, "Storage root (default: $GM_WORKSPACE_DIR)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kInputError;
  }

  try {
    if (*g) return run_generate(gen);
    if (*r) return run_replay(rep);
    if (*e) return run_eval(ev);
    if (*s) return run_serve(sv);
  } catch (const UsageError& err) {
    std::cerr << "gm: " << err.what() << "\n";
    return kInputError;
  } catch (const gm::Error& err) {
    std::cerr << "gm: " << err.what() << "\n";
    return exit_code(err);
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "gm: " << err.what() << "\n";
    return kEnvError;
  }
  return kInputError;
}
