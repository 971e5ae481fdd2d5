#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "harness.hpp"
#include "support.hpp"

using namespace gm;
using Json = nlohmann::json;
using fixture::LiveService;

namespace {

std::string cs_path(const std::string& ws, long long cs) {
  return "/v1/workspaces/" + ws + "/changesets/" + std::to_string(cs);
}

Json node_doc(const std::string& cls, double north, double t, double lat_override = 0) {
  const auto p = oracle::destination(47.6205, -122.3493, north, 1.6);
  return {{"lat", lat_override != 0 ? lat_override : p[0]},
          {"lon", p[1]},
          {"class", cls},
          {"tags", Json::object()},
          {"timestamp", t}};
}

long long open_cs(const LiveService& svc, const std::string& token, const std::string& ws = "default") {
  const auto r = svc.request("POST", "/v1/workspaces/" + ws + "/changesets", Json::object(), token);
  EXPECT_EQ(r.status, 201) << r.raw;
  return r.body.at("changeset_id");
}

staging::CaptureSummary three_poles(const std::string& id, double t) {
  staging::CaptureSummary c;
  c.capture_id = id;
  c.timestamp = t;
  c.gps = geo::GpsFix(47.6205, -122.3493, 1.0);
  for (int i = 0; i < 3; ++i) {
    const auto p = oracle::destination(47.6205, -122.3493, 5.0 + i, 1.6);
    c.detections[FeatureClass::Pole].push_back({id + "-pole-" + std::to_string(i), FeatureClass::Pole,
                                                 {{10 * i, 5}, {10 * i + 3, 5}, {10 * i + 3, 40}},
                                                 10.0 * i + 1.5, 20.0, geo::GeoPoint(p[0], p[1]), {}});
  }
  const auto w = oracle::destination(47.6205, -122.3493, 3.0, 0.0);
  c.detections[FeatureClass::Sidewalk].push_back(
      {id + "-sidewalk-0", FeatureClass::Sidewalk, {{0, 0}, {4, 0}, {4, 4}}, 2.0, 2.0, geo::GeoPoint(w[0], w[1]), 2.01});
  return c;
}

Json agree_all(const staging::CaptureSummary& c) { return staging::to_json(vetting::default_record(c.detections, c.capture_id)); }

int count_class(const Json& exported, const std::string& cls) {
  int n = 0;
  for (const auto& f : exported.at("features")) {
    if (f["properties"].value("element", "") == "node" && f["properties"].value("class", "") == cls) ++n;
  }
  return n;
}

}  // namespace

TEST(ServiceAuth, Login) {
  LiveService svc;
  auto ok = svc.request("POST", "/v1/login", {{"user_id", "mapper"}, {"secret", "mapper-secret"}});
  EXPECT_EQ(ok.status, 200);
  EXPECT_EQ(ok.body["user_id"], "mapper");
  EXPECT_FALSE(ok.body["token"].get<std::string>().empty());
  EXPECT_EQ(svc.request("POST", "/v1/login", {{"user_id", "mapper"}, {"secret", "nope"}}).status, 401);
  EXPECT_EQ(svc.request("POST", "/v1/login", {{"user_id", "ghost"}, {"secret", "x"}}).status, 401);
  EXPECT_EQ(svc.request("POST", "/v1/login", {{"user_id", "mapper"}}).status, 400);
  EXPECT_EQ(svc.request("POST", "/v1/login", nullptr, {}, "{bad").status, 400);
  EXPECT_NE(svc.login(), svc.login());
  EXPECT_EQ(svc.request("GET", "/v1/health").status, 200);
}

TEST(ServiceAuth, TokensExpire) {
  LiveService svc;
  const auto t = svc.login();
  EXPECT_EQ(svc.request("POST", "/v1/workspaces/default/changesets", Json::object(), t).status, 201);
  svc.advance(601);
  const auto r = svc.request("POST", "/v1/workspaces/default/changesets", Json::object(), t);
  EXPECT_EQ(r.status, 401);
  EXPECT_EQ(r.body["error"], "Unauthenticated");
  EXPECT_EQ(svc.request("GET", "/v1/workspaces/default/export", nullptr, "forged").status, 401);
}

TEST(ServiceChangesets, OpenAddClose) {
  LiveService svc;
  const auto t = svc.login();
  const auto a = open_cs(svc, t), b = open_cs(svc, t);
  EXPECT_NE(a, b);
  EXPECT_EQ(svc.request("POST", "/v1/workspaces/nowhere/changesets", Json::object(), t).status, 404);
  EXPECT_EQ(svc.request("POST", "/v1/workspaces/default/changesets", Json::object(), "").status, 401);

  for (int i = 0; i < 3; ++i) {
    const auto r = svc.request("POST", cs_path("default", a) + "/nodes", node_doc("sidewalk", 10.0 * i, 3.0 - i), t);
    EXPECT_EQ(r.status, 201) << r.raw;
  }
  EXPECT_EQ(svc.request("POST", cs_path("default", a) + "/nodes", node_doc("pole", 1, 1, 91.0), t).status, 422);
  EXPECT_EQ(svc.request("POST", cs_path("default", a) + "/nodes", node_doc("pole", 1, 1), svc.login("alice")).status, 403);
  EXPECT_EQ(svc.request("POST", cs_path("default", 99) + "/nodes", node_doc("pole", 1, 1), t).status, 404);
  EXPECT_EQ(svc.request("POST", cs_path("default", a) + "/nodes", nullptr, t, "not json").status, 400);

  const auto closed = svc.request("PUT", cs_path("default", a) + "/close", nullptr, t);
  ASSERT_EQ(closed.status, 200);
  ASSERT_FALSE(closed.body["way_id"].is_null());
  EXPECT_EQ(svc.request("PUT", cs_path("default", a) + "/close", nullptr, t).status, 409);
  EXPECT_EQ(svc.request("POST", cs_path("default", a) + "/nodes", node_doc("pole", 1, 1), t).status, 409);

  const auto empty = svc.request("PUT", cs_path("default", b) + "/close", nullptr, t);
  EXPECT_EQ(empty.status, 200);
  EXPECT_TRUE(empty.body["way_id"].is_null());

  const auto cs = svc.request("GET", cs_path("default", a), nullptr, t);
  EXPECT_EQ(cs.body["state"], "closed");
  EXPECT_EQ(cs.body["node_ids"].size(), 3u);
  EXPECT_EQ(svc.request("GET", cs_path("default", a), nullptr, svc.login("alice")).status, 403);

  // Way follows capture time, not upload order.
  const auto ex = svc.request("GET", "/v1/workspaces/default/export", nullptr, t);
  for (const auto& f : ex.body["features"]) {
    if (f["properties"]["element"] == "way") {
      EXPECT_EQ(f["properties"]["node_refs"], (Json{3, 2, 1}));
    }
  }
}

TEST(ServiceChangesets, ClientKeysMakeRetriesSafe) {
  LiveService svc;
  const auto t = svc.login();
  const auto r1 = svc.request("POST", "/v1/workspaces/default/changesets", {{"client_key", "run-1"}}, t);
  const auto r2 = svc.request("POST", "/v1/workspaces/default/changesets", {{"client_key", "run-1"}}, t);
  EXPECT_EQ(r1.status, 201);
  EXPECT_EQ(r2.status, 200);
  EXPECT_EQ(r1.body["changeset_id"], r2.body["changeset_id"]);
  const long long cs = r1.body["changeset_id"];
  auto n = node_doc("pole", 2, 1);
  n["client_key"] = "n1";
  const auto a = svc.request("POST", cs_path("default", cs) + "/nodes", n, t);
  const auto b = svc.request("POST", cs_path("default", cs) + "/nodes", n, t);
  EXPECT_EQ(a.status, 201);
  EXPECT_EQ(b.status, 200);
  EXPECT_EQ(a.body["node_id"], b.body["node_id"]);
  EXPECT_EQ(count_class(svc.request("GET", "/v1/workspaces/default/export", nullptr, t).body, "pole"), 1);
}

TEST(ServiceExport, StableAndIsolated) {
  LiveService svc;
  const auto t = svc.login();
  const auto empty = svc.request("GET", "/v1/workspaces/default/export", nullptr, t);
  EXPECT_EQ(empty.status, 200);
  EXPECT_EQ(empty.body["type"], "FeatureCollection");
  EXPECT_TRUE(empty.body["features"].empty());
  const auto cs = open_cs(svc, t);
  svc.request("POST", cs_path("default", cs) + "/nodes", node_doc("pole", 1, 1), t);
  const auto a = svc.request("GET", "/v1/workspaces/default/export", nullptr, t).raw;
  const auto b = svc.request("GET", "/v1/workspaces/default/export", nullptr, t).raw;
  EXPECT_EQ(a, b);
  EXPECT_EQ(svc.request("GET", "/v1/workspaces/other/export", nullptr, t).raw, empty.raw);
  EXPECT_EQ(svc.request("GET", "/v1/workspaces/nowhere/export", nullptr, t).status, 404);
}

TEST(ServicePrivacy, RasterBodiesRejected) {
  LiveService svc;
  const auto t = svc.login();
  const auto cs = open_cs(svc, t);
  auto n = node_doc("pole", 1, 1);
  n["tags"]["thumbnail_png"] = "iVBOR";
  const auto r = svc.request("POST", cs_path("default", cs) + "/nodes", n, t);
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["error"], "PrivacyViolation");
  auto cap = staging::to_json(three_poles("c1", 1));
  cap["image"] = "data:image/jpeg;base64,AAAA";
  EXPECT_EQ(svc.request("POST", cs_path("default", cs) + "/captures", cap, t).status, 422);
}

// Randomized call sequences against a reference model of the protocol. Every reply status is
// predicted, and the exported state is checked against the model's invariants after each step.
TEST(ServiceProtocol, RandomCallSequences) {
  LiveService svc;
  const std::vector<std::string> users{"mapper", "alice"};
  const std::vector<std::string> workspaces{"default", "other"};
  std::map<std::string, std::string> token;
  for (const auto& u : users) token[u] = svc.login(u);

  struct ModelCs {
    std::string owner;
    bool open = true;
    std::vector<long long> nodes;
    int sidewalks = 0;
  };
  std::map<std::string, std::map<long long, ModelCs>> model;
  std::map<std::string, long long> next_cs{{"default", 1}, {"other", 1}};
  std::map<std::string, int> ways{{"default", 0}, {"other", 0}};

  std::mt19937_64 rng(2024);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  for (int step = 0; step < 400; ++step) {
    const std::string ws = workspaces[pick(2)];
    const std::string user = users[pick(2)];
    auto& cs_map = model[ws];
    // Mostly existing changesets, sometimes unknown ones.
    long long cs = cs_map.empty() || pick(8) == 0 ? 1000 + (long long)pick(5) : std::next(cs_map.begin(), pick(cs_map.size()))->first;
    const int op = static_cast<int>(pick(10));
    int expect = 0, got = 0;
    if (op < 2) {
      got = svc.request("POST", "/v1/workspaces/" + ws + "/changesets", Json::object(), token[user]).status;
      expect = 201;
      cs_map[next_cs[ws]++].owner = user;
    } else if (op < 8) {
      const bool bad_coords = pick(10) == 0;
      const bool sidewalk = pick(2) == 0;
      const auto r = svc.request("POST", cs_path(ws, cs) + "/nodes",
                                 node_doc(sidewalk ? "sidewalk" : "pole", double(step), double(pick(50)), bad_coords ? -95.0 : 0),
                                 token[user]);
      got = r.status;
      auto it = cs_map.find(cs);
      if (bad_coords) expect = 422;
      else if (it == cs_map.end()) expect = 404;
      else if (it->second.owner != user) expect = 403;
      else if (!it->second.open) expect = 409;
      else {
        expect = 201;
        it->second.nodes.push_back(r.body.value("node_id", 0LL));
        it->second.sidewalks += sidewalk;
      }
    } else {
      got = svc.request("PUT", cs_path(ws, cs) + "/close", nullptr, token[user]).status;
      auto it = cs_map.find(cs);
      if (it == cs_map.end()) expect = 404;
      else if (it->second.owner != user) expect = 403;
      else if (!it->second.open) expect = 409;
      else {
        expect = 200;
        it->second.open = false;
        ways[ws] += it->second.sidewalks >= 2;
      }
    }
    ASSERT_EQ(got, expect) << "step " << step << " op " << op << " ws " << ws << " cs " << cs;

    if (step % 20 == 19 || step == 399) {
      for (const auto& w : workspaces) {
        const auto ex = svc.request("GET", "/v1/workspaces/" + w + "/export", nullptr, token["mapper"]);
        ASSERT_EQ(ex.status, 200);
        const auto parsed = osw::parse_workspace(ex.body);  // rejects dangling references
        ASSERT_EQ(osw::serialize_workspace(parsed.nodes, parsed.ways), ex.body);
        ASSERT_TRUE(privacy::raster_fields(ex.body).empty());
        std::size_t model_nodes = 0;
        for (const auto& [id, c] : model[w]) {
          model_nodes += c.nodes.size();
          for (long long n : c.nodes) {
            ASSERT_TRUE(parsed.nodes.contains(n));
            ASSERT_EQ(parsed.nodes.at(n).changeset_id, id);
            ASSERT_EQ(parsed.nodes.at(n).user_id, c.owner);
          }
        }
        ASSERT_EQ(parsed.nodes.size(), model_nodes);
        ASSERT_EQ(parsed.ways.size(), std::size_t(ways[w]));
        for (const auto& [wid, way] : parsed.ways) {
          const auto& c = model[w].at(way.changeset_id);
          ASSERT_FALSE(c.open);
          double last = -1;
          for (auto ref : way.node_refs) {
            ASSERT_EQ(parsed.nodes.at(ref).cls, FeatureClass::Sidewalk);
            ASSERT_EQ(parsed.nodes.at(ref).changeset_id, way.changeset_id);
            ASSERT_GE(parsed.nodes.at(ref).timestamp, last);
            last = parsed.nodes.at(ref).timestamp;
          }
        }
      }
    }
  }
}

TEST(ServicePersistence, LogReplayRestoresState) {
  fixture::TempDir tmp;
  auto cfg = LiveService::config();
  cfg.storage_dir = tmp / "store";
  std::string before;
  {
    LiveService svc(cfg);
    const auto t = svc.login();
    const auto cs = open_cs(svc, t);
    for (int i = 0; i < 3; ++i) svc.request("POST", cs_path("default", cs) + "/nodes", node_doc("sidewalk", i, i), t);
    svc.request("PUT", cs_path("default", cs) + "/close", nullptr, t);
    const auto cs2 = open_cs(svc, t);
    svc.request("POST", cs_path("default", cs2) + "/captures", staging::to_json(three_poles("cap-1", 5)), t);
    auto rec = vetting::default_record(three_poles("cap-1", 5).detections, "cap-1");
    svc.request("GET", "/review/cap-1", nullptr, t);
    EXPECT_EQ(svc.request("POST", "/review/cap-1/verdict", staging::to_json(rec), t).status, 200);
    before = svc.request("GET", "/v1/workspaces/default/export", nullptr, t).raw;
  }
  {
    LiveService svc(cfg);
    const auto t = svc.login();
    EXPECT_EQ(svc.request("GET", "/v1/workspaces/default/export", nullptr, t).raw, before);
    EXPECT_EQ(svc.request("GET", "/review/cap-1", nullptr, t).body["status"], "vetted");
    // Identifiers continue after the replayed ones.
    EXPECT_EQ(open_cs(svc, t), 3);
  }
  // A torn final append is dropped; corruption earlier in the log is an error.
  std::ofstream(cfg.storage_dir / "default.log.jsonl", std::ios::app) << "{\"op\":\"no";
  EXPECT_NO_THROW(tdei::Store{cfg});
  std::ofstream(cfg.storage_dir / "other.log.jsonl") << "{\"op\":\"bogus\",\"user\":\"mapper\"}\n{}\n";
  EXPECT_THROW(tdei::Store{cfg}, Error);
}

TEST(ServiceConfigFile, Parse) {
  const auto c = tdei::ServiceConfig::from_json(
      {{"users", {{{"user_id", "u"}, {"secret", "s"}}}}, {"workspaces", {"w1"}}, {"token_ttl_s", 5}});
  EXPECT_EQ(c.users.size(), 1u);
  EXPECT_EQ(c.token_ttl_s, 5);
  EXPECT_THROW(tdei::ServiceConfig::from_json({{"users", Json::array()}, {"workspaces", {"w"}}}), Error);
  EXPECT_THROW(tdei::ServiceConfig::from_json({{"users", {{{"user_id", "u"}, {"secret", "s"}}}}, {"workspaces", {"../x"}}}),
               Error);
}

TEST(ServiceStatus, ErrorCodeMapping) {
  EXPECT_EQ(tdei::http_status(ErrorCode::Unauthenticated), 401);
  EXPECT_EQ(tdei::http_status(ErrorCode::NotOwner), 403);
  EXPECT_EQ(tdei::http_status(ErrorCode::NotFound), 404);
  for (auto c : {ErrorCode::ChangesetClosed, ErrorCode::AlreadyClosed, ErrorCode::DuplicateNodeId,
                 ErrorCode::UnknownInstance, ErrorCode::Conflict}) {
    EXPECT_EQ(tdei::http_status(c), 409);
  }
  for (auto c : {ErrorCode::InvalidCoordinates, ErrorCode::InvalidRecord, ErrorCode::IncompleteVetting,
                 ErrorCode::PrivacyViolation}) {
    EXPECT_EQ(tdei::http_status(c), 422);
  }
  EXPECT_EQ(tdei::http_status(ErrorCode::FormatError), 400);
  EXPECT_EQ(tdei::http_status(ErrorCode::Unavailable), 503);
  EXPECT_EQ(tdei::http_status(ErrorCode::IoError), 500);
}

// Review API

class Review : public ::testing::Test {
 protected:
  LiveService svc;
  std::string t = svc.login();
  long long cs = 0;
  staging::CaptureSummary cap = three_poles("cap-7", 7.0);

  void SetUp() override {
    cs = open_cs(svc, t);
    const auto r = svc.request("POST", cs_path("default", cs) + "/captures", staging::to_json(cap), t);
    ASSERT_EQ(r.status, 201) << r.raw;
  }
  Json exported() { return svc.request("GET", "/v1/workspaces/default/export", nullptr, t).body; }
};

TEST_F(Review, QueueAndDetail) {
  const auto q = svc.request("GET", "/review/queue", nullptr, t);
  ASSERT_EQ(q.status, 200);
  ASSERT_EQ(q.body["items"].size(), 1u);
  EXPECT_EQ(q.body["items"][0]["capture_id"], "cap-7");
  EXPECT_TRUE(svc.request("GET", "/review/queue", nullptr, svc.login("alice")).body["items"].empty());
  EXPECT_EQ(svc.request("GET", "/review/queue").status, 401);

  const auto d = svc.request("GET", "/review/cap-7", nullptr, t);
  ASSERT_EQ(d.status, 200);
  EXPECT_EQ(staging::capture_from_json(d.body["capture"]).detections, cap.detections);
  EXPECT_TRUE(d.body["record"].is_null());
  EXPECT_EQ(svc.request("GET", "/review/nope", nullptr, t).status, 404);
  EXPECT_EQ(svc.request("GET", "/review/cap-7", nullptr, svc.login("alice")).status, 403);
}

TEST_F(Review, AgreeWithOneRejectionStagesTwo) {
  svc.request("GET", "/review/cap-7", nullptr, t);
  auto rec = vetting::default_record(cap.detections, "cap-7");
  for (auto& v : rec.verdicts) {
    if (v.cls == FeatureClass::Pole) v.rejected_instances = {1};
  }
  const auto r = svc.request("POST", "/review/cap-7/verdict", staging::to_json(rec), t);
  ASSERT_EQ(r.status, 200) << r.raw;
  EXPECT_EQ(r.body["status"], "vetted");
  EXPECT_EQ(r.body["staged_node_ids"].size(), 3u);  // two poles and the sidewalk
  const auto ex = exported();
  EXPECT_EQ(count_class(ex, "pole"), 2);
  EXPECT_EQ(count_class(ex, "sidewalk"), 1);
  EXPECT_TRUE(svc.request("GET", "/review/queue", nullptr, t).body["items"].empty());
  // Staged nodes are exactly the accepted instances.
  std::set<std::pair<double, double>> staged, expected;
  for (const auto& f : ex["features"]) {
    if (f["properties"]["class"] == "pole") staged.insert({f["geometry"]["coordinates"][1].get<double>(), f["geometry"]["coordinates"][0].get<double>()});
  }
  for (std::size_t i : {0u, 2u}) {
    const auto& p = cap.detections.at(FeatureClass::Pole)[i].location;
    expected.insert({p.latitude, p.longitude});
  }
  EXPECT_EQ(staged, expected);
  EXPECT_EQ(svc.request("POST", "/review/cap-7/verdict", staging::to_json(rec), t).status, 409);
}

TEST_F(Review, DiscardStagesNoneOfClass) {
  auto rec = vetting::default_record(cap.detections, "cap-7");
  for (auto& v : rec.verdicts) {
    if (v.cls == FeatureClass::Pole) v.verdict = vetting::Verdict::Discard;
  }
  ASSERT_EQ(svc.request("POST", "/review/cap-7/verdict", staging::to_json(rec), t).status, 200);
  EXPECT_EQ(count_class(exported(), "pole"), 0);
  EXPECT_EQ(count_class(exported(), "sidewalk"), 1);
}

TEST_F(Review, PartialAndStaleRecordsRefused) {
  auto rec = vetting::default_record(cap.detections, "cap-7");
  rec.completed = false;
  auto r = svc.request("POST", "/review/cap-7/verdict", staging::to_json(rec), t);
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(r.body["error"], "IncompleteVetting");
  rec = vetting::default_record(cap.detections, "cap-7");
  rec.verdicts.pop_back();
  EXPECT_EQ(svc.request("POST", "/review/cap-7/verdict", staging::to_json(rec), t).status, 422);
  rec = vetting::default_record(cap.detections, "cap-7");
  rec.verdicts.back().rejected_instances = {5};
  r = svc.request("POST", "/review/cap-7/verdict", staging::to_json(rec), t);
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(r.body["error"], "UnknownInstance");
  rec = vetting::default_record(cap.detections, "other");
  EXPECT_EQ(svc.request("POST", "/review/cap-7/verdict", staging::to_json(rec), t).status, 422);
  EXPECT_EQ(svc.request("POST", "/review/cap-7/verdict", {{"capture_id", "cap-7"}}, t).status, 400);
  EXPECT_EQ(count_class(exported(), "pole"), 0);
  EXPECT_EQ(svc.request("GET", "/review/queue", nullptr, t).body["items"].size(), 1u);
}

TEST_F(Review, DraftLockExcludesSecondSession) {
  const auto t2 = svc.login();
  ASSERT_EQ(svc.request("GET", "/review/cap-7", nullptr, t).status, 200);
  EXPECT_EQ(svc.request("GET", "/review/cap-7", nullptr, t2).status, 409);
  EXPECT_EQ(svc.request("POST", "/review/cap-7/verdict", agree_all(cap), t2).status, 409);
  svc.advance(61);
  EXPECT_EQ(svc.request("GET", "/review/cap-7", nullptr, t2).status, 200);
  EXPECT_EQ(svc.request("POST", "/review/cap-7/verdict", agree_all(cap), t).status, 409);
  EXPECT_EQ(svc.request("POST", "/review/cap-7/verdict", agree_all(cap), t2).status, 200);
}

TEST_F(Review, ClosedChangesetBlocksStaging) {
  ASSERT_EQ(svc.request("PUT", cs_path("default", cs) + "/close", nullptr, t).status, 200);
  EXPECT_EQ(svc.request("POST", "/review/cap-7/verdict", agree_all(cap), t).status, 409);
  EXPECT_EQ(svc.request("POST", cs_path("default", cs) + "/captures", staging::to_json(three_poles("x", 1)), t).status,
            409);
}

TEST_F(Review, ResubmissionIsIdempotentOnlyWhenIdentical) {
  EXPECT_EQ(svc.request("POST", cs_path("default", cs) + "/captures", staging::to_json(cap), t).status, 200);
  auto changed = cap;
  changed.timestamp += 1;
  EXPECT_EQ(svc.request("POST", cs_path("default", cs) + "/captures", staging::to_json(changed), t).status, 409);
}

TEST(ServiceUi, StaticAssetsServedBesideApi) {
  fixture::TempDir ui;
  std::ofstream(ui / "index.html") << "<!doctype html><title>review</title>";
  std::filesystem::create_directories(ui / "assets");
  std::ofstream(ui / "assets" / "app.js") << "console.log(1);";
  LiveService svc(LiveService::config(), ui.path());
  const auto root = svc.request("GET", "/");
  EXPECT_EQ(root.status, 200);
  EXPECT_NE(root.raw.find("review"), std::string::npos);
  EXPECT_EQ(svc.request("GET", "/assets/app.js").raw, "console.log(1);");
  EXPECT_EQ(svc.request("GET", "/v1/health").status, 200);
  EXPECT_EQ(svc.request("GET", "/review/queue", nullptr, svc.login()).status, 200);

  LiveService bare;
  EXPECT_EQ(bare.request("GET", "/").status, 404);
}

TEST(ServiceClient, TypedCallsAndErrors) {
  LiveService svc;
  tdei::Client c(svc.url(), {1, std::chrono::milliseconds(1), std::chrono::seconds(1), std::chrono::seconds(5)});
  EXPECT_TRUE(c.health());
  try {
    c.login("mapper", "wrong");
    FAIL();
  } catch (const tdei::HttpError& e) {
    EXPECT_EQ(e.status(), 401);
    EXPECT_EQ(e.code(), ErrorCode::Unauthenticated);
  }
  c.login("mapper", "mapper-secret");
  const auto cs = c.open_changeset("default", "k");
  EXPECT_EQ(c.open_changeset("default", "k"), cs);
  osw::OswNode n;
  n.location = geo::GeoPoint(47.6, -122.3);
  n.cls = FeatureClass::Sidewalk;
  n.timestamp = 1;
  const auto id = c.add_node("default", cs, n);
  n.timestamp = 2;
  c.add_node("default", cs, n);
  EXPECT_GT(id, 0u);
  EXPECT_TRUE(c.close_changeset("default", cs).has_value());
  EXPECT_EQ(c.changeset("default", cs)["state"], "closed");
  EXPECT_EQ(c.export_workspace("default")["features"].size(), 3u);

  fixture::TempDir tmp;
  tdei::Client dead("127.0.0.1:1", {2, std::chrono::milliseconds(1), std::chrono::seconds(1), std::chrono::seconds(1)});
  EXPECT_FALSE(dead.health());
  try {
    dead.login("mapper", "x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unavailable);
  }
  EXPECT_EQ(dead.requests_sent(), 4u);
  EXPECT_THROW(tdei::Client("https://x"), Error);
  EXPECT_THROW(tdei::Client("ftp://x/y"), Error);
}
