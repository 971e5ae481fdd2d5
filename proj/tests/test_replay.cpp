#include <gtest/gtest.h>

#include "gm/replay.hpp"
#include "gm/synthetic.hpp"
#include "harness.hpp"
#include "support.hpp"

using namespace gm;
using Json = nlohmann::json;
using fixture::LiveService;

namespace {

const session::Session& walk() {
  static const session::Session s = [] {
    synthetic::TrajectorySpec traj;
    traj.captures = 10;
    return synthetic::generate_synthetic(synthetic::default_scene(), synthetic::build_trajectory(traj), {0.3, 0.0, 5},
                                         false, "walk");
  }();
  return s;
}

tdei::Client client_for(const LiveService& svc) {
  return tdei::Client(svc.url(), {2, std::chrono::milliseconds(1), std::chrono::seconds(1), std::chrono::seconds(10)});
}

struct Exported {
  std::map<osw::NodeId, osw::OswNode> nodes;
  std::map<osw::WayId, osw::OswWay> ways;
};

Exported export_of(const LiveService& svc) {
  const auto r = svc.request("GET", "/v1/workspaces/default/export", nullptr, svc.login());
  const auto p = osw::parse_workspace(r.body);
  return {p.nodes, p.ways};
}

}  // namespace

TEST(Replay, AutoVetUploadsEveryDetectionAndOneWay) {
  LiveService svc;
  auto client = client_for(svc);
  const auto sum = replay::replay(walk(), {}, &client);
  EXPECT_EQ(sum.captures, 10u);
  EXPECT_EQ(sum.vetted, 10u);
  EXPECT_EQ(sum.nodes, sum.detections);
  EXPECT_GT(sum.nodes, 10u);
  ASSERT_TRUE(sum.way);

  const auto ex = export_of(svc);
  EXPECT_EQ(ex.nodes.size(), sum.nodes);
  ASSERT_EQ(ex.ways.size(), 1u);
  const auto& way = ex.ways.begin()->second;
  EXPECT_EQ(way.way_id, *sum.way);
  // One sidewalk node per capture, in capture order.
  ASSERT_EQ(way.node_refs.size(), 10u);
  std::vector<double> times;
  for (auto ref : way.node_refs) {
    EXPECT_EQ(ex.nodes.at(ref).cls, FeatureClass::Sidewalk);
    EXPECT_TRUE(ex.nodes.at(ref).tags.contains("width"));
    times.push_back(ex.nodes.at(ref).timestamp);
  }
  EXPECT_TRUE(std::is_sorted(times.begin(), times.end()));
  std::set<std::string> captures;
  for (const auto& [id, n] : ex.nodes) captures.insert(n.tags.at("capture"));
  EXPECT_EQ(captures.size(), 10u);
}

TEST(Replay, RepeatedReplayChangesNothing) {
  LiveService svc;
  auto client = client_for(svc);
  const auto first = replay::replay(walk(), {}, &client);
  const auto before = svc.request("GET", "/v1/workspaces/default/export", nullptr, svc.login()).raw;
  const auto again = replay::replay(walk(), {}, &client);
  EXPECT_EQ(svc.request("GET", "/v1/workspaces/default/export", nullptr, svc.login()).raw, before);
  EXPECT_EQ(again.changeset, first.changeset);
  EXPECT_EQ(again.way, first.way);
}

TEST(Replay, DryRunStagesWithoutNetwork) {
  const auto sum = replay::replay(walk(), {}, nullptr);
  EXPECT_FALSE(sum.changeset);
  EXPECT_EQ(sum.nodes, 0u);
  EXPECT_EQ(sum.staged.size(), sum.detections);
  for (const auto& n : sum.staged) EXPECT_TRUE(privacy::raster_fields(staging::node_request(n)).empty());
}

TEST(Replay, VetFileRecordsApply) {
  LiveService svc;
  auto client = client_for(svc);
  const auto dry = replay::replay(walk(), {}, nullptr);
  replay::ReplayOptions opt;
  opt.mode = replay::VetMode::File;
  // First capture: discard poles. Second: keyed by frame id, all agreed. The rest unvetted.
  const auto& c0 = dry.summaries[0];
  auto r0 = vetting::default_record(c0.detections, c0.capture_id);
  for (auto& v : r0.verdicts) {
    if (v.cls == FeatureClass::Pole) v.verdict = vetting::Verdict::Discard;
  }
  opt.records[c0.capture_id] = r0;
  const auto& c1 = dry.summaries[1];
  opt.records[std::to_string(walk().capture_indices[1])] = vetting::default_record(c1.detections, c1.capture_id);
  const auto sum = replay::replay(walk(), opt, &client);
  EXPECT_EQ(sum.vetted, 2u);
  EXPECT_EQ(sum.unvetted, 8u);
  std::size_t expect = 0;
  for (const auto& [cls, list] : c0.detections) expect += cls == FeatureClass::Pole ? 0 : list.size();
  for (const auto& [cls, list] : c1.detections) expect += list.size();
  EXPECT_EQ(sum.nodes, expect);
  EXPECT_EQ(export_of(svc).nodes.size(), expect);

  opt.records[c0.capture_id].completed = false;
  try {
    replay::replay(walk(), opt, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IncompleteVetting);
  }
}

TEST(Replay, InteractivePrompt) {
  replay::ReplayOptions opt;
  opt.mode = replay::VetMode::Interactive;
  EXPECT_THROW(replay::replay(walk(), opt, nullptr), Error);
  int asked = 0;
  opt.ask = [&](const staging::CaptureSummary& c) {
    ++asked;
    auto r = vetting::default_record(c.detections, c.capture_id);
    for (auto& v : r.verdicts) v.verdict = vetting::Verdict::Discard;
    return r;
  };
  const auto sum = replay::replay(walk(), opt, nullptr);
  EXPECT_EQ(asked, 10);
  EXPECT_TRUE(sum.staged.empty());
}

TEST(Replay, ReviewModeDefersToQueue) {
  LiveService svc;
  auto client = client_for(svc);
  replay::ReplayOptions opt;
  opt.mode = replay::VetMode::Review;
  const auto sum = replay::replay(walk(), opt, &client);
  EXPECT_EQ(sum.submitted_for_review, 10u);
  EXPECT_EQ(sum.nodes, 0u);
  const auto t = svc.login();
  const auto q = svc.request("GET", "/review/queue", nullptr, t);
  ASSERT_EQ(q.body["items"].size(), 10u);
  EXPECT_TRUE(export_of(svc).nodes.empty());
  for (const auto& item : q.body["items"]) {
    const std::string id = item["capture_id"];
    const auto detail = svc.request("GET", "/review/" + id, nullptr, t);
    const auto cap = staging::capture_from_json(detail.body["capture"]);
    ASSERT_EQ(svc.request("POST", "/review/" + id + "/verdict",
                          staging::to_json(vetting::default_record(cap.detections, id)), t).status, 200);
  }
  EXPECT_EQ(export_of(svc).nodes.size(), sum.detections);
  const auto closed = svc.request("PUT", "/v1/workspaces/default/changesets/" + std::to_string(*sum.changeset) + "/close",
                                  nullptr, t);
  EXPECT_FALSE(closed.body["way_id"].is_null());
}

TEST(Replay, ClassOverrideAndUnreachableServer) {
  replay::ReplayOptions opt;
  opt.classes = {FeatureClass::Pole};
  const auto sum = replay::replay(walk(), opt, nullptr);
  for (const auto& n : sum.staged) EXPECT_EQ(n.cls, FeatureClass::Pole);
  EXPECT_GT(sum.staged.size(), 0u);

  tdei::Client dead("127.0.0.1:1", {1, std::chrono::milliseconds(1), std::chrono::seconds(1), std::chrono::seconds(1)});
  try {
    replay::replay(walk(), {}, &dead);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Unavailable);
  }
}
