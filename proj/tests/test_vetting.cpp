#include <gtest/gtest.h>

#include <random>

#include "gm/vetting.hpp"

using namespace gm;
using namespace gm::vetting;

namespace {

using Det = Detections<int>;

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvariantViolation;
}

Det sample() {
  return {{FeatureClass::Pole, {1, 2, 3}}, {FeatureClass::TrafficSign, {10, 11}}, {FeatureClass::Sidewalk, {20}}};
}

Det random_detections(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n(0, 4);
  Det d;
  int id = 0;
  for (FeatureClass c : kMappableClasses) {
    const int k = n(rng);
    if (k == 0 && rng() % 2) continue;
    auto& list = d[c];
    for (int i = 0; i < k; ++i) list.push_back(id++);
  }
  return d;
}

VettingRecord random_record(std::mt19937_64& rng, const Det& d) {
  VettingRecord r;
  r.completed = true;
  for (const auto& [cls, list] : d) {
    if (list.empty() && rng() % 2) continue;
    ClassVerdict v{cls, static_cast<Verdict>(rng() % 3), {}, rng() % 4 == 0};
    if (v.verdict != Verdict::Discard) {
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (rng() % 3 == 0) v.rejected_instances.insert(i);
      }
    }
    r.verdicts.push_back(v);
  }
  std::shuffle(r.verdicts.begin(), r.verdicts.end(), rng);
  return r;
}

}  // namespace

TEST(Vetting, AllAgreeAcceptsEverything) {
  const auto d = sample();
  const auto v = apply_vetting(d, default_record(d));
  EXPECT_EQ(v.accepted, d);
  EXPECT_TRUE(v.missing_flags.empty());
  EXPECT_EQ(v.accepted_count(), 6u);
}

TEST(Vetting, RejectedInstanceIsSubtracted) {
  auto r = default_record(sample());
  ASSERT_EQ(r.verdicts.size(), 3u);
  ASSERT_EQ(r.verdicts.back().cls, FeatureClass::Pole);
  r.verdicts.back().rejected_instances = {1};
  const auto v = apply_vetting(sample(), r);
  EXPECT_EQ(v.accepted.at(FeatureClass::Pole), (std::vector<int>{1, 3}));
}

TEST(Vetting, DiscardDropsClassAndRefusesOverrides) {
  auto r = default_record(sample());
  for (auto& cv : r.verdicts) {
    if (cv.cls == FeatureClass::TrafficSign) cv.verdict = Verdict::Discard;
  }
  const auto v = apply_vetting(sample(), r);
  EXPECT_FALSE(v.accepted.contains(FeatureClass::TrafficSign));
  for (auto& cv : r.verdicts) {
    if (cv.cls == FeatureClass::TrafficSign) cv.rejected_instances = {0};
  }
  EXPECT_EQ(code_of([&] { apply_vetting(sample(), r); }), ErrorCode::InvalidRecord);
}

TEST(Vetting, MissingKeepsInstancesAndFlagsClass) {
  auto r = default_record(sample());
  r.verdicts.back().verdict = Verdict::Missing;
  r.verdicts.back().rejected_instances = {0};
  const auto cls = r.verdicts.back().cls;
  const auto v = apply_vetting(sample(), r);
  EXPECT_EQ(v.missing_flags, std::set<FeatureClass>{cls});
  EXPECT_EQ(v.accepted.at(cls).size(), sample().at(cls).size() - 1);
}

TEST(Vetting, WidthRejection) {
  auto r = default_record(sample());
  for (auto& cv : r.verdicts) cv.reject_width = cv.cls == FeatureClass::Sidewalk;
  const auto v = apply_vetting(sample(), r);
  EXPECT_EQ(v.width_rejected, std::set<FeatureClass>{FeatureClass::Sidewalk});
  EXPECT_EQ(v.accepted.at(FeatureClass::Sidewalk).size(), 1u);
}

TEST(Vetting, Errors) {
  auto r = default_record(sample());
  r.completed = false;
  EXPECT_EQ(code_of([&] { apply_vetting(sample(), r); }), ErrorCode::IncompleteVetting);
  r = default_record(sample());
  r.verdicts.pop_back();
  EXPECT_EQ(code_of([&] { apply_vetting(sample(), r); }), ErrorCode::IncompleteVetting);
  r = default_record(sample());
  r.verdicts[0].rejected_instances = {7};
  EXPECT_EQ(code_of([&] { apply_vetting(sample(), r); }), ErrorCode::UnknownInstance);
  r = default_record(sample());
  r.verdicts.push_back(r.verdicts[0]);
  EXPECT_EQ(code_of([&] { apply_vetting(sample(), r); }), ErrorCode::InvalidRecord);
}

TEST(DefaultRecord, Shape) {
  const Det two{{FeatureClass::Pole, {1}}, {FeatureClass::Building, {2, 3}}};
  const auto r = default_record(two, "cap");
  EXPECT_TRUE(r.completed);
  EXPECT_EQ(r.capture_id, "cap");
  ASSERT_EQ(r.verdicts.size(), 2u);
  for (const auto& v : r.verdicts) {
    EXPECT_EQ(v.verdict, Verdict::Agree);
    EXPECT_TRUE(v.rejected_instances.empty());
  }
  const auto empty = default_record(Det{});
  EXPECT_TRUE(empty.completed);
  EXPECT_TRUE(empty.verdicts.empty());
  EXPECT_EQ(apply_vetting(Det{}, empty).accepted_count(), 0u);
}

TEST(VerdictNames, RoundTrip) {
  for (Verdict v : {Verdict::Agree, Verdict::Discard, Verdict::Missing}) EXPECT_EQ(parse_verdict(verdict_name(v)), v);
  EXPECT_EQ(parse_verdict("AGREE"), Verdict::Agree);
  EXPECT_EQ(code_of([] { parse_verdict("maybe"); }), ErrorCode::FormatError);
}

TEST(VettingProperties, RandomRecords) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 3000; ++trial) {
    const auto d = random_detections(rng);

    // Composition identity.
    Det nonempty;
    for (const auto& [c, l] : d) {
      if (!l.empty()) nonempty[c] = l;
    }
    const auto id = apply_vetting(d, default_record(d));
    ASSERT_EQ(id.accepted, nonempty);
    ASSERT_TRUE(id.missing_flags.empty());

    const auto r = random_record(rng, d);
    const auto v = apply_vetting(d, r);
    for (const auto& [cls, kept] : v.accepted) {
      const auto* cv = r.find(cls);
      ASSERT_NE(cv, nullptr);
      ASSERT_NE(cv->verdict, Verdict::Discard) << "discard dominates";
      const auto& all = d.at(cls);
      std::size_t next = 0;
      for (int x : kept) {
        // Accepted instances are a subsequence of the detections, skipping exactly the rejected.
        while (next < all.size() && all[next] != x) {
          ASSERT_TRUE(cv->rejected_instances.contains(next));
          ++next;
        }
        ASSERT_LT(next, all.size());
        ASSERT_FALSE(cv->rejected_instances.contains(next));
        ++next;
      }
      ASSERT_EQ(kept.size(), all.size() - cv->rejected_instances.size());
    }
    for (const auto& cv : r.verdicts) {
      ASSERT_EQ(v.missing_flags.contains(cv.cls), cv.verdict == Verdict::Missing);
    }
  }
}
