#pragma once

// Annotation-view semantics: per-class verdicts with per-instance rejections.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gm/classes.hpp"
#include "gm/error.hpp"

namespace gm::vetting {

enum class Verdict { Agree, Discard, Missing };

constexpr std::string_view verdict_name(Verdict v) noexcept {
  switch (v) {
    case Verdict::Agree: return "agree";
    case Verdict::Discard: return "discard";
    case Verdict::Missing: return "missing";
  }
  return "agree";
}

inline Verdict parse_verdict(std::string_view s) {
  if (s == "agree" || s == "AGREE") return Verdict::Agree;
  if (s == "discard" || s == "DISCARD") return Verdict::Discard;
  if (s == "missing" || s == "MISSING") return Verdict::Missing;
  fail(ErrorCode::FormatError, "unknown verdict '" + std::string(s) + "'");
}

/// Verdict for one class. Instance indices are 0-based positions in that class's
/// detection list. `reject_width` only matters for the sidewalk class.
struct ClassVerdict {
  FeatureClass cls = FeatureClass::Background;
  Verdict verdict = Verdict::Agree;
  std::set<std::size_t> rejected_instances;
  bool reject_width = false;

  friend bool operator==(const ClassVerdict&, const ClassVerdict&) = default;
};

struct VettingRecord {
  std::string capture_id;
  std::vector<ClassVerdict> verdicts;
  bool completed = false;

  [[nodiscard]] const ClassVerdict* find(FeatureClass c) const {
    for (const auto& v : verdicts) {
      if (v.cls == c) return &v;
    }
    return nullptr;
  }

  friend bool operator==(const VettingRecord&, const VettingRecord&) = default;
};

template <typename Instance>
using Detections = std::map<FeatureClass, std::vector<Instance>>;

template <typename Instance>
struct VettedCapture {
  Detections<Instance> accepted;  // per class, in detection order
  std::set<FeatureClass> missing_flags;
  std::set<FeatureClass> width_rejected;

  [[nodiscard]] std::size_t accepted_count() const {
    std::size_t n = 0;
    for (const auto& [cls, list] : accepted) n += list.size();
    return n;
  }
};

/// AGREE for every detected class, no overrides, completed.
template <typename Instance>
VettingRecord default_record(const Detections<Instance>& detections, std::string capture_id = {}) {
  VettingRecord r;
  r.capture_id = std::move(capture_id);
  for (const auto& [cls, list] : detections) {
    if (!list.empty()) r.verdicts.push_back({cls, Verdict::Agree, {}, false});
  }
  r.completed = true;
  return r;
}

/// Classes with at least one detected instance.
template <typename Instance>
std::set<FeatureClass> detected_classes(const Detections<Instance>& detections) {
  std::set<FeatureClass> out;
  for (const auto& [cls, list] : detections) {
    if (!list.empty()) out.insert(cls);
  }
  return out;
}

/// Checks a record against the detections it vets without applying it.
template <typename Instance>
void validate_record(const Detections<Instance>& detections, const VettingRecord& record) {
  if (!record.completed) fail(ErrorCode::IncompleteVetting, "vetting record not completed");
  std::set<FeatureClass> seen;
  for (const auto& v : record.verdicts) {
    if (!seen.insert(v.cls).second) {
      fail(ErrorCode::InvalidRecord, "duplicate verdict for class " + std::string(class_name(v.cls)));
    }
    if (v.verdict == Verdict::Discard && !v.rejected_instances.empty()) {
      fail(ErrorCode::InvalidRecord, "discarded class carries instance overrides");
    }
    auto it = detections.find(v.cls);
    const std::size_t count = it == detections.end() ? 0 : it->second.size();
    for (std::size_t idx : v.rejected_instances) {
      if (idx >= count) {
        fail(ErrorCode::UnknownInstance, "instance " + std::to_string(idx) + " of class " +
                                             std::string(class_name(v.cls)) + " does not exist");
      }
    }
  }
  for (FeatureClass c : detected_classes(detections)) {
    if (!seen.contains(c)) {
      fail(ErrorCode::IncompleteVetting, "no verdict for detected class " + std::string(class_name(c)));
    }
  }
}

template <typename Instance>
VettedCapture<Instance> apply_vetting(const Detections<Instance>& detections, const VettingRecord& record) {
  validate_record(detections, record);
  VettedCapture<Instance> out;
  for (const auto& v : record.verdicts) {
    if (v.verdict == Verdict::Missing) out.missing_flags.insert(v.cls);
    if (v.reject_width) out.width_rejected.insert(v.cls);
    if (v.verdict == Verdict::Discard) continue;
    auto it = detections.find(v.cls);
    if (it == detections.end()) continue;
    std::vector<Instance> kept;
    for (std::size_t i = 0; i < it->second.size(); ++i) {
      if (!v.rejected_instances.contains(i)) kept.push_back(it->second[i]);
    }
    if (!kept.empty()) out.accepted.emplace(v.cls, std::move(kept));
  }
  return out;
}

}  // namespace gm::vetting
