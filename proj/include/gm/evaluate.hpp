#pragma once

// Ground-truth evaluation of predictions, per class, plus a sidewalk width row.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gm/classes.hpp"
#include "gm/error.hpp"
#include "gm/metrics.hpp"
#include "gm/osw.hpp"
#include "gm/session.hpp"
#include "gm/staging.hpp"

namespace gm::evaluate {

inline constexpr const char* kWidthRow = "sidewalk_width";

/// Predictions of one capture.
struct CapturePrediction {
  std::string capture_id;
  std::vector<metrics::Located> objects;  // non-sidewalk classes
  std::optional<double> width_m;
};

struct Evaluation {
  std::map<FeatureClass, std::vector<double>> object_errors;
  std::vector<double> measured_widths;
  std::vector<double> true_widths;
  std::size_t unmatched_predictions = 0;

  [[nodiscard]] std::vector<metrics::TableRow> table() const {
    std::vector<metrics::TableRow> rows;
    for (const auto& [cls, e] : object_errors) {
      if (!e.empty()) rows.push_back({std::string(class_name(cls)), metrics::error_stats(e)});
    }
    if (!measured_widths.empty()) rows.push_back({kWidthRow, metrics::width_errors(measured_widths, true_widths)});
    return rows;
  }
};

inline std::vector<CapturePrediction> predictions_from_summaries(const std::vector<staging::CaptureSummary>& captures) {
  std::vector<CapturePrediction> out;
  for (const auto& c : captures) {
    CapturePrediction p{c.capture_id, {}, std::nullopt};
    for (const auto& [cls, list] : c.detections) {
      for (const auto& i : list) {
        if (cls == FeatureClass::Sidewalk) {
          if (i.width_m) p.width_m = *i.width_m;
        } else {
          p.objects.push_back({cls, i.location});
        }
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// Groups exported nodes by their capture tag; untagged nodes form one group.
inline std::vector<CapturePrediction> predictions_from_export(const osw::ParsedWorkspace& ws) {
  std::map<std::string, CapturePrediction> groups;
  for (const auto& [id, n] : ws.nodes) {
    auto it = n.tags.find(staging::kCaptureTag);
    const std::string key = it == n.tags.end() ? std::string{} : it->second;
    auto& p = groups[key];
    p.capture_id = key;
    if (n.cls == FeatureClass::Sidewalk) {
      auto w = n.tags.find(staging::kWidthTag);
      if (w != n.tags.end()) {
        try {
          p.width_m = std::stod(w->second);
        } catch (const std::exception&) {
          fail(ErrorCode::FormatError, "node " + std::to_string(id) + " has a non-numeric width");
        }
      }
    } else {
      p.objects.push_back({n.cls, n.location});
    }
  }
  std::vector<CapturePrediction> out;
  for (auto& [k, p] : groups) out.push_back(std::move(p));
  return out;
}

/// Matches each capture's predictions against the ground truth independently.
inline Evaluation evaluate(const session::GroundTruth& truth, const std::vector<CapturePrediction>& predictions,
                           double gate_m = metrics::kMatchGateM) {
  std::vector<metrics::Located> gt;
  for (const auto& o : truth.objects) gt.push_back({o.cls, o.location});
  Evaluation ev;
  for (const auto& p : predictions) {
    const auto m = metrics::match_instances(p.objects, gt, gate_m);
    for (const auto& pair : m.pairs) ev.object_errors[p.objects[pair.predicted].cls].push_back(pair.distance_m);
    ev.unmatched_predictions += m.unmatched_predicted.size();
    if (p.width_m && truth.sidewalk_width_m) {
      ev.measured_widths.push_back(*p.width_m);
      ev.true_widths.push_back(*truth.sidewalk_width_m);
    }
  }
  return ev;
}

}  // namespace gm::evaluate
