#pragma once

// Error statistics and prediction/truth matching.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "gm/classes.hpp"
#include "gm/error.hpp"
#include "gm/geo.hpp"

namespace gm::metrics {

/// Population statistics of absolute errors.
struct ErrorStats {
  double mean = 0;
  double std_dev = 0;
  double rmse = 0;
  std::size_t n = 0;
};

inline ErrorStats error_stats(std::span<const double> errors) {
  if (errors.empty()) fail(ErrorCode::EmptyInput, "no errors to summarize");
  const double n = static_cast<double>(errors.size());
  double sum = 0, sq = 0;
  for (double e : errors) {
    sum += e;
    sq += e * e;
  }
  ErrorStats s;
  s.n = errors.size();
  s.mean = sum / n;
  double var = 0;
  for (double e : errors) var += (e - s.mean) * (e - s.mean);
  s.std_dev = std::sqrt(var / n);
  s.rmse = std::sqrt(sq / n);
  return s;
}

inline ErrorStats localization_errors(std::span<const geo::GeoPoint> predicted, std::span<const geo::GeoPoint> truth) {
  if (predicted.size() != truth.size()) fail(ErrorCode::LengthMismatch, "predicted and truth lists differ in length");
  std::vector<double> e;
  e.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) e.push_back(geo::haversine_m(predicted[i], truth[i]));
  return error_stats(e);
}

inline ErrorStats width_errors(std::span<const double> measured, std::span<const double> truth) {
  if (measured.size() != truth.size()) fail(ErrorCode::LengthMismatch, "measured and truth lists differ in length");
  std::vector<double> e;
  e.reserve(measured.size());
  for (std::size_t i = 0; i < measured.size(); ++i) e.push_back(std::abs(measured[i] - truth[i]));
  return error_stats(e);
}

inline constexpr double kMatchGateM = 10.0;

struct Located {
  FeatureClass cls = FeatureClass::Background;
  geo::GeoPoint location;
};

struct Match {
  std::size_t predicted = 0;
  std::size_t truth = 0;
  double distance_m = 0;
};

struct Matching {
  std::vector<Match> pairs;
  std::vector<std::size_t> unmatched_predicted;
  std::vector<std::size_t> unmatched_truth;
};

/// Greedy nearest-neighbour matching within class: candidate pairs within the gate are taken
/// in ascending distance, each side used at most once.
inline Matching match_instances(std::span<const Located> predicted, std::span<const Located> truth,
                                double gate_m = kMatchGateM) {
  std::vector<Match> candidates;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (predicted[i].cls != truth[j].cls) continue;
      const double d = geo::haversine_m(predicted[i].location, truth[j].location);
      if (d <= gate_m) candidates.push_back({i, j, d});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(), [](const Match& a, const Match& b) {
    return std::tie(a.distance_m, a.predicted, a.truth) < std::tie(b.distance_m, b.predicted, b.truth);
  });
  std::vector<bool> used_p(predicted.size()), used_t(truth.size());
  Matching out;
  for (const auto& c : candidates) {
    if (used_p[c.predicted] || used_t[c.truth]) continue;
    used_p[c.predicted] = used_t[c.truth] = true;
    out.pairs.push_back(c);
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const Match& a, const Match& b) { return a.predicted < b.predicted; });
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (!used_p[i]) out.unmatched_predicted.push_back(i);
  }
  for (std::size_t j = 0; j < truth.size(); ++j) {
    if (!used_t[j]) out.unmatched_truth.push_back(j);
  }
  return out;
}

struct TableRow {
  std::string label;
  ErrorStats stats;
};

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", v);
  return buf;
}

inline void write_csv(std::ostream& os, std::span<const TableRow> rows) {
  os << "class,mean_m,std_m,rmse_m,n\n";
  for (const auto& r : rows) {
    os << r.label << ',' << format_number(r.stats.mean) << ',' << format_number(r.stats.std_dev) << ','
       << format_number(r.stats.rmse) << ',' << r.stats.n << '\n';
  }
}

}  // namespace gm::metrics
