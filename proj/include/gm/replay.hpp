#pragma once

// Session replay: process every capture, vet, and push the accepted nodes through one
// changeset (one sidewalk per session).

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gm/error.hpp"
#include "gm/pipeline.hpp"
#include "gm/session.hpp"
#include "gm/staging.hpp"
#include "gm/tdei/client.hpp"
#include "gm/vetting.hpp"

namespace gm::replay {

enum class VetMode { Auto, File, Interactive, Review };

struct ReplayOptions {
  VetMode mode = VetMode::Auto;
  std::string workspace = "default";
  std::string user = "mapper";
  std::string secret = "mapper-secret";
  ClassSet classes;  // empty: the session's own selection
  pipeline::PipelineConfig pipeline;
  std::map<std::string, vetting::VettingRecord> records;  // File mode, by capture or frame id
  std::function<vetting::VettingRecord(const staging::CaptureSummary&)> ask;  // Interactive mode
};

struct ReplaySummary {
  std::size_t captures = 0;
  std::size_t detections = 0;
  std::size_t item_errors = 0;
  std::size_t vetted = 0;
  std::size_t unvetted = 0;  // File mode captures without a record
  std::size_t nodes = 0;
  std::size_t submitted_for_review = 0;
  std::optional<osw::ChangesetId> changeset;
  std::optional<osw::WayId> way;
  std::vector<osw::OswNode> staged;
  std::vector<staging::CaptureSummary> summaries;
};

inline std::string capture_key(const session::Session& s, int frame_id) {
  return s.session_id + "-" + std::to_string(frame_id);
}

/// Runs the pipeline and vetting; uploads through `client` unless it is null (dry run).
inline ReplaySummary replay(session::Session s, const ReplayOptions& opt, tdei::Client* client) {
  if (!opt.classes.empty()) {
    s.class_selection = opt.classes;
    s.validate();
  }
  ReplaySummary out;
  for (int frame_id : s.capture_indices) {
    const auto result = pipeline::process_capture(s, frame_id, opt.pipeline);
    auto summary = staging::summarize(result, capture_key(s, frame_id));
    ++out.captures;
    out.item_errors += result.errors.size();
    for (const auto& [c, list] : summary.detections) out.detections += list.size();

    if (opt.mode == VetMode::Review) {
      out.summaries.push_back(std::move(summary));
      continue;
    }
    vetting::VettingRecord record;
    if (opt.mode == VetMode::Auto) {
      record = vetting::default_record(summary.detections, summary.capture_id);
    } else if (opt.mode == VetMode::File) {
      auto it = opt.records.find(summary.capture_id);
      if (it == opt.records.end()) it = opt.records.find(std::to_string(frame_id));
      if (it == opt.records.end()) {
        ++out.unvetted;
        continue;
      }
      record = it->second;
    } else {
      if (!opt.ask) fail(ErrorCode::InvalidArgument, "interactive vetting needs a prompt");
      record = opt.ask(summary);
    }
    const auto vetted = vetting::apply_vetting(summary.detections, record);
    ++out.vetted;
    for (auto& n : staging::stage_nodes(summary, vetted)) out.staged.push_back(std::move(n));
    out.summaries.push_back(std::move(summary));
  }

  if (!client) return out;
  client->login(opt.user, opt.secret);
  const auto cs = client->open_changeset(opt.workspace, s.session_id);
  out.changeset = cs;
  if (opt.mode == VetMode::Review) {
    for (const auto& c : out.summaries) {
      client->submit_capture(opt.workspace, cs, c);
      ++out.submitted_for_review;
    }
    return out;
  }
  for (const auto& n : out.staged) {
    client->add_node(opt.workspace, cs, n);
    ++out.nodes;
  }
  try {
    out.way = client->close_changeset(opt.workspace, cs);
  } catch (const tdei::HttpError& e) {
    // A repeated replay of an already uploaded session lands on its closed changeset.
    if (e.code() != ErrorCode::AlreadyClosed) throw;
    const auto ways = client->changeset(opt.workspace, cs).at("way_ids");
    if (!ways.empty()) out.way = ways.front().get<osw::WayId>();
  }
  return out;
}

}  // namespace gm::replay
