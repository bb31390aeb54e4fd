#pragma once

#include <filesystem>
#include <optional>

#include "c3mod/eval/report.hpp"
#include "c3mod/pipeline/pipeline.hpp"

namespace c3mod::interface {

/// A replay fixture directory holds
///   corpus.jsonl      samples with gold labels, categories and native votes
///   provider.jsonl    scripted chat/search responses
///   votes.jsonl       {sample_id, reviewer_id, vote, spans?} human votes
///   annotators.jsonl  optional corpus for the native-annotator statistics
struct ReplayOptions {
  std::filesystem::path fixture_dir;
  std::filesystem::path out_dir;
  int concurrency = 4;
  std::size_t annotator_threshold = 9;
  eval::StdKind std_kind = eval::StdKind::Population;
  /// 2024-01-01T00:00:00Z; every timestamp in the run uses it.
  Timestamp clock_at = from_epoch_ms(1704067200000);
};

struct ReplayResult {
  pipeline::RunSummary summary;
  eval::Report report;
  std::filesystem::path run_dir;
  std::size_t votes_applied = 0;
};

/// Ingest, Steps 1 to 3 with scripted providers and programmatic votes, then
/// evaluation. Writes report.md and report.json into out_dir. Rerunning over
/// the same out_dir reuses the persisted run and gives the same report.
ReplayResult replay(const ReplayOptions& options);

/// Applies votes in file order, skipping any already recorded, then closes
/// tasks that ran out of reviewers. Returns the number of votes submitted.
std::size_t apply_votes(pipeline::Run& run, const std::filesystem::path& votes_file);

/// Report over a run's decisions with gold labels, categories and native votes
/// taken from `gold` (matched by sample id).
eval::ReportInputs evaluate_run(const pipeline::Run& run, const std::vector<Sample>& gold);

}  // namespace c3mod::interface
