#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "c3mod/domain.hpp"
#include "c3mod/eval/stats.hpp"

namespace c3mod::eval {

struct AccuracyReport {
  Ratio overall;
  /// LlmConsensus and HumanMajority only; Unresolved decisions are counted in
  /// `unresolved` and never scored.
  std::map<DecisionStage, Ratio> by_stage;
  std::map<CulturalCategory, Ratio> by_category;
  std::map<CulturalCategory, std::map<DecisionStage, Ratio>> by_category_stage;
  std::vector<std::string> unresolved;
  /// Majority of the LLM verdicts on every scored sample, humans ignored.
  std::optional<Ratio> llm_only_baseline;
};

/// Scores every decision that carries a label. `categories` may be partial;
/// samples without a category are left out of the category partitions.
/// Throws ValidationError naming the first decided sample without a gold label.
AccuracyReport accuracy(const std::vector<PipelineDecision>& decisions,
                        const std::map<std::string, Label>& gold,
                        const std::map<std::string, CulturalCategory>& categories = {});

std::map<std::string, Label> gold_labels(const std::vector<Sample>& corpus);
std::map<std::string, CulturalCategory> categories(const std::vector<Sample>& corpus);

/// (total - escalated) / total. Throws ValidationError unless
/// 0 <= escalated <= total and total > 0.
double workload_reduction(std::uint64_t total, std::uint64_t escalated);
Ratio workload_ratio(std::uint64_t total, std::uint64_t escalated);

/// How Split samples count as correct in the difficulty table.
enum class SplitScoring {
  /// The final (human majority) decision.
  FinalDecision,
  /// The strict majority of the LLM verdicts; ties and abstentions count as
  /// incorrect.
  LlmMajority,
};

struct DifficultyTables {
  ContingencyTable2x2 unanimous;
  ContingencyTable2x2 split;
};

/// Rows split samples by native-annotator unanimity, columns by correctness.
/// Samples whose decision is Unresolved are skipped under FinalDecision.
/// Throws ValidationError when a decided sample lacks three native votes or a
/// gold label.
DifficultyTables difficulty_contingency(const std::vector<PipelineDecision>& decisions,
                                        const std::vector<Sample>& corpus,
                                        SplitScoring scoring = SplitScoring::FinalDecision);

enum class StdKind { Population, Sample };

struct HistogramBin {
  /// Bounds in hundredths, so [60, 62) is 0.60 to 0.62. The top bin is closed.
  int lo_hundredths = 0;
  int hi_hundredths = 0;
  std::size_t count = 0;
};

struct AnnotatorRecord {
  std::size_t matches = 0;
  std::size_t count = 0;

  Ratio accuracy() const { return {matches, count}; }
};

struct AnnotatorStats {
  std::size_t total_annotators = 0;
  std::size_t total_samples = 0;
  double mean_per_annotator = 0.0;
  double median_per_annotator = 0.0;
  std::size_t threshold = 0;
  std::size_t filtered_count = 0;
  double mean_acc = 0.0;
  double std_acc = 0.0;
  double median_acc = 0.0;
  /// [0.00, 0.60) first, then 0.02-wide bins up to 1.00.
  std::vector<HistogramBin> histogram;
  std::map<std::string, AnnotatorRecord> per_annotator;
};

/// Accuracy of each annotator against the majority of the three votes on each
/// sample they labeled; statistics over annotators with more than
/// `min_samples_exclusive` samples. Throws ValidationError when a sample does
/// not carry exactly three votes or an annotator appears twice on one sample.
AnnotatorStats annotator_stats(const std::vector<Sample>& corpus, std::size_t min_samples_exclusive,
                               StdKind std_kind = StdKind::Population);

/// Agreement of all native votes with the per-sample majority, pooled over
/// annotations. Never below 2/3 for three-vote samples.
Ratio annotation_level_agreement(const std::vector<Sample>& corpus);

}  // namespace c3mod::eval
