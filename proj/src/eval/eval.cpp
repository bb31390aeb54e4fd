#include "c3mod/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace c3mod::eval {
namespace {

void add(Ratio& r, bool correct) {
  ++r.den;
  r.num += correct ? 1 : 0;
}

double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const auto mid = xs.size() / 2;
  return xs.size() % 2 ? xs[mid] : (xs[mid - 1] + xs[mid]) / 2.0;
}

const Label& gold_for(const std::map<std::string, Label>& gold, const std::string& sample_id) {
  const auto it = gold.find(sample_id);
  if (it == gold.end()) throw ValidationError("no gold label for sample '" + sample_id + "'");
  return it->second;
}

void require_three_votes(const Sample& s) {
  if (s.native_votes.size() != 3) {
    throw ValidationError("sample '" + s.id + "' carries " + std::to_string(s.native_votes.size()) +
                          " native votes, expected 3");
  }
}

std::optional<Label> llm_majority(const PipelineDecision& d) {
  std::vector<Vote> votes;
  for (const auto& v : d.llm_verdicts) {
    if (!v.abstained) votes.push_back(v.vote);
  }
  return strict_majority(votes);
}

}  // namespace

std::map<std::string, Label> gold_labels(const std::vector<Sample>& corpus) {
  std::map<std::string, Label> out;
  for (const auto& s : corpus) {
    if (s.gold_label) out.emplace(s.id, *s.gold_label);
  }
  return out;
}

std::map<std::string, CulturalCategory> categories(const std::vector<Sample>& corpus) {
  std::map<std::string, CulturalCategory> out;
  for (const auto& s : corpus) {
    if (s.category) out.emplace(s.id, *s.category);
  }
  return out;
}

AccuracyReport accuracy(const std::vector<PipelineDecision>& decisions,
                        const std::map<std::string, Label>& gold,
                        const std::map<std::string, CulturalCategory>& cats) {
  AccuracyReport report;
  Ratio baseline;
  std::set<std::string> seen;
  for (const auto& d : decisions) {
    if (!seen.insert(d.sample_id).second) {
      throw ValidationError("sample '" + d.sample_id + "' has more than one decision");
    }
    if (d.stage == DecisionStage::Unresolved || !d.final_label) {
      report.unresolved.push_back(d.sample_id);
      continue;
    }
    const auto truth = gold_for(gold, d.sample_id);
    const bool correct = *d.final_label == truth;
    add(report.overall, correct);
    add(report.by_stage[d.stage], correct);
    if (const auto c = cats.find(d.sample_id); c != cats.end()) {
      add(report.by_category[c->second], correct);
      add(report.by_category_stage[c->second][d.stage], correct);
    }
    if (!d.llm_verdicts.empty()) add(baseline, llm_majority(d) == truth);
  }
  if (baseline.den > 0 && baseline.den == report.overall.den) report.llm_only_baseline = baseline;
  return report;
}

Ratio workload_ratio(std::uint64_t total, std::uint64_t escalated) {
  if (total == 0) throw ValidationError("workload reduction over zero samples");
  if (escalated > total) throw ValidationError("more samples escalated than processed");
  return {total - escalated, total};
}

double workload_reduction(std::uint64_t total, std::uint64_t escalated) {
  return workload_ratio(total, escalated).value();
}

DifficultyTables difficulty_contingency(const std::vector<PipelineDecision>& decisions,
                                        const std::vector<Sample>& corpus, SplitScoring scoring) {
  std::map<std::string, const Sample*> by_id;
  for (const auto& s : corpus) by_id.emplace(s.id, &s);
  DifficultyTables tables;
  for (const auto& d : decisions) {
    const auto it = by_id.find(d.sample_id);
    if (it == by_id.end()) throw ValidationError("decision for unknown sample '" + d.sample_id + "'");
    const auto& sample = *it->second;
    require_three_votes(sample);
    if (!sample.gold_label) throw ValidationError("no gold label for sample '" + sample.id + "'");

    std::optional<Label> judged;
    ContingencyTable2x2* table = nullptr;
    if (d.stage == DecisionStage::LlmConsensus) {
      table = &tables.unanimous;
      judged = d.final_label;
    } else {
      table = &tables.split;
      if (scoring == SplitScoring::LlmMajority) {
        judged = llm_majority(d);
      } else if (d.stage == DecisionStage::HumanMajority) {
        judged = d.final_label;
      } else {
        continue;
      }
    }
    const bool correct = judged == sample.gold_label;
    if (natives_unanimous(sample)) {
      ++(correct ? table->a : table->b);
    } else {
      ++(correct ? table->c : table->d);
    }
  }
  return tables;
}

AnnotatorStats annotator_stats(const std::vector<Sample>& corpus, std::size_t min_samples_exclusive,
                               StdKind std_kind) {
  AnnotatorStats stats;
  stats.total_samples = corpus.size();
  stats.threshold = min_samples_exclusive;
  for (const auto& s : corpus) {
    require_three_votes(s);
    std::set<std::string> ids;
    for (const auto& v : s.native_votes) {
      if (!ids.insert(v.annotator_id).second) {
        throw ValidationError("annotator '" + v.annotator_id + "' votes twice on sample '" + s.id + "'");
      }
    }
    const auto majority = *native_majority(s);
    for (const auto& v : s.native_votes) {
      auto& record = stats.per_annotator[v.annotator_id];
      ++record.count;
      record.matches += v.label == majority ? 1 : 0;
    }
  }
  stats.total_annotators = stats.per_annotator.size();

  std::vector<double> counts;
  std::vector<double> accuracies;
  std::vector<Ratio> kept;
  for (const auto& [id, record] : stats.per_annotator) {
    counts.push_back(static_cast<double>(record.count));
    if (record.count > min_samples_exclusive) {
      accuracies.push_back(record.accuracy().value());
      kept.push_back(record.accuracy());
    }
  }
  if (!counts.empty()) {
    stats.mean_per_annotator =
        std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(counts.size());
    stats.median_per_annotator = median(counts);
  }
  stats.filtered_count = accuracies.size();
  if (!accuracies.empty()) {
    const auto n = static_cast<double>(accuracies.size());
    stats.mean_acc = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : accuracies) ss += (x - stats.mean_acc) * (x - stats.mean_acc);
    const double divisor = std_kind == StdKind::Population ? n : n - 1.0;
    stats.std_acc = divisor > 0 ? std::sqrt(ss / divisor) : 0.0;
    stats.median_acc = median(accuracies);
  }

  stats.histogram.push_back({0, 60, 0});
  for (int lo = 60; lo < 100; lo += 2) stats.histogram.push_back({lo, lo + 2, 0});
  for (const auto& r : kept) {
    // Bin k covers [0.60 + 0.02k, 0.62 + 0.02k): k = floor((50 num - 30 den) / den).
    if (50 * r.num < 30 * r.den) {
      ++stats.histogram.front().count;
      continue;
    }
    const auto k = std::min<std::uint64_t>((50 * r.num - 30 * r.den) / r.den, 19);
    ++stats.histogram[1 + k].count;
  }
  return stats;
}

Ratio annotation_level_agreement(const std::vector<Sample>& corpus) {
  Ratio r;
  for (const auto& s : corpus) {
    require_three_votes(s);
    const auto majority = *native_majority(s);
    for (const auto& v : s.native_votes) add(r, v.label == majority);
  }
  return r;
}

}  // namespace c3mod::eval
