#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "c3mod/annotate/annotate.hpp"
#include "c3mod/domain.hpp"
#include "c3mod/jsonl.hpp"
#include "c3mod/moderate/moderate.hpp"
#include "c3mod/providers/registry.hpp"
#include "c3mod/review/review.hpp"

namespace c3mod::pipeline {

enum class SampleState { Ingested, Translated, Annotated, LlmJudged, Escalated, Decided };
std::string_view to_string(SampleState state);

/// True for the transitions a sample may take, Escalated only after a Split.
bool valid_transition(SampleState from, SampleState to);

struct RunConfig {
  int n_moderators = 3;
  /// One name shared by all moderators, or one per moderator.
  std::vector<std::string> moderator_providers{"scripted"};
  std::string moderator_model;
  /// Empty means 0.0 for everyone; otherwise one value or one per moderator.
  std::vector<double> moderator_temperatures;
  std::string annotator_provider = "scripted";
  std::string annotator_model;
  double annotation_temperature = 0.3;
  std::string search_provider = "scripted";
  annotate::RetrievalMode retrieval_mode = annotate::RetrievalMode::Explicit;
  int top_k = 5;
  int required_votes = 3;
  int concurrency = 4;
  /// Directory of prompt templates; empty selects the built-in set.
  std::string prompt_dir;
  bool show_llm_verdicts = false;

  /// Throws ValidationError naming the first bad field.
  void validate() const;
  std::string moderator_provider(int index) const;
  double moderator_temperature(int index) const;
};

json to_json_value(const RunConfig& config);
RunConfig config_from_json(const json& j);

annotate::PromptSet load_prompts(const RunConfig& config);

/// Content hash of the corpus ids, the configuration and the prompt version.
std::string compute_run_id(const std::vector<Sample>& corpus, const RunConfig& config,
                           const std::string& prompt_version);

/// Everything Steps 1 and 2 produced for one sample.
struct SampleRecord {
  Sample sample;  // with translations
  annotate::CulturalAnnotation annotation;
  moderate::ConsensusOutcome outcome;
};

json to_json_value(const SampleRecord& record);
SampleRecord record_from_json(const json& j);

struct Escalated {
  std::string sample_id;
};

using SampleOutcome = std::variant<PipelineDecision, Escalated>;

struct RunSummary {
  std::string run_id;
  std::size_t total = 0;
  std::size_t decided_at_llm = 0;
  std::size_t escalated = 0;
  std::size_t decided_by_humans = 0;
  std::size_t unresolved = 0;
  std::size_t awaiting_humans = 0;
  std::vector<std::pair<std::string, std::string>> errors;

  /// Every sample went through Step 2 without error.
  bool llm_stage_complete() const { return errors.empty() && decided_at_llm + escalated == total; }
  /// Nothing is waiting on reviewers either.
  bool complete() const { return llm_stage_complete() && awaiting_humans == 0; }
};

json to_json_value(const RunSummary& summary);

/// One persisted run. Files under the run directory:
///   manifest.json      config echo (without concurrency), corpus hash, prompt version
///   corpus.jsonl       the input corpus
///   states.jsonl       per-sample state transitions and failures
///   samples.jsonl      SampleRecord per sample that finished Step 2
///   verdicts.jsonl     every LLM verdict
///   review.jsonl       review queue events
///   decisions.jsonl    PipelineDecision log
///   annotations/       annotation cache
/// Log records are committed in corpus order whatever the worker count, so two
/// runs over the same inputs write identical bytes.
class Run {
 public:
  static std::unique_ptr<Run> create(const std::filesystem::path& root, std::vector<Sample> corpus,
                                     RunConfig config, providers::ProviderRegistry& registry,
                                     std::shared_ptr<const Clock> clock);
  /// Reopens a persisted run. Throws Error for an unknown run id.
  static std::unique_ptr<Run> open(const std::filesystem::path& root, const std::string& run_id,
                                   providers::ProviderRegistry& registry,
                                   std::shared_ptr<const Clock> clock);
  /// Reopens without provider access; enough for review and reporting.
  static std::unique_ptr<Run> open_offline(const std::filesystem::path& root,
                                           const std::string& run_id,
                                           std::shared_ptr<const Clock> clock);

  /// Steps 1 and 2 for every unfinished sample, then the summary.
  RunSummary execute();
  /// Step 1 only for every sample without an annotation; returns the count made.
  std::size_t annotate_all();
  /// Steps 1 and 2 for one sample of this run's corpus, committed immediately.
  SampleOutcome process_sample(const Sample& sample);

  RunSummary summary() const;

  const std::string& id() const { return id_; }
  const std::filesystem::path& dir() const { return dir_; }
  const RunConfig& config() const { return config_; }
  const std::vector<Sample>& corpus() const { return corpus_; }
  review::ReviewStore& review() { return *review_; }
  const review::ReviewStore& review() const { return *review_; }
  std::vector<PipelineDecision> decisions() const;
  std::optional<SampleRecord> record(const std::string& sample_id) const;

 private:
  struct Transition {
    SampleState state;
    std::optional<std::string> detail;
  };
  struct Evaluation {
    std::optional<SampleRecord> record;
    std::vector<Transition> transitions;
    std::optional<std::string> error;
  };

  Run(std::filesystem::path dir, std::string id, std::vector<Sample> corpus, RunConfig config,
      std::shared_ptr<const Clock> clock);
  void attach_providers(providers::ProviderRegistry& registry);
  void load_state();
  void reconcile_reviews();
  Evaluation evaluate(const Sample& sample) const;
  void commit(const Sample& sample, Evaluation evaluation);
  void append_decision(PipelineDecision decision);
  void on_task_closed(const review::ReviewTask& task);
  bool finished(const std::string& sample_id) const;

  std::filesystem::path dir_;
  std::string id_;
  std::vector<Sample> corpus_;
  RunConfig config_;
  annotate::PromptSet prompts_;
  std::shared_ptr<const Clock> clock_;

  std::shared_ptr<annotate::Annotator> annotator_;
  std::shared_ptr<moderate::Ensemble> ensemble_;
  std::unique_ptr<review::ReviewStore> review_;

  JsonlAppender states_log_;
  JsonlAppender samples_log_;
  JsonlAppender verdicts_log_;
  JsonlAppender decisions_log_;

  mutable std::mutex mutex_;
  std::map<std::string, SampleRecord> records_;
  std::vector<PipelineDecision> decisions_;
  std::set<std::string> decided_;
  std::map<std::string, std::string> errors_;
};

/// Creates the run for this corpus and configuration (or reopens it when it
/// already exists) and executes it.
RunSummary run_corpus(const std::filesystem::path& root, std::vector<Sample> corpus,
                      const RunConfig& config, providers::ProviderRegistry& registry,
                      std::shared_ptr<const Clock> clock);

RunSummary resume(const std::filesystem::path& root, const std::string& run_id,
                  providers::ProviderRegistry& registry, std::shared_ptr<const Clock> clock);

}  // namespace c3mod::pipeline
