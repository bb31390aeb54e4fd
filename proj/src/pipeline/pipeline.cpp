#include "c3mod/pipeline/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "c3mod/text.hpp"

namespace c3mod::pipeline {

namespace fs = std::filesystem;

std::string_view to_string(SampleState state) {
  switch (state) {
    case SampleState::Ingested:
      return "ingested";
    case SampleState::Translated:
      return "translated";
    case SampleState::Annotated:
      return "annotated";
    case SampleState::LlmJudged:
      return "llm_judged";
    case SampleState::Escalated:
      return "escalated";
    case SampleState::Decided:
      return "decided";
  }
  return "ingested";
}

bool valid_transition(SampleState from, SampleState to) {
  switch (from) {
    case SampleState::Ingested:
      return to == SampleState::Translated;
    case SampleState::Translated:
      return to == SampleState::Annotated;
    case SampleState::Annotated:
      return to == SampleState::LlmJudged;
    case SampleState::LlmJudged:
      return to == SampleState::Escalated || to == SampleState::Decided;
    case SampleState::Escalated:
      return to == SampleState::Decided;
    case SampleState::Decided:
      return false;
  }
  return false;
}

void RunConfig::validate() const {
  if (n_moderators < 2) throw ValidationError("n_moderators must be at least 2");
  const auto fits = [&](std::size_t size) {
    return size == 1 || size == static_cast<std::size_t>(n_moderators);
  };
  if (!fits(moderator_providers.size())) {
    throw ValidationError("moderator_providers must name one provider or one per moderator");
  }
  if (!moderator_temperatures.empty() && !fits(moderator_temperatures.size())) {
    throw ValidationError("moderator_temperatures must hold one value or one per moderator");
  }
  for (const auto& name : moderator_providers) {
    if (!providers::ProviderRegistry::is_known_chat(name)) {
      throw ValidationError("unknown chat provider '" + name + "'");
    }
  }
  if (!providers::ProviderRegistry::is_known_chat(annotator_provider)) {
    throw ValidationError("unknown chat provider '" + annotator_provider + "'");
  }
  if (retrieval_mode == annotate::RetrievalMode::Explicit &&
      !providers::ProviderRegistry::is_known_search(search_provider)) {
    throw ValidationError("unknown search provider '" + search_provider + "'");
  }
  if (top_k < 1 || top_k > 10) throw ValidationError("top_k must lie in [1, 10]");
  if (required_votes < 1) throw ValidationError("required_votes must be positive");
  if (concurrency < 1) throw ValidationError("concurrency must be positive");
}

std::string RunConfig::moderator_provider(int index) const {
  return moderator_providers.size() == 1 ? moderator_providers.front()
                                         : moderator_providers.at(static_cast<std::size_t>(index));
}

double RunConfig::moderator_temperature(int index) const {
  if (moderator_temperatures.empty()) return 0.0;
  return moderator_temperatures.size() == 1
             ? moderator_temperatures.front()
             : moderator_temperatures.at(static_cast<std::size_t>(index));
}

json to_json_value(const RunConfig& c) {
  return json{{"n_moderators", c.n_moderators},
              {"moderator_providers", c.moderator_providers},
              {"moderator_model", c.moderator_model},
              {"moderator_temperatures", c.moderator_temperatures},
              {"annotator_provider", c.annotator_provider},
              {"annotator_model", c.annotator_model},
              {"annotation_temperature", c.annotation_temperature},
              {"search_provider", c.search_provider},
              {"retrieval_mode", annotate::to_string(c.retrieval_mode)},
              {"top_k", c.top_k},
              {"required_votes", c.required_votes},
              {"concurrency", c.concurrency},
              {"prompt_dir", c.prompt_dir},
              {"show_llm_verdicts", c.show_llm_verdicts}};
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  c.n_moderators = j.at("n_moderators").get<int>();
  c.moderator_providers = j.at("moderator_providers").get<std::vector<std::string>>();
  c.moderator_model = j.value("moderator_model", std::string{});
  c.moderator_temperatures = j.value("moderator_temperatures", std::vector<double>{});
  c.annotator_provider = j.at("annotator_provider").get<std::string>();
  c.annotator_model = j.value("annotator_model", std::string{});
  c.annotation_temperature = j.value("annotation_temperature", 0.3);
  c.search_provider = j.value("search_provider", std::string("scripted"));
  c.retrieval_mode = annotate::retrieval_mode_from_string(j.at("retrieval_mode").get<std::string>());
  c.top_k = j.value("top_k", 5);
  c.required_votes = j.value("required_votes", 3);
  c.concurrency = j.value("concurrency", 4);
  c.prompt_dir = j.value("prompt_dir", std::string{});
  c.show_llm_verdicts = j.value("show_llm_verdicts", false);
  return c;
}

annotate::PromptSet load_prompts(const RunConfig& config) {
  return config.prompt_dir.empty() ? annotate::PromptSet::v1()
                                   : annotate::PromptSet::load(config.prompt_dir);
}

std::string compute_run_id(const std::vector<Sample>& corpus, const RunConfig& config,
                           const std::string& prompt_version) {
  json ids = json::array();
  for (const auto& s : corpus) ids.push_back(s.id);
  auto identity = to_json_value(config);
  // Worker count changes nothing about the results.
  identity.erase("concurrency");
  const json material{{"ids", ids}, {"config", identity}, {"prompt_version", prompt_version}};
  return text::sha256_hex(material.dump()).substr(0, 16);
}

json to_json_value(const SampleRecord& r) {
  return json{{"sample", r.sample}, {"annotation", r.annotation}, {"outcome", r.outcome}};
}

SampleRecord record_from_json(const json& j) {
  return {j.at("sample").get<Sample>(), j.at("annotation").get<annotate::CulturalAnnotation>(),
          j.at("outcome").get<moderate::ConsensusOutcome>()};
}

json to_json_value(const RunSummary& s) {
  json errors = json::array();
  for (const auto& [id, message] : s.errors) errors.push_back({{"sample_id", id}, {"error", message}});
  return json{{"run_id", s.run_id},
              {"total", s.total},
              {"decided_at_llm", s.decided_at_llm},
              {"escalated", s.escalated},
              {"decided_by_humans", s.decided_by_humans},
              {"unresolved", s.unresolved},
              {"awaiting_humans", s.awaiting_humans},
              {"complete", s.complete()},
              {"errors", errors}};
}

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& doc) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump(2, ' ', false, json::error_handler_t::replace) << '\n';
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string corpus_hash(const std::vector<Sample>& corpus) {
  std::string material;
  for (const auto& s : corpus) material += dump_line(json(s)) + '\n';
  return text::sha256_hex(material);
}

}  // namespace

Run::Run(fs::path dir, std::string id, std::vector<Sample> corpus, RunConfig config,
         std::shared_ptr<const Clock> clock)
    : dir_(std::move(dir)),
      id_(std::move(id)),
      corpus_(std::move(corpus)),
      config_(std::move(config)),
      prompts_(load_prompts(config_)),
      clock_(std::move(clock)),
      states_log_(dir_ / "states.jsonl"),
      samples_log_(dir_ / "samples.jsonl"),
      verdicts_log_(dir_ / "verdicts.jsonl"),
      decisions_log_(dir_ / "decisions.jsonl") {
  if (!clock_) throw ValidationError("run requires a clock");
  review_ = std::make_unique<review::ReviewStore>(dir_ / "review.jsonl", clock_,
                                                  config_.required_votes);
  load_state();
  review_->on_close([this](const review::ReviewTask& task) { on_task_closed(task); });
  reconcile_reviews();
}

std::unique_ptr<Run> Run::create(const fs::path& root, std::vector<Sample> corpus, RunConfig config,
                                 providers::ProviderRegistry& registry,
                                 std::shared_ptr<const Clock> clock) {
  if (corpus.empty()) throw ValidationError("corpus is empty");
  validate_corpus(corpus);
  config.validate();
  const auto prompts = load_prompts(config);
  const auto id = compute_run_id(corpus, config, prompts.version());
  const auto dir = root / id;
  if (fs::exists(dir / "manifest.json")) return open(root, id, registry, std::move(clock));

  fs::create_directories(dir);
  {
    std::ofstream out(dir / "corpus.jsonl", std::ios::binary | std::ios::trunc);
    for (const auto& s : corpus) out << dump_line(json(s)) << '\n';
    if (!out) throw Error("cannot write corpus for run " + id);
  }
  auto config_echo = to_json_value(config);
  config_echo.erase("concurrency");
  write_json_file(dir / "manifest.json",
                  json{{"schema", "c3mod-run/1"},
                       {"run_id", id},
                       {"config", config_echo},
                       {"prompt_version", prompts.version()},
                       {"corpus_size", corpus.size()},
                       {"corpus_hash", corpus_hash(corpus)}});
  std::unique_ptr<Run> run(new Run(dir, id, std::move(corpus), std::move(config), std::move(clock)));
  run->attach_providers(registry);
  return run;
}

std::unique_ptr<Run> Run::open_offline(const fs::path& root, const std::string& run_id,
                                       std::shared_ptr<const Clock> clock) {
  const auto dir = root / run_id;
  if (!fs::exists(dir / "manifest.json")) throw Error("unknown run id '" + run_id + "'");
  const auto manifest = read_json_file(dir / "manifest.json");
  auto config = config_from_json(manifest.at("config"));
  std::vector<Sample> corpus;
  read_jsonl(dir / "corpus.jsonl",
             [&](const json& j, std::size_t) { corpus.push_back(j.get<Sample>()); });
  if (corpus_hash(corpus) != manifest.at("corpus_hash").get<std::string>()) {
    throw Error("run '" + run_id + "': corpus does not match its manifest");
  }
  const auto version = load_prompts(config).version();
  if (version != manifest.at("prompt_version").get<std::string>()) {
    throw Error("run '" + run_id + "' was made with prompts " +
                manifest.at("prompt_version").get<std::string>() + ", current prompts are " + version);
  }
  return std::unique_ptr<Run>(new Run(dir, run_id, std::move(corpus), std::move(config),
                                      std::move(clock)));
}

std::unique_ptr<Run> Run::open(const fs::path& root, const std::string& run_id,
                               providers::ProviderRegistry& registry,
                               std::shared_ptr<const Clock> clock) {
  auto run = open_offline(root, run_id, std::move(clock));
  run->attach_providers(registry);
  return run;
}

void Run::attach_providers(providers::ProviderRegistry& registry) {
  annotate::AnnotatorOptions options;
  options.mode = config_.retrieval_mode;
  options.top_k = config_.top_k;
  options.temperature = config_.annotation_temperature;
  options.model_id = config_.annotator_model;
  providers::SearchHandle search;
  if (config_.retrieval_mode == annotate::RetrievalMode::Explicit) {
    search = registry.search(config_.search_provider);
  }
  annotator_ = std::make_shared<annotate::Annotator>(
      prompts_, registry.chat(config_.annotator_provider), search, options,
      std::make_shared<annotate::FileAnnotationCache>(dir_ / "annotations"));

  std::vector<moderate::ModeratorSpec> moderators;
  for (int i = 0; i < config_.n_moderators; ++i) {
    moderators.push_back({"m" + std::to_string(i + 1), registry.chat(config_.moderator_provider(i)),
                          config_.moderator_model, config_.moderator_temperature(i)});
  }
  ensemble_ = std::make_shared<moderate::Ensemble>(prompts_, std::move(moderators), clock_);
}

void Run::load_state() {
  read_jsonl(dir_ / "samples.jsonl", [&](const json& j, std::size_t) {
    auto record = record_from_json(j);
    const auto id = record.sample.id;
    records_.insert_or_assign(id, std::move(record));
  });
  read_jsonl(dir_ / "decisions.jsonl", [&](const json& j, std::size_t line) {
    auto decision = j.get<PipelineDecision>();
    if (!decided_.insert(decision.sample_id).second) {
      throw ParseError("decisions.jsonl:" + std::to_string(line) + ": second decision for '" +
                       decision.sample_id + "'");
    }
    decisions_.push_back(std::move(decision));
  });
}

void Run::reconcile_reviews() {
  for (const auto& task : review_->tasks()) {
    if (review::is_closed(task.state)) on_task_closed(task);
  }
}

bool Run::finished(const std::string& sample_id) const {
  std::lock_guard lock(mutex_);
  return records_.contains(sample_id);
}

Run::Evaluation Run::evaluate(const Sample& sample) const {
  Evaluation evaluation;
  try {
    validate_sample(sample);
    auto translated = annotator_->translate(sample);
    evaluation.transitions.push_back({SampleState::Translated, std::nullopt});
    auto annotation = annotator_->annotate(translated);
    evaluation.transitions.push_back(
        {SampleState::Annotated, std::to_string(annotation.entries.size()) + " entries"});
    auto outcome = ensemble_->run(translated, annotation);
    evaluation.transitions.push_back(
        {SampleState::LlmJudged, std::string(moderate::to_string(outcome.kind))});
    evaluation.record = SampleRecord{std::move(translated), std::move(annotation), std::move(outcome)};
  } catch (const std::exception& e) {
    spdlog::error("sample {}: {}", sample.id, e.what());
    evaluation.error = e.what();
  }
  return evaluation;
}

void Run::append_decision(PipelineDecision decision) {
  validate_decision(decision);
  {
    std::lock_guard lock(mutex_);
    if (!decided_.insert(decision.sample_id).second) return;
    decisions_.push_back(decision);
  }
  decisions_log_.append(json(decision));
}

void Run::commit(const Sample& sample, Evaluation evaluation) {
  const auto now = clock_->now();
  const auto log_state = [&](std::string_view state, const std::optional<std::string>& detail) {
    json entry{{"sample_id", sample.id}, {"state", state}, {"ts", to_epoch_ms(now)}};
    if (detail) entry["detail"] = *detail;
    states_log_.append(entry);
  };
  for (const auto& t : evaluation.transitions) log_state(to_string(t.state), t.detail);

  if (evaluation.record) {
    auto& record = *evaluation.record;
    try {
      if (record.outcome.kind == moderate::OutcomeKind::Unanimous) {
        append_decision(PipelineDecision{sample.id, DecisionStage::LlmConsensus,
                                         record.outcome.label, record.outcome.verdicts, {}, now});
      } else {
        review_->enqueue(record.sample, record.annotation, record.outcome);
      }
    } catch (const std::exception& e) {
      evaluation.error = e.what();
    }
  }
  if (evaluation.error) {
    log_state("failed", evaluation.error);
    std::lock_guard lock(mutex_);
    errors_[sample.id] = *evaluation.error;
    return;
  }

  auto& record = *evaluation.record;
  for (const auto& v : record.outcome.verdicts) {
    json entry{{"sample_id", sample.id}, {"verdict", v}};
    if (v.abstained) entry["abstained"] = true;
    verdicts_log_.append(entry);
  }
  samples_log_.append(to_json_value(record));
  const bool unanimous = record.outcome.kind == moderate::OutcomeKind::Unanimous;
  log_state(unanimous ? "decided" : "escalated", std::nullopt);
  std::lock_guard lock(mutex_);
  errors_.erase(sample.id);
  records_.insert_or_assign(sample.id, std::move(record));
}

void Run::on_task_closed(const review::ReviewTask& task) {
  PipelineDecision decision;
  decision.sample_id = task.sample_id;
  decision.stage = task.state == review::TaskState::Finalized ? DecisionStage::HumanMajority
                                                              : DecisionStage::Unresolved;
  decision.final_label = task.final_label;
  decision.llm_verdicts = task.llm_verdicts;
  decision.human_verdicts = task.votes;
  decision.decided_at = task.votes.empty() ? clock_->now() : task.votes.back().issued_at;
  append_decision(std::move(decision));
}

RunSummary Run::execute() {
  if (!annotator_ || !ensemble_) throw Error("run '" + id_ + "' was opened without providers");
  std::vector<const Sample*> pending;
  for (const auto& s : corpus_) {
    if (!finished(s.id)) pending.push_back(&s);
  }
  spdlog::info("run {}: {} of {} samples to process", id_, pending.size(), corpus_.size());

  std::vector<std::optional<Evaluation>> results(pending.size());
  std::size_t next_commit = 0;
  std::mutex commit_mutex;
  std::atomic<std::size_t> next_index{0};
  const auto worker = [&] {
    for (auto i = next_index++; i < pending.size(); i = next_index++) {
      auto evaluation = evaluate(*pending[i]);
      std::lock_guard lock(commit_mutex);
      results[i] = std::move(evaluation);
      while (next_commit < results.size() && results[next_commit]) {
        commit(*pending[next_commit], std::move(*results[next_commit]));
        results[next_commit].reset();
        ++next_commit;
      }
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config_.concurrency),
                                             pending.size());
  std::vector<std::jthread> threads;
  for (std::size_t i = 1; i < workers; ++i) threads.emplace_back(worker);
  if (workers > 0) worker();
  threads.clear();
  return summary();
}

std::size_t Run::annotate_all() {
  if (!annotator_) throw Error("run '" + id_ + "' was opened without providers");
  std::size_t made = 0;
  for (const auto& s : corpus_) {
    if (finished(s.id)) continue;
    try {
      annotator_->annotate(annotator_->translate(s));
      ++made;
    } catch (const std::exception& e) {
      spdlog::error("sample {}: {}", s.id, e.what());
      std::lock_guard lock(mutex_);
      errors_[s.id] = e.what();
    }
  }
  return made;
}

SampleOutcome Run::process_sample(const Sample& sample) {
  if (!annotator_ || !ensemble_) throw Error("run '" + id_ + "' was opened without providers");
  const auto in_corpus = std::any_of(corpus_.begin(), corpus_.end(),
                                     [&](const Sample& s) { return s.id == sample.id; });
  if (!in_corpus) throw ValidationError("sample '" + sample.id + "' is not part of run " + id_);
  if (!finished(sample.id)) commit(sample, evaluate(sample));
  std::lock_guard lock(mutex_);
  if (const auto it = errors_.find(sample.id); it != errors_.end()) throw Error(it->second);
  for (const auto& d : decisions_) {
    if (d.sample_id == sample.id) return d;
  }
  return Escalated{sample.id};
}

RunSummary Run::summary() const {
  std::lock_guard lock(mutex_);
  RunSummary s;
  s.run_id = id_;
  s.total = corpus_.size();
  for (const auto& [id, record] : records_) {
    if (record.outcome.kind == moderate::OutcomeKind::Unanimous) {
      ++s.decided_at_llm;
    } else {
      ++s.escalated;
    }
  }
  for (const auto& d : decisions_) {
    if (d.stage == DecisionStage::HumanMajority) ++s.decided_by_humans;
    if (d.stage == DecisionStage::Unresolved) ++s.unresolved;
  }
  s.awaiting_humans = s.escalated - s.decided_by_humans - s.unresolved;
  for (const auto& sample : corpus_) {
    if (const auto it = errors_.find(sample.id); it != errors_.end()) {
      s.errors.emplace_back(sample.id, it->second);
    }
  }
  return s;
}

std::vector<PipelineDecision> Run::decisions() const {
  std::lock_guard lock(mutex_);
  return decisions_;
}

std::optional<SampleRecord> Run::record(const std::string& sample_id) const {
  std::lock_guard lock(mutex_);
  const auto it = records_.find(sample_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

RunSummary run_corpus(const fs::path& root, std::vector<Sample> corpus, const RunConfig& config,
                      providers::ProviderRegistry& registry, std::shared_ptr<const Clock> clock) {
  return Run::create(root, std::move(corpus), config, registry, std::move(clock))->execute();
}

RunSummary resume(const fs::path& root, const std::string& run_id,
                  providers::ProviderRegistry& registry, std::shared_ptr<const Clock> clock) {
  return Run::open(root, run_id, registry, std::move(clock))->execute();
}

}  // namespace c3mod::pipeline
