#include "c3mod/interface/replay.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <set>

#include "c3mod/interface/corpus.hpp"

namespace c3mod::interface {

namespace fs = std::filesystem;

std::size_t apply_votes(pipeline::Run& run, const fs::path& votes_file) {
  struct Row {
    review::VoteSubmission submission;
  };
  std::vector<Row> rows;
  read_jsonl(votes_file, [&](const json& j, std::size_t line) {
    try {
      review::VoteSubmission s;
      s.sample_id = j.at("sample_id").get<std::string>();
      s.reviewer_id = j.at("reviewer_id").get<std::string>();
      s.vote = vote_from_string(j.at("vote").get<std::string>());
      s.spans = j.value("spans", std::vector<std::string>{});
      if (j.contains("note")) s.note = j.at("note").get<std::string>();
      rows.push_back({std::move(s)});
    } catch (const std::exception& e) {
      throw ParseError(votes_file.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });

  auto& store = run.review();
  std::set<std::string> reviewers;
  std::map<std::string, std::size_t> pool;
  for (const auto& r : rows) {
    if (reviewers.insert(r.submission.reviewer_id).second && !store.is_registered(r.submission.reviewer_id)) {
      store.register_reviewer({r.submission.reviewer_id, r.submission.reviewer_id, true});
    }
    ++pool[r.submission.sample_id];
  }

  std::size_t applied = 0;
  for (const auto& r : rows) {
    const auto task = store.get(r.submission.sample_id);
    if (!task) throw ValidationError("vote for '" + r.submission.sample_id + "', which was not escalated");
    if (review::is_closed(task->state) || task->has_voted(r.submission.reviewer_id)) continue;
    store.submit_vote(r.submission);
    ++applied;
  }
  for (const auto& task : store.tasks()) {
    if (review::is_closed(task.state)) continue;
    const auto it = pool.find(task.sample_id);
    if (it != pool.end() && task.votes.size() >= it->second) {
      store.finalize_exhausted(task.sample_id, it->second);
    }
  }
  return applied;
}

eval::ReportInputs evaluate_run(const pipeline::Run& run, const std::vector<Sample>& gold) {
  const auto summary = run.summary();
  eval::ReportInputs inputs;
  inputs.routing = eval::RoutingCounts{summary.total,         summary.decided_at_llm,
                                       summary.escalated,     summary.decided_by_humans,
                                       summary.unresolved,    summary.awaiting_humans};
  const auto decisions = run.decisions();
  inputs.accuracy = eval::accuracy(decisions, eval::gold_labels(gold), eval::categories(gold));

  const bool all_voted = std::all_of(gold.begin(), gold.end(),
                                     [](const Sample& s) { return s.native_votes.size() == 3; });
  if (all_voted) {
    inputs.difficulty = eval::difficulty_contingency(decisions, gold);
    inputs.difficulty_llm_majority =
        eval::difficulty_contingency(decisions, gold, eval::SplitScoring::LlmMajority);
  }
  return inputs;
}

ReplayResult replay(const ReplayOptions& options) {
  const auto corpus_path = options.fixture_dir / "corpus.jsonl";
  const auto provider_path = options.fixture_dir / "provider.jsonl";
  for (const auto& p : {corpus_path, provider_path}) {
    if (!fs::exists(p)) throw Error("replay fixture is missing " + p.string());
  }
  auto corpus = load_corpus(corpus_path);

  providers::ProviderOptions provider_options;
  provider_options.fixture = provider_path;
  providers::ProviderRegistry registry(provider_options);

  pipeline::RunConfig config;
  config.concurrency = options.concurrency;
  const auto clock = std::make_shared<FixedClock>(options.clock_at);

  fs::create_directories(options.out_dir);
  auto run = pipeline::Run::create(options.out_dir / "runs", corpus, config, registry, clock);
  run->execute();

  ReplayResult result;
  result.run_dir = run->dir();
  if (const auto votes = options.fixture_dir / "votes.jsonl"; fs::exists(votes)) {
    result.votes_applied = apply_votes(*run, votes);
  }
  result.summary = run->summary();

  auto inputs = evaluate_run(*run, corpus);
  if (const auto annotators = options.fixture_dir / "annotators.jsonl"; fs::exists(annotators)) {
    inputs.annotators =
        eval::annotator_stats(load_corpus(annotators), options.annotator_threshold, options.std_kind);
  }
  result.report = eval::render_report(inputs);

  std::ofstream(options.out_dir / "report.md", std::ios::binary | std::ios::trunc)
      << result.report.markdown;
  std::ofstream(options.out_dir / "report.json", std::ios::binary | std::ios::trunc)
      << result.report.document.dump(2) << '\n';
  return result;
}

}  // namespace c3mod::interface
