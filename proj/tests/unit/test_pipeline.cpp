#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "c3mod/interface/corpus.hpp"
#include "c3mod/pipeline/pipeline.hpp"
#include "properties.hpp"
#include "test_support.hpp"

using namespace c3mod;
using namespace c3mod::pipeline;
using c3mod::testing::TempDir;

namespace {

const auto kFixture = testing::fixture_dir() / "replay171";

std::vector<Sample> head(std::size_t n) {
  auto corpus = interface::load_corpus(kFixture / "corpus.jsonl");
  corpus.resize(n);
  return corpus;
}

providers::ProviderOptions scripted_options() {
  providers::ProviderOptions options;
  options.fixture = kFixture / "provider.jsonl";
  return options;
}

std::shared_ptr<FixedClock> clock0() { return std::make_shared<FixedClock>(from_epoch_ms(1704067200000)); }

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

}  // namespace

TEST_CASE("sample state machine") {
  using S = SampleState;
  CHECK(valid_transition(S::Ingested, S::Translated));
  CHECK(valid_transition(S::Translated, S::Annotated));
  CHECK(valid_transition(S::Annotated, S::LlmJudged));
  CHECK(valid_transition(S::LlmJudged, S::Decided));
  CHECK(valid_transition(S::LlmJudged, S::Escalated));
  CHECK(valid_transition(S::Escalated, S::Decided));
  CHECK_FALSE(valid_transition(S::Annotated, S::Escalated));
  CHECK_FALSE(valid_transition(S::Decided, S::Escalated));
  CHECK_FALSE(valid_transition(S::Escalated, S::LlmJudged));
  CHECK_FALSE(valid_transition(S::Ingested, S::Decided));
  CHECK(to_string(S::LlmJudged) != to_string(S::Decided));
}

TEST_CASE("run configuration validation and JSON") {
  RunConfig config;
  CHECK_NOTHROW(config.validate());
  CHECK(config.moderator_provider(2) == "scripted");
  CHECK(config.moderator_temperature(1) == 0.0);

  auto bad = config;
  bad.n_moderators = 1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = config;
  bad.moderator_providers = {"scripted", "scripted"};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = config;
  bad.moderator_providers = {"nonesuch"};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = config;
  bad.top_k = 11;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = config;
  bad.concurrency = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = config;
  bad.search_provider = "nonesuch";
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad.retrieval_mode = annotate::RetrievalMode::ProviderNative;
  CHECK_NOTHROW(bad.validate());

  config.moderator_temperatures = {0.0, 0.5, 1.0};
  config.moderator_providers = {"scripted", "gpt-4o-like", "claude-like"};
  config.top_k = 3;
  config.show_llm_verdicts = true;
  CHECK(config.moderator_temperature(2) == 1.0);
  CHECK(config.moderator_provider(1) == "gpt-4o-like");
  const auto back = config_from_json(to_json_value(config));
  CHECK(to_json_value(back) == to_json_value(config));
}

TEST_CASE("run ids depend on corpus, configuration and prompts but not worker count") {
  const auto corpus = head(5);
  RunConfig config;
  const auto id = compute_run_id(corpus, config, "v1");
  CHECK(id.size() == 16);
  CHECK(compute_run_id(corpus, config, "v1") == id);
  auto wider = config;
  wider.concurrency = 32;
  CHECK(compute_run_id(corpus, wider, "v1") == id);
  auto other = config;
  other.top_k = 4;
  CHECK(compute_run_id(corpus, other, "v1") != id);
  CHECK(compute_run_id(corpus, config, "v2") != id);
  CHECK(compute_run_id(head(4), config, "v1") != id);
}

TEST_CASE("a scripted run conserves samples across routes") {
  TempDir dir;
  providers::ProviderRegistry registry(scripted_options());
  auto run = Run::create(dir.path(), head(30), RunConfig{}, registry, clock0());
  const auto summary = run->execute();
  CHECK(summary.total == 30);
  CHECK(summary.errors.empty());
  CHECK(summary.llm_stage_complete());
  CHECK(summary.decided_at_llm + summary.escalated == summary.total);
  CHECK(summary.escalated > 0);
  CHECK(summary.awaiting_humans == summary.escalated);
  CHECK_FALSE(summary.complete());
  CHECK(run->decisions().size() == summary.decided_at_llm);
  CHECK(run->review().tasks().size() == summary.escalated);
  for (const auto& d : run->decisions()) CHECK(d.stage == DecisionStage::LlmConsensus);

  CHECK(count_lines(run->dir() / "samples.jsonl") == 30);
  CHECK(count_lines(run->dir() / "verdicts.jsonl") == 90);
  CHECK(count_lines(run->dir() / "decisions.jsonl") == summary.decided_at_llm);
  CHECK(std::filesystem::exists(run->dir() / "manifest.json"));

  const auto record = run->record("s001");
  REQUIRE(record);
  CHECK(record->sample.comment_translated);
  CHECK(record->outcome.verdicts.size() == 3);
  CHECK(record_from_json(to_json_value(*record)).outcome.kind == record->outcome.kind);
}

TEST_CASE("resume replays from disk without calling providers") {
  TempDir dir;
  std::string id;
  RunSummary first;
  {
    providers::ProviderRegistry registry(scripted_options());
    auto run = Run::create(dir.path(), head(12), RunConfig{}, registry, clock0());
    id = run->id();
    first = run->execute();
    CHECK(registry.scripted()->chat_calls() > 0);
  }
  providers::ProviderRegistry fresh(scripted_options());
  const auto again = resume(dir.path(), id, fresh, clock0());
  CHECK(fresh.scripted()->chat_calls() == 0);
  CHECK(fresh.scripted()->search_calls() == 0);
  CHECK(to_json_value(again) == to_json_value(first));

  // Creating over the same directory reopens the persisted run.
  auto reopened = Run::create(dir.path(), head(12), RunConfig{}, fresh, clock0());
  CHECK(reopened->id() == id);
  CHECK(reopened->execute().decided_at_llm == first.decided_at_llm);
  CHECK(fresh.scripted()->chat_calls() == 0);

  CHECK_THROWS_AS(Run::open_offline(dir.path(), "0000000000000000", clock0()), Error);
  auto offline = Run::open_offline(dir.path(), id, clock0());
  CHECK(offline->summary().decided_at_llm == first.decided_at_llm);
  CHECK_THROWS_AS(offline->execute(), Error);
}

TEST_CASE("failed samples are reported and retried on resume") {
  TempDir dir;
  auto corpus = head(3);
  auto stray = testing::make_sample("zz-unscripted");
  stray.gold_label = Label::Offensive;
  corpus.push_back(stray);
  providers::ProviderRegistry registry(scripted_options());
  auto run = Run::create(dir.path(), corpus, RunConfig{}, registry, clock0());
  const auto summary = run->execute();
  REQUIRE(summary.errors.size() == 1);
  CHECK(summary.errors[0].first == "zz-unscripted");
  CHECK_FALSE(summary.llm_stage_complete());
  CHECK(summary.decided_at_llm + summary.escalated == 3);

  const auto before = registry.scripted()->chat_calls();
  run->execute();
  CHECK(registry.scripted()->chat_calls() == before + 1);
  CHECK_THROWS_AS(run->process_sample(stray), Error);
  CHECK_THROWS_AS(run->process_sample(testing::make_sample("not-in-run")), ValidationError);
}

TEST_CASE("closing a review task records a human decision") {
  TempDir dir;
  providers::ProviderRegistry registry(scripted_options());
  auto run = Run::create(dir.path(), head(30), RunConfig{}, registry, clock0());
  run->execute();
  const auto tasks = run->review().tasks();
  REQUIRE(tasks.size() >= 2);

  auto& store = run->review();
  for (const auto* r : {"r1", "r2", "r3"}) store.register_reviewer({r, r, true});
  const auto decided = tasks[0].sample_id;
  for (const auto* r : {"r1", "r2", "r3"}) {
    review::VoteSubmission s;
    s.sample_id = decided;
    s.reviewer_id = r;
    s.vote = Vote::NonOffensive;
    store.submit_vote(s);
  }
  const auto outcome = run->process_sample(*std::find_if(run->corpus().begin(), run->corpus().end(),
                                                         [&](const Sample& s) { return s.id == decided; }));
  REQUIRE(std::holds_alternative<PipelineDecision>(outcome));
  const auto& d = std::get<PipelineDecision>(outcome);
  CHECK(d.stage == DecisionStage::HumanMajority);
  CHECK(d.final_label == Label::NonOffensive);
  CHECK(d.human_verdicts.size() == 3);
  CHECK(d.llm_verdicts.size() == 3);

  const auto pending = tasks[1].sample_id;
  review::VoteSubmission s{pending, "r1", Vote::Unsure, {}, std::nullopt, std::nullopt};
  store.submit_vote(s);
  store.finalize_exhausted(pending, 1);
  const auto summary = run->summary();
  CHECK(summary.decided_by_humans == 1);
  CHECK(summary.unresolved == 1);
  CHECK(summary.awaiting_humans == summary.escalated - 2);

  // Decisions survive a reopen, and the review log does not produce duplicates.
  auto reopened = Run::open_offline(dir.path(), run->id(), clock0());
  CHECK(reopened->decisions().size() == run->decisions().size());
  CHECK(reopened->summary().unresolved == 1);
}

TEST_CASE("run logs are byte-identical across worker counts") {
  const auto report = testing::replay_determinism(kFixture);
  INFO(report.summary());
  CHECK(report.ok());
}
