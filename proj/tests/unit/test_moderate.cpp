#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "c3mod/moderate/moderate.hpp"
#include "c3mod/text.hpp"
#include "properties.hpp"
#include "test_support.hpp"

using namespace c3mod;
using namespace c3mod::moderate;
using c3mod::testing::FakeChat;
using c3mod::testing::llm_verdict;

namespace {

Sample sample() {
  auto s = testing::make_sample("s1", "원문");
  s.title_translated = "A title";
  s.comment_translated = "A comment";
  return s;
}

annotate::CulturalAnnotation annotation(std::string rendered = "") {
  return {"s1", {}, std::move(rendered), "v"};
}

ModeratorSpec moderator(std::string id, providers::ChatHandle chat) {
  return {std::move(id), std::move(chat), "model", 0.0};
}

std::shared_ptr<FakeChat> replying(std::string reply) {
  return std::make_shared<FakeChat>([reply](const providers::ChatRequest&) { return reply; });
}

}  // namespace

TEST_CASE("verdict grammar suite") {
  const auto report = testing::verdict_grammar();
  INFO(report.summary());
  CHECK(report.ok());
}

TEST_CASE("verdict parser is total over fuzzed input") {
  const auto report = testing::verdict_parser_totality(20000, 1234);
  INFO(report.summary());
  CHECK(report.ok());
}

TEST_CASE("parsed verdicts carry moderator id, timestamp and raw text") {
  const auto v = parse_verdict("Offensiveness : False", "m7", from_epoch_ms(99));
  CHECK(v.moderator_id == "m7");
  CHECK(v.moderator_kind == ModeratorKind::Llm);
  CHECK(to_epoch_ms(v.issued_at) == 99);
  CHECK(v.raw_response == "Offensiveness : False");
  CHECK_FALSE(v.abstained);
}

TEST_CASE("moderation prompt assembly") {
  const auto& prompts = annotate::PromptSet::v1();
  const auto empty = build_moderation_prompt(prompts, prompt_input(sample(), annotation()));
  CHECK(empty.find("Title: A title") != std::string::npos);
  CHECK(empty.find("Comment: A comment") != std::string::npos);
  CHECK(empty.find("Annotation: (none)") != std::string::npos);
  CHECK(empty.find('{') == std::string::npos);

  const auto full = build_moderation_prompt(prompts, prompt_input(sample(), annotation("- \"X\": y.")));
  CHECK(full.find("Annotation: \n- \"X\": y.") != std::string::npos);

  auto untranslated = sample();
  untranslated.comment_translated.reset();
  CHECK_THROWS_AS(prompt_input(untranslated, annotation()), ValidationError);
}

TEST_CASE("consensus") {
  using testing::llm_verdict;
  const auto u = consensus({llm_verdict("m1", Vote::Offensive), llm_verdict("m2", Vote::Offensive),
                            llm_verdict("m3", Vote::Offensive)});
  CHECK(u.kind == OutcomeKind::Unanimous);
  CHECK(u.label == Label::Offensive);
  const auto s = consensus({llm_verdict("m1", Vote::Offensive), llm_verdict("m2", Vote::NonOffensive)});
  CHECK(s.kind == OutcomeKind::Split);
  CHECK_FALSE(s.label);

  auto abstain = llm_verdict("m3", Vote::Unsure);
  abstain.abstained = true;
  abstain.spans.clear();
  const auto a = consensus({llm_verdict("m1", Vote::NonOffensive), llm_verdict("m2", Vote::NonOffensive), abstain});
  CHECK(a.kind == OutcomeKind::Split);
  CHECK_THROWS_AS(consensus({}), ValidationError);
}

TEST_CASE("consensus properties over randomized verdict lists") {
  const auto order = testing::consensus_order_independence(5000, 1);
  INFO(order.summary());
  CHECK(order.ok());
  const auto majority = testing::strict_majority_correctness(2000, 2);
  INFO(majority.summary());
  CHECK(majority.ok());
  const auto conservation = testing::routing_conservation(2000, 3);
  INFO(conservation.summary());
  CHECK(conservation.ok());
}

TEST_CASE("agreement ratio") {
  std::vector<ConsensusOutcome> outcomes{
      consensus({llm_verdict("a", Vote::Offensive), llm_verdict("b", Vote::Offensive)}),
      consensus({llm_verdict("a", Vote::Offensive), llm_verdict("b", Vote::NonOffensive)}),
      consensus({llm_verdict("a", Vote::NonOffensive), llm_verdict("b", Vote::NonOffensive)}),
      consensus({llm_verdict("a", Vote::NonOffensive), llm_verdict("b", Vote::NonOffensive)})};
  CHECK(agreement_ratio(outcomes) == doctest::Approx(0.75));
  CHECK_THROWS_AS(agreement_ratio(std::vector<ConsensusOutcome>{}), ValidationError);
}

TEST_CASE("consensus outcome JSON round trip checks its kind") {
  const auto u = consensus({llm_verdict("a", Vote::Offensive), llm_verdict("b", Vote::Offensive)});
  const auto back = json(u).get<ConsensusOutcome>();
  CHECK(back.kind == u.kind);
  CHECK(back.label == u.label);
  CHECK(back.verdicts == u.verdicts);

  auto tampered = json(u);
  tampered["verdicts"][1]["vote"] = "NOT";
  tampered["verdicts"][1]["spans"] = json::array();
  CHECK_THROWS(tampered.get<ConsensusOutcome>());
}

TEST_CASE("ensemble: unanimous, split and request shape") {
  const auto clock = std::make_shared<FixedClock>(from_epoch_ms(5));
  auto m1 = replying("Offensiveness : True\nSpan : [\"A comment\"]");
  auto m2 = replying("Offensiveness : True\nSpan : [\"comment\"]");
  auto m3 = replying("Offensiveness : False");
  Ensemble two(annotate::PromptSet::v1(), {moderator("m1", m1), {"m2", m2, "other", 0.7}}, clock);
  const auto u = two.run(sample(), annotation());
  CHECK(u.kind == OutcomeKind::Unanimous);
  CHECK(u.label == Label::Offensive);
  REQUIRE(u.verdicts.size() == 2);
  CHECK(u.verdicts[1].spans == std::vector<std::string>{"comment"});
  CHECK(to_epoch_ms(u.verdicts[0].issued_at) == 5);

  const auto r = m2->requests().at(0);
  CHECK(r.request_tag == "moderate/m2/s1");
  CHECK(r.model_id == "other");
  CHECK(r.temperature == doctest::Approx(0.7));
  REQUIRE(r.messages.size() == 1);
  CHECK(r.messages[0].content == build_moderation_prompt(annotate::PromptSet::v1(), prompt_input(sample(), annotation())));

  Ensemble three(annotate::PromptSet::v1(), {moderator("m1", m1), moderator("m2", m2), moderator("m3", m3)}, clock);
  CHECK(three.run(sample(), annotation()).kind == OutcomeKind::Split);
}

TEST_CASE("ensemble: one reprompt, then abstention") {
  const auto clock = std::make_shared<FixedClock>(from_epoch_ms(0));
  auto fixes = std::make_shared<FakeChat>([](const providers::ChatRequest& r) -> std::string {
    return r.request_tag.ends_with("#reprompt") ? "Offensiveness : False" : "I would say it is fine.";
  });
  auto never = replying("No idea.");
  auto ok = replying("Offensiveness : False");
  Ensemble ensemble(annotate::PromptSet::v1(), {moderator("m1", fixes), moderator("m2", never), moderator("m3", ok)}, clock);
  const auto outcome = ensemble.run(sample(), annotation());
  CHECK(outcome.kind == OutcomeKind::Split);
  REQUIRE(outcome.verdicts.size() == 3);
  CHECK(outcome.verdicts[0].vote == Vote::NonOffensive);
  CHECK(outcome.verdicts[1].abstained);
  CHECK(outcome.verdicts[1].vote == Vote::Unsure);
  CHECK(outcome.verdicts[1].raw_response == "No idea.");

  const auto retried = fixes->requests();
  REQUIRE(retried.size() == 2);
  CHECK(retried[1].request_tag == "moderate/m1/s1#reprompt");
  REQUIRE(retried[1].messages.size() == 3);
  CHECK(retried[1].messages[1].role == providers::Role::Assistant);
  CHECK(retried[1].messages[2].content == annotate::PromptSet::v1().moderation_reminder);
  CHECK(never->requests().size() == 2);
}

TEST_CASE("ensemble: provider failures") {
  const auto clock = std::make_shared<FixedClock>(from_epoch_ms(0));
  auto down = std::make_shared<FakeChat>([](const providers::ChatRequest&) -> std::string {
    throw providers::ProviderError(providers::ProviderErrorKind::Transport, "down");
  });
  auto ok = replying("Offensiveness : False");
  Ensemble partly(annotate::PromptSet::v1(), {moderator("m1", down), moderator("m2", ok)}, clock);
  const auto outcome = partly.run(sample(), annotation());
  CHECK(outcome.kind == OutcomeKind::Split);
  CHECK(outcome.verdicts[0].abstained);
  CHECK_FALSE(outcome.verdicts[0].raw_response);

  Ensemble all_down(annotate::PromptSet::v1(), {moderator("m1", down), moderator("m2", down)}, clock);
  CHECK_THROWS_AS(all_down.run(sample(), annotation()), providers::ProviderError);
}

TEST_CASE("ensemble construction checks") {
  const auto clock = std::make_shared<FixedClock>(from_epoch_ms(0));
  auto ok = replying("Offensiveness : False");
  CHECK_THROWS_AS(Ensemble(annotate::PromptSet::v1(), {moderator("m1", ok)}, clock), ValidationError);
  CHECK_THROWS_AS(Ensemble(annotate::PromptSet::v1(), {moderator("m1", ok), moderator("m1", ok)}, clock),
                  ValidationError);
  CHECK_THROWS_AS(Ensemble(annotate::PromptSet::v1(), {moderator("m1", ok), moderator("m2", nullptr)}, clock),
                  ValidationError);
  Ensemble e(annotate::PromptSet::v1(), {moderator("m1", ok), moderator("m2", ok)}, clock);
  CHECK_THROWS_AS(e.run(sample(), {"other", {}, {}, "v"}), ValidationError);
}

TEST_CASE("ensemble writes every verdict to the log in moderator order") {
  testing::TempDir dir;
  const auto log = std::make_shared<JsonlAppender>(dir / "verdicts.jsonl");
  const auto clock = std::make_shared<FixedClock>(from_epoch_ms(0));
  Ensemble e(annotate::PromptSet::v1(),
             {moderator("m1", replying("Offensiveness : False")), moderator("m2", replying("garbage")),
              moderator("m3", replying("Offensiveness : False"))},
             clock, {}, log);
  e.run(sample(), annotation());
  std::vector<std::string> ids;
  bool saw_parse_error = false;
  read_jsonl(dir / "verdicts.jsonl", [&](const json& j, std::size_t) {
    ids.push_back(j.at("verdict").at("moderator_id").get<std::string>());
    saw_parse_error |= j.contains("parse_error");
  });
  CHECK(ids == std::vector<std::string>{"m1", "m2", "m3"});
  CHECK(saw_parse_error);
}
