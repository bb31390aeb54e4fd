#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "c3mod/annotate/annotate.hpp"
#include "c3mod/providers/scripted.hpp"
#include "c3mod/text.hpp"
#include "test_support.hpp"

using namespace c3mod;
using namespace c3mod::annotate;
using c3mod::testing::FakeChat;
using c3mod::testing::TempDir;

namespace {

Sample korean_sample() {
  Sample s;
  s.id = "k1";
  s.title = "김장 영상 논란";
  s.comment = "국뽕 가득한 댓글들 보소";
  return s;
}

Sample translated(Sample s) {
  s.title_translated = "Controversy over the Kimjang video";
  s.comment_translated = "Look at these comments full of gukppong";
  return s;
}

std::shared_ptr<providers::ScriptedProvider> search_fixture() {
  return providers::ScriptedProvider::from_jsonl(
      R"({"tag":"국뽕","kind":"search","response":[{"title":"A","url":"https://a.example","snippet":"pride"},{"title":"A again","url":"https://a.example","snippet":"dup"},{"title":"B","url":"https://b.example","snippet":"slang"}]}
{"tag":"김장","kind":"search","response":[]}
)");
}

AnnotatorOptions native_options() {
  AnnotatorOptions o;
  o.mode = RetrievalMode::ProviderNative;
  return o;
}

}  // namespace

TEST_CASE("built-in prompt set") {
  const auto& p = PromptSet::v1();
  CHECK(p.name == "v1");
  for (const auto* t : {&p.rag_step, &p.generation_step, &p.generation_example, &p.span_listing,
                        &p.moderation, &p.moderation_reminder, &p.regeneration_reminder, &p.translate}) {
    CHECK_FALSE(t->empty());
  }
  CHECK(p.moderation.find("{title}") != std::string::npos);
  CHECK(p.moderation.find("{comment}") != std::string::npos);
  CHECK(p.moderation.find("{annotation}") != std::string::npos);
  CHECK(p.moderation.find("Offensiveness : True") != std::string::npos);
  CHECK(p.moderation.find("Offensiveness : False") != std::string::npos);
  CHECK(p.rag_step.find("{comment}") != std::string::npos);
  CHECK(p.generation_step.find("{example}") != std::string::npos);
  CHECK(p.translate.find("{text}") != std::string::npos);

  const auto version = p.version();
  CHECK(version.rfind("v1-", 0) == 0);
  CHECK(version.size() == 3 + 12);
}

TEST_CASE("loading a prompt directory; any edit changes the version") {
  TempDir dir;
  const auto& v1 = PromptSet::v1();
  const std::vector<std::pair<std::string, std::string>> files{
      {"rag_step", v1.rag_step},
      {"generation_step", v1.generation_step},
      {"generation_example", v1.generation_example},
      {"span_listing", v1.span_listing},
      {"moderation", v1.moderation},
      {"moderation_reminder", v1.moderation_reminder},
      {"regeneration_reminder", v1.regeneration_reminder},
      {"translate", v1.translate}};
  const auto target = dir.path() / "v1";
  std::filesystem::create_directories(target);
  for (const auto& [name, body] : files) std::ofstream(target / (name + ".txt"), std::ios::binary) << body;
  const auto loaded = PromptSet::load(target);
  CHECK(loaded.version() == v1.version());

  std::ofstream(target / "moderation.txt", std::ios::binary) << v1.moderation << " ";
  CHECK(PromptSet::load(target).version() != v1.version());

  std::filesystem::remove(target / "translate.txt");
  CHECK_THROWS(PromptSet::load(target));
}

TEST_CASE("rendering and the objectivity guard") {
  std::vector<AnnotationEntry> entries{
      {{"국뽕", SpanLocation::Comment, CulturalCategory::InternetCulture}, "Gukppong", "Slang for national pride.", {}},
      {{"김장", SpanLocation::Title, CulturalCategory::CulturalKnowledge}, "Kimjang", "A seasonal custom.", {}}};
  CHECK(render_entries(entries) == "- \"Gukppong\": Slang for national pride.\n- \"Kimjang\": A seasonal custom.");
  CHECK(render_entries({}).empty());

  CHECK(asserts_verdict("It is slang. Therefore the comment is offensive."));
  CHECK(asserts_verdict("A custom. This is not offensive"));
  CHECK(asserts_verdict("A term. Its use here is hateful!"));
  CHECK(asserts_verdict("Some context. It amounts to hate speech."));
  CHECK_FALSE(asserts_verdict("Some people find the term offensive. It refers to national pride."));
  CHECK_FALSE(asserts_verdict("A dish made of fermented cabbage."));
  CHECK_FALSE(asserts_verdict(""));
}

TEST_CASE("span grounding and aspects") {
  const auto s = translated(korean_sample());
  CHECK(span_grounded(s, {"국뽕", SpanLocation::Comment, {}}));
  CHECK(span_grounded(s, {"gukppong", SpanLocation::Comment, {}}));
  CHECK_FALSE(span_grounded(s, {"국뽕", SpanLocation::Title, {}}));
  CHECK_FALSE(span_grounded(s, {"", SpanLocation::Comment, {}}));
  CHECK(aspect_from_model("internet culture") == CulturalCategory::InternetCulture);
  CHECK(aspect_from_model("Cultural Sentiment") == CulturalCategory::CulturalSentiment);
  CHECK(aspect_from_model("knowledge") == CulturalCategory::CulturalKnowledge);
  CHECK(aspect_from_model("???") == CulturalCategory::CulturalKnowledge);
}

TEST_CASE("generated entry parsing accepts common layouts") {
  const auto e = parse_generated_entries(
      "Title: something\n"
      "- \"Gukppong\": Slang for pride.\n"
      "  It is often ironic.\n"
      "* **Kimjang**: A custom.\n"
      "“Kimchi”: A dish.\n"
      "\"Injeong (ㅇㅈ)\": Agreement.\n"
      "**Hanbok** (한복): Clothing.\n");
  REQUIRE(e.size() == 5);
  CHECK(e[0].heading == "Gukppong");
  CHECK(e[0].explanation == "Slang for pride. It is often ironic.");
  CHECK(e[1].heading == "Kimjang");
  CHECK(e[2].heading == "Kimchi");
  CHECK(e[3].heading == "Injeong (ㅇㅈ)");
  CHECK(e[4].heading == "Hanbok (한복)");
  CHECK(e[4].explanation == "Clothing.");
  CHECK(parse_generated_entries("no entries here").empty());
}

TEST_CASE("span listing parsing") {
  const auto spans = parse_span_listing(
      "Some prose.\nSPAN | comment | internet culture | 국뽕\nspan | title | knowledge | \"김장\"\nSPAN | none\nSPAN broken\n");
  REQUIRE(spans.size() == 2);
  CHECK(spans[0].location == "comment");
  CHECK(spans[0].aspect == "internet culture");
  CHECK(spans[0].text == "국뽕");
  CHECK(spans[1].text == "김장");
  CHECK(parse_span_listing("SPAN | none").empty());
}

TEST_CASE("translation fills missing fields only") {
  auto chat = std::make_shared<FakeChat>([](const providers::ChatRequest& r) {
    return r.request_tag.find("title") != std::string::npos ? " Title EN \n" : "Comment EN";
  });
  Annotator annotator(PromptSet::v1(), chat, nullptr, native_options());
  const auto out = annotator.translate(korean_sample());
  CHECK(out.title_translated == "Title EN");
  CHECK(out.comment_translated == "Comment EN");
  const auto requests = chat->requests();
  REQUIRE(requests.size() == 2);
  CHECK(requests[0].request_tag == "translate/title/k1");
  CHECK(requests[1].request_tag == "translate/comment/k1");
  CHECK(requests[1].messages.at(0).content.find("국뽕 가득한") != std::string::npos);

  annotator.translate(out);
  CHECK(chat->requests().size() == 2);

  auto untitled = korean_sample();
  untitled.title.clear();
  untitled.id = "k2";
  const auto u = annotator.translate(untitled);
  CHECK(u.title_translated == "");
  CHECK(chat->requests().size() == 3);
}

TEST_CASE("span detection relocates, drops ungrounded spans and deduplicates") {
  auto chat = std::make_shared<FakeChat>([](const providers::ChatRequest&) {
    return std::string(
        "Answer.\nSPAN | title | internet culture | 국뽕\nSPAN | comment | internet culture | 국뽕\n"
        "SPAN | comment | knowledge | 김치\nSPAN | title | knowledge | 김장\n");
  });
  Annotator annotator(PromptSet::v1(), chat, search_fixture());
  const auto d = annotator.detect_spans(translated(korean_sample()));
  REQUIRE(d.spans.size() == 2);
  CHECK(d.spans[0] == CulturalSpan{"국뽕", SpanLocation::Comment, CulturalCategory::InternetCulture});
  CHECK(d.spans[1] == CulturalSpan{"김장", SpanLocation::Title, CulturalCategory::CulturalKnowledge});
  CHECK(d.ungrounded == 1);
  CHECK(d.rag_prompt.find(PromptSet::v1().span_listing) != std::string::npos);
  CHECK(chat->requests().at(0).request_tag == "annotate/detect/k1");

  auto tiny = korean_sample();
  tiny.comment = "ㅋ";
  CHECK(annotator.detect_spans(tiny).skipped);
  CHECK(chat->requests().size() == 1);
}

TEST_CASE("retrieval deduplicates by URL and honours top_k") {
  auto chat = std::make_shared<FakeChat>([](const providers::ChatRequest&) { return std::string(); });
  Annotator annotator(PromptSet::v1(), chat, search_fixture());
  const CulturalSpan span{"국뽕", SpanLocation::Comment, CulturalCategory::InternetCulture};
  const auto r = annotator.retrieve_context(span, 5);
  REQUIRE(r.size() == 2);
  CHECK(r[0].url == "https://a.example");
  CHECK(r[1].url == "https://b.example");
  CHECK(annotator.retrieve_context(span, 1).size() == 1);
  CHECK_THROWS_AS(annotator.retrieve_context(span, 0), ValidationError);
  CHECK_THROWS_AS(annotator.retrieve_context(span, 11), ValidationError);
  CHECK_THROWS_AS(Annotator(PromptSet::v1(), chat, nullptr), ValidationError);
}

TEST_CASE("annotation conversation, regeneration and rejection") {
  int generations = 0;
  auto chat = std::make_shared<FakeChat>([&](const providers::ChatRequest& r) -> std::string {
    if (r.request_tag == "annotate/detect/k1") {
      return "Context.\nSPAN | comment | internet culture | 국뽕\nSPAN | title | knowledge | 김장";
    }
    ++generations;
    if (r.request_tag == "annotate/generate/k1") {
      return "- \"Gukppong (국뽕)\": Slang for pride. So this comment is offensive.\n- \"Kimjang\": A custom.";
    }
    return "- \"Kimjang\": A custom.\n- \"Gukppong (국뽕)\": Slang for pride.";
  });
  Annotator annotator(PromptSet::v1(), chat, search_fixture());
  const auto a = annotator.annotate(translated(korean_sample()));
  CHECK(generations == 2);
  REQUIRE(a.entries.size() == 2);
  CHECK(a.entries[0].span.text == "국뽕");
  CHECK(a.entries[0].heading == "Gukppong (국뽕)");
  CHECK(a.entries[0].sources.size() == 2);
  CHECK(a.entries[1].span.text == "김장");
  CHECK(a.entries[1].sources.empty());
  CHECK(a.rendered == render_entries(a.entries));
  CHECK(a.prompt_version == PromptSet::v1().version());

  const auto requests = chat->requests();
  REQUIRE(requests.size() == 3);
  const auto& first = requests[1];
  CHECK(first.request_tag == "annotate/generate/k1");
  REQUIRE(first.messages.size() == 3);
  CHECK(first.messages[0].role == providers::Role::User);
  CHECK(first.messages[0].content.find("Search results:") != std::string::npos);
  CHECK(first.messages[0].content.find("https://b.example") != std::string::npos);
  CHECK(first.messages[0].content.find("\"김장\": (no results)") != std::string::npos);
  CHECK(first.messages[1].role == providers::Role::Assistant);
  CHECK(first.messages[2].content.find("full of gukppong") != std::string::npos);
  const auto& second = requests[2];
  CHECK(second.request_tag == "annotate/generate/k1#regen1");
  REQUIRE(second.messages.size() == 5);
  CHECK(second.messages[4].content == PromptSet::v1().regeneration_reminder);

  auto stubborn = std::make_shared<FakeChat>([](const providers::ChatRequest& r) -> std::string {
    if (r.request_tag.starts_with("annotate/detect/")) return "SPAN | comment | sentiment | 국뽕";
    return "- \"국뽕\": Pride. It is offensive.";
  });
  AnnotatorOptions options;
  options.max_regenerations = 2;
  Annotator strict(PromptSet::v1(), stubborn, search_fixture(), options);
  CHECK_THROWS_AS(strict.annotate(translated(korean_sample())), AnnotationRejected);
  CHECK(stubborn->requests().size() == 1 + 3);
}

TEST_CASE("no spans means an empty annotation and no generation call") {
  auto chat = std::make_shared<FakeChat>([](const providers::ChatRequest&) { return std::string("SPAN | none"); });
  Annotator annotator(PromptSet::v1(), chat, search_fixture());
  const auto a = annotator.annotate(translated(korean_sample()));
  CHECK(a.entries.empty());
  CHECK(a.rendered.empty());
  CHECK(chat->requests().size() == 1);
  CHECK_THROWS_AS(annotator.annotate(korean_sample()), ValidationError);
}

TEST_CASE("provider-native mode grounds spans from headings") {
  auto chat = std::make_shared<FakeChat>([](const providers::ChatRequest& r) -> std::string {
    if (r.request_tag.starts_with("annotate/detect/")) return "I searched the web.";
    return "- \"Gukppong (국뽕)\": Slang.\n- \"Moon landing\": Unrelated.\n- \"Kimjang\": A custom.";
  });
  Annotator annotator(PromptSet::v1(), chat, nullptr, native_options());
  const auto a = annotator.annotate(translated(korean_sample()));
  REQUIRE(a.entries.size() == 2);
  CHECK(a.entries[0].span == CulturalSpan{"국뽕", SpanLocation::Comment, CulturalCategory::CulturalKnowledge});
  CHECK(a.entries[1].span.text == "Kimjang");
  CHECK(a.entries[1].span.location == SpanLocation::Title);
  CHECK(chat->requests().at(0).messages.at(0).content.find("SPAN |") == std::string::npos);
  CHECK(annotator.cache_version().ends_with("/provider-native"));
}

TEST_CASE("annotation cache: memory and file backed") {
  auto chat = std::make_shared<FakeChat>([](const providers::ChatRequest& r) -> std::string {
    if (r.request_tag.starts_with("annotate/detect/")) return "SPAN | comment | sentiment | 국뽕";
    return "- \"국뽕\": National pride slang.";
  });
  TempDir dir;
  {
    Annotator annotator(PromptSet::v1(), chat, search_fixture(), {},
                        std::make_shared<FileAnnotationCache>(dir.path()));
    const auto a = annotator.annotate(translated(korean_sample()));
    CHECK(annotator.annotate(translated(korean_sample())) == a);
    CHECK(chat->requests().size() == 2);
  }
  auto cache = std::make_shared<FileAnnotationCache>(dir.path());
  Annotator again(PromptSet::v1(), chat, search_fixture(), {}, cache);
  const auto b = again.annotate(translated(korean_sample()));
  CHECK(chat->requests().size() == 2);
  CHECK(b.entries.at(0).sources.size() == 2);

  std::ofstream(cache->path_for("k1", again.cache_version()), std::ios::trunc) << "{not json";
  CHECK_FALSE(cache->get("k1", again.cache_version()));
  CHECK_FALSE(cache->get("k1", "other-version"));

  MemoryAnnotationCache memory;
  memory.put("v", b);
  CHECK(memory.get("k1", "v") == b);
  CHECK_FALSE(memory.get("k1", "w"));
}

TEST_CASE("annotation JSON round trip") {
  CulturalAnnotation a{"k1",
                       {{{"국뽕", SpanLocation::Comment, CulturalCategory::InternetCulture},
                         "Gukppong",
                         "Slang.",
                         {{"A", "https://a.example", "s"}}}},
                       "- \"Gukppong\": Slang.",
                       "v1-abc"};
  CHECK(json(a).get<CulturalAnnotation>() == a);
}

TEST_CASE("accepted annotations never state a verdict (randomized replies)") {
  std::mt19937 rng(11);
  const std::vector<std::string> sentences{"A dish.", "Slang for pride.", "This is offensive.",
                                           "It is not offensive.", "Used ironically online.",
                                           "Often considered hateful.", "A seasonal custom."};
  for (int round = 0; round < 300; ++round) {
    auto chat = std::make_shared<FakeChat>([&](const providers::ChatRequest& r) -> std::string {
      if (r.request_tag.starts_with("annotate/detect/")) return "SPAN | comment | sentiment | 국뽕";
      return "- \"국뽕\": " + sentences[rng() % sentences.size()] + " " + sentences[rng() % sentences.size()];
    });
    Annotator annotator(PromptSet::v1(), chat, search_fixture());
    try {
      const auto a = annotator.annotate(translated(korean_sample()));
      for (const auto& e : a.entries) CHECK_FALSE(asserts_verdict(e.explanation));
    } catch (const AnnotationRejected&) {
      CHECK(chat->requests().size() == 1 + 3);
    }
  }
}
