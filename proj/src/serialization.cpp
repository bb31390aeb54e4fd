#include "c3mod/serialization.hpp"

namespace c3mod {

void to_json(json& j, const NativeVote& v) {
  j = json{{"annotator_id", v.annotator_id}, {"label", to_string(v.label)}};
}

void from_json(const json& j, NativeVote& v) {
  v.annotator_id = j.at("annotator_id").get<std::string>();
  v.label = label_from_string(j.at("label").get<std::string>());
}

void to_json(json& j, const Sample& s) {
  j = json{{"id", s.id}, {"title", s.title}, {"comment", s.comment}};
  if (s.title_translated) j["title_translated"] = *s.title_translated;
  if (s.comment_translated) j["comment_translated"] = *s.comment_translated;
  if (s.gold_label) j["gold_label"] = to_string(*s.gold_label);
  if (s.category) j["category"] = to_string(*s.category);
  j["native_votes"] = s.native_votes;
}

void from_json(const json& j, Sample& s) {
  s.id = j.at("id").get<std::string>();
  s.title = j.value("title", std::string{});
  s.comment = j.at("comment").get<std::string>();
  s.title_translated.reset();
  s.comment_translated.reset();
  s.gold_label.reset();
  s.category.reset();
  if (j.contains("title_translated") && !j["title_translated"].is_null()) {
    s.title_translated = j["title_translated"].get<std::string>();
  }
  if (j.contains("comment_translated") && !j["comment_translated"].is_null()) {
    s.comment_translated = j["comment_translated"].get<std::string>();
  }
  if (j.contains("gold_label") && !j["gold_label"].is_null()) {
    s.gold_label = label_from_string(j["gold_label"].get<std::string>());
  }
  if (j.contains("category") && !j["category"].is_null()) {
    s.category = category_from_string(j["category"].get<std::string>());
  }
  s.native_votes = j.value("native_votes", std::vector<NativeVote>{});
}

void to_json(json& j, const Verdict& v) {
  j = json{{"moderator_id", v.moderator_id},
           {"moderator_kind", to_string(v.moderator_kind)},
           {"vote", to_string(v.vote)},
           {"spans", v.spans},
           {"raw_response", v.raw_response ? json(*v.raw_response) : json(nullptr)},
           {"issued_at", to_epoch_ms(v.issued_at)}};
  if (v.abstained) j["abstained"] = true;
}

void from_json(const json& j, Verdict& v) {
  v.moderator_id = j.at("moderator_id").get<std::string>();
  v.moderator_kind = moderator_kind_from_string(j.at("moderator_kind").get<std::string>());
  v.vote = vote_from_string(j.at("vote").get<std::string>());
  v.spans = j.value("spans", std::vector<std::string>{});
  v.raw_response.reset();
  if (j.contains("raw_response") && !j["raw_response"].is_null()) {
    v.raw_response = j["raw_response"].get<std::string>();
  }
  v.issued_at = from_epoch_ms(j.value("issued_at", std::int64_t{0}));
  v.abstained = j.value("abstained", false);
}

void to_json(json& j, const PipelineDecision& d) {
  j = json{{"sample_id", d.sample_id},
           {"stage", to_string(d.stage)},
           {"final_label", d.final_label ? json(to_string(*d.final_label)) : json(nullptr)},
           {"llm_verdicts", d.llm_verdicts},
           {"human_verdicts", d.human_verdicts},
           {"decided_at", to_epoch_ms(d.decided_at)}};
}

void from_json(const json& j, PipelineDecision& d) {
  d.sample_id = j.at("sample_id").get<std::string>();
  d.stage = stage_from_string(j.at("stage").get<std::string>());
  d.final_label.reset();
  if (j.contains("final_label") && !j["final_label"].is_null()) {
    d.final_label = label_from_string(j["final_label"].get<std::string>());
  }
  d.llm_verdicts = j.value("llm_verdicts", std::vector<Verdict>{});
  d.human_verdicts = j.value("human_verdicts", std::vector<Verdict>{});
  d.decided_at = from_epoch_ms(j.value("decided_at", std::int64_t{0}));
}

std::string dump_line(const json& j) {
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

}  // namespace c3mod
