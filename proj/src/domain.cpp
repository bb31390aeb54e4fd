#include "c3mod/domain.hpp"

#include <set>

#include "c3mod/text.hpp"

namespace c3mod {

std::string_view to_string(Label label) {
  return label == Label::Offensive ? "OFF" : "NOT";
}

Label label_from_string(std::string_view s) {
  if (s == "OFF") return Label::Offensive;
  if (s == "NOT") return Label::NonOffensive;
  throw ParseError("unknown label '" + std::string(s) + "' (expected OFF or NOT)");
}

std::string_view to_string(Vote vote) {
  switch (vote) {
    case Vote::Offensive:
      return "OFF";
    case Vote::NonOffensive:
      return "NOT";
    case Vote::Unsure:
      return "UNSURE";
  }
  return "UNSURE";
}

Vote vote_from_string(std::string_view s) {
  if (s == "UNSURE") return Vote::Unsure;
  return to_vote(label_from_string(s));
}

std::string_view to_string(CulturalCategory category) {
  switch (category) {
    case CulturalCategory::CulturalKnowledge:
      return "cultural_knowledge";
    case CulturalCategory::CulturalSentiment:
      return "cultural_sentiment";
    case CulturalCategory::InternetCulture:
      return "internet_culture";
  }
  return "cultural_knowledge";
}

CulturalCategory category_from_string(std::string_view s) {
  std::string key;
  for (char c : text::to_lower_ascii(text::trim(s))) key += (c == ' ' || c == '-') ? '_' : c;
  if (key == "cultural_knowledge" || key == "knowledge" || key == "culturally_specific_knowledge") {
    return CulturalCategory::CulturalKnowledge;
  }
  if (key == "cultural_sentiment" || key == "sentiment") return CulturalCategory::CulturalSentiment;
  if (key == "internet_culture" || key == "internet" || key == "internet_meme" || key == "meme") {
    return CulturalCategory::InternetCulture;
  }
  throw ParseError("unknown cultural category '" + std::string(s) + "'");
}

std::string_view to_string(ModeratorKind kind) {
  return kind == ModeratorKind::Llm ? "llm" : "human";
}

ModeratorKind moderator_kind_from_string(std::string_view s) {
  if (s == "llm") return ModeratorKind::Llm;
  if (s == "human") return ModeratorKind::Human;
  throw ParseError("unknown moderator kind '" + std::string(s) + "'");
}

std::string_view to_string(DecisionStage stage) {
  switch (stage) {
    case DecisionStage::LlmConsensus:
      return "llm_consensus";
    case DecisionStage::HumanMajority:
      return "human_majority";
    case DecisionStage::Unresolved:
      return "unresolved";
  }
  return "unresolved";
}

DecisionStage stage_from_string(std::string_view s) {
  if (s == "llm_consensus") return DecisionStage::LlmConsensus;
  if (s == "human_majority") return DecisionStage::HumanMajority;
  if (s == "unresolved") return DecisionStage::Unresolved;
  throw ParseError("unknown decision stage '" + std::string(s) + "'");
}

const Sample& validate_sample(const Sample& raw) {
  if (raw.id.empty()) throw ValidationError("id empty");
  if (raw.comment.empty()) throw ValidationError("comment empty");
  if (!raw.native_votes.empty() && raw.native_votes.size() != 3) {
    throw ValidationError("native_votes length");
  }
  return raw;
}

void validate_corpus(std::span<const Sample> corpus) {
  std::set<std::string_view> seen;
  for (const auto& sample : corpus) {
    try {
      validate_sample(sample);
    } catch (const ValidationError& e) {
      throw ValidationError("sample '" + sample.id + "': " + e.what());
    }
    if (!seen.insert(sample.id).second) throw ValidationError("duplicate id '" + sample.id + "'");
  }
}

void validate_verdict(const Verdict& verdict) {
  if (verdict.moderator_id.empty()) throw ValidationError("moderator_id empty");
  if (!verdict.spans.empty() && verdict.vote != Vote::Offensive) {
    throw ValidationError("spans present on non-offensive verdict");
  }
  if (verdict.abstained && verdict.moderator_kind != ModeratorKind::Llm) {
    throw ValidationError("abstention on human verdict");
  }
  if (verdict.moderator_kind == ModeratorKind::Llm && verdict.vote == Vote::Unsure &&
      !verdict.abstained) {
    throw ValidationError("llm verdict voted unsure");
  }
}

void validate_decision(const PipelineDecision& decision) {
  for (const auto& v : decision.llm_verdicts) validate_verdict(v);
  for (const auto& v : decision.human_verdicts) validate_verdict(v);
  switch (decision.stage) {
    case DecisionStage::LlmConsensus: {
      if (decision.llm_verdicts.empty()) throw ValidationError("consensus without llm verdicts");
      const Vote first = decision.llm_verdicts.front().vote;
      for (const auto& v : decision.llm_verdicts) {
        if (v.vote != first || v.abstained) throw ValidationError("consensus verdicts disagree");
      }
      if (!decision.final_label || to_vote(*decision.final_label) != first) {
        throw ValidationError("consensus label mismatch");
      }
      break;
    }
    case DecisionStage::HumanMajority: {
      const auto majority = strict_majority(decision.human_verdicts);
      if (!majority || decision.final_label != majority) {
        throw ValidationError("human majority label mismatch");
      }
      break;
    }
    case DecisionStage::Unresolved:
      if (decision.final_label) throw ValidationError("unresolved decision carries a label");
      break;
  }
}

std::optional<Label> strict_majority(std::span<const Vote> votes) {
  std::size_t off = 0;
  std::size_t non = 0;
  for (auto v : votes) {
    if (v == Vote::Offensive) ++off;
    if (v == Vote::NonOffensive) ++non;
  }
  if (off > non) return Label::Offensive;
  if (non > off) return Label::NonOffensive;
  return std::nullopt;
}

std::optional<Label> strict_majority(std::span<const Verdict> verdicts) {
  std::vector<Vote> votes;
  votes.reserve(verdicts.size());
  for (const auto& v : verdicts) votes.push_back(v.vote);
  return strict_majority(votes);
}

std::optional<Label> native_majority(const Sample& sample) {
  std::vector<Vote> votes;
  for (const auto& nv : sample.native_votes) votes.push_back(to_vote(nv.label));
  return strict_majority(votes);
}

bool natives_unanimous(const Sample& sample) {
  if (sample.native_votes.empty()) return false;
  for (const auto& nv : sample.native_votes) {
    if (nv.label != sample.native_votes.front().label) return false;
  }
  return true;
}

Timestamp SystemClock::now() const {
  return std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now());
}

}  // namespace c3mod
