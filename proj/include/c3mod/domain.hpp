#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace c3mod {

/// UTC wall-clock instant with millisecond resolution.
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

inline std::int64_t to_epoch_ms(Timestamp t) { return t.time_since_epoch().count(); }
inline Timestamp from_epoch_ms(std::int64_t ms) { return Timestamp{std::chrono::milliseconds{ms}}; }

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

enum class Label { Offensive, NonOffensive };
enum class Vote { Offensive, NonOffensive, Unsure };
enum class CulturalCategory { CulturalKnowledge, CulturalSentiment, InternetCulture };
enum class ModeratorKind { Llm, Human };
enum class DecisionStage { LlmConsensus, HumanMajority, Unresolved };

inline constexpr Label kAllLabels[] = {Label::Offensive, Label::NonOffensive};
inline constexpr CulturalCategory kAllCategories[] = {
    CulturalCategory::CulturalKnowledge, CulturalCategory::CulturalSentiment,
    CulturalCategory::InternetCulture};

/// "OFF" / "NOT".
std::string_view to_string(Label label);
/// Case-sensitive inverse of to_string(Label); throws ParseError.
Label label_from_string(std::string_view s);

/// "OFF" / "NOT" / "UNSURE".
std::string_view to_string(Vote vote);
Vote vote_from_string(std::string_view s);

std::string_view to_string(CulturalCategory category);
/// Accepts the snake_case names produced by to_string plus a few loose spellings
/// ("knowledge", "Cultural Sentiment", "internet culture", ...).
CulturalCategory category_from_string(std::string_view s);

std::string_view to_string(ModeratorKind kind);
ModeratorKind moderator_kind_from_string(std::string_view s);

std::string_view to_string(DecisionStage stage);
DecisionStage stage_from_string(std::string_view s);

constexpr Vote to_vote(Label label) {
  return label == Label::Offensive ? Vote::Offensive : Vote::NonOffensive;
}
constexpr std::optional<Label> to_label(Vote vote) {
  switch (vote) {
    case Vote::Offensive:
      return Label::Offensive;
    case Vote::NonOffensive:
      return Label::NonOffensive;
    case Vote::Unsure:
      break;
  }
  return std::nullopt;
}

struct NativeVote {
  std::string annotator_id;
  Label label = Label::NonOffensive;

  friend bool operator==(const NativeVote&, const NativeVote&) = default;
};

struct Sample {
  std::string id;
  std::string title;
  std::string comment;
  std::optional<std::string> title_translated;
  std::optional<std::string> comment_translated;
  std::optional<Label> gold_label;
  std::optional<CulturalCategory> category;
  std::vector<NativeVote> native_votes;

  bool has_translations() const { return title_translated && comment_translated; }

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Returns `raw` unchanged when every Sample invariant holds, otherwise throws
/// ValidationError naming the first violated invariant.
const Sample& validate_sample(const Sample& raw);

/// Checks id uniqueness across a corpus in addition to validate_sample.
void validate_corpus(std::span<const Sample> corpus);

struct Verdict {
  std::string moderator_id;
  ModeratorKind moderator_kind = ModeratorKind::Llm;
  Vote vote = Vote::NonOffensive;
  std::vector<std::string> spans;
  std::optional<std::string> raw_response;
  Timestamp issued_at{};
  // Set on the placeholder recorded for an LLM moderator whose output could not
  // be used; the only LLM verdict allowed to carry Vote::Unsure.
  bool abstained = false;

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

void validate_verdict(const Verdict& verdict);

struct PipelineDecision {
  std::string sample_id;
  DecisionStage stage = DecisionStage::Unresolved;
  std::optional<Label> final_label;
  std::vector<Verdict> llm_verdicts;
  std::vector<Verdict> human_verdicts;
  Timestamp decided_at{};

  friend bool operator==(const PipelineDecision&, const PipelineDecision&) = default;
};

void validate_decision(const PipelineDecision& decision);

/// Label held by strictly more than half of the binary votes; Unsure votes are
/// ignored. nullopt on ties and when no binary vote exists.
std::optional<Label> strict_majority(std::span<const Vote> votes);
std::optional<Label> strict_majority(std::span<const Verdict> verdicts);

/// Majority of the three native annotator labels.
std::optional<Label> native_majority(const Sample& sample);

/// True when all native annotators gave the same label.
bool natives_unanimous(const Sample& sample);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override;
};

/// Always reports the same instant; used by replays that must be byte-stable.
class FixedClock final : public Clock {
 public:
  explicit FixedClock(Timestamp at) : at_(at) {}
  Timestamp now() const override { return at_; }

 private:
  Timestamp at_;
};

}  // namespace c3mod
