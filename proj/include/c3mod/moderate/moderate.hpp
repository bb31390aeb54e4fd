#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "c3mod/annotate/annotate.hpp"
#include "c3mod/annotate/prompts.hpp"
#include "c3mod/domain.hpp"
#include "c3mod/jsonl.hpp"
#include "c3mod/providers/provider.hpp"

namespace c3mod::moderate {

struct ModerationPromptInput {
  std::string title_translated;
  std::string comment_translated;
  std::string annotation_rendered;
};

ModerationPromptInput prompt_input(const Sample& sample,
                                   const annotate::CulturalAnnotation& annotation);

/// Fills the moderation template. An empty annotation becomes "(none)"; a
/// nonempty one starts on the line after "Annotation:".
std::string build_moderation_prompt(const annotate::PromptSet& prompts,
                                    const ModerationPromptInput& input);

/// Reads the first `Offensiveness : True|False` in `raw`. True must be followed
/// by `Span : [...]` holding zero or more quoted strings. Throws ParseError with
/// the reason otherwise; never throws anything else.
Verdict parse_verdict(std::string_view raw, std::string_view moderator_id,
                      Timestamp issued_at = {});

enum class OutcomeKind { Unanimous, Split };
std::string_view to_string(OutcomeKind kind);

struct ConsensusOutcome {
  OutcomeKind kind = OutcomeKind::Split;
  /// Set exactly when kind is Unanimous.
  std::optional<Label> label;
  std::vector<Verdict> verdicts;
};

/// Unanimous(L) when every verdict is a non-abstaining vote for L, Split
/// otherwise. Throws ValidationError on an empty list.
ConsensusOutcome consensus(std::vector<Verdict> verdicts);

/// Fraction of Unanimous outcomes. Throws ValidationError on an empty list.
double agreement_ratio(std::span<const ConsensusOutcome> outcomes);

void to_json(json& j, const ConsensusOutcome& outcome);
void from_json(const json& j, ConsensusOutcome& outcome);

struct ModeratorSpec {
  std::string id;
  providers::ChatHandle chat;
  std::string model_id;
  double temperature = 0.0;
};

struct EnsembleOptions {
  int reprompts = 1;
  std::size_t max_output_chars = 2048;
};

/// Step 2 over one annotated sample. Each moderator gets its own conversation;
/// the calls run concurrently and are joined before consensus.
class Ensemble {
 public:
  Ensemble(annotate::PromptSet prompts, std::vector<ModeratorSpec> moderators,
           std::shared_ptr<const Clock> clock, EnsembleOptions options = {},
           std::shared_ptr<JsonlAppender> verdict_log = nullptr);

  ConsensusOutcome run(const Sample& sample, const annotate::CulturalAnnotation& annotation) const;

  std::size_t size() const { return moderators_.size(); }
  const std::vector<ModeratorSpec>& moderators() const { return moderators_; }

 private:
  struct Attempt {
    Verdict verdict;
    std::optional<std::string> parse_error;
    std::optional<providers::ProviderError> provider_error;
  };

  Attempt ask(const ModeratorSpec& moderator, const std::string& sample_id,
              const std::string& prompt) const;

  annotate::PromptSet prompts_;
  std::vector<ModeratorSpec> moderators_;
  std::shared_ptr<const Clock> clock_;
  EnsembleOptions options_;
  std::shared_ptr<JsonlAppender> verdict_log_;
};

}  // namespace c3mod::moderate
