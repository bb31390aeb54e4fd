#include "c3mod/moderate/moderate.hpp"

#include <spdlog/spdlog.h>

#include <future>
#include <set>

#include "c3mod/text.hpp"

namespace c3mod::moderate {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f'; }
bool is_word(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Cursor over the reply. `lower` has the same byte offsets as `raw`.
struct Scanner {
  std::string_view raw;
  std::string lower;
  std::size_t pos = 0;

  void skip_inline_space() {
    while (pos < raw.size() && (raw[pos] == ' ' || raw[pos] == '\t')) ++pos;
  }
  void skip_space() {
    while (pos < raw.size() && is_space(raw[pos])) ++pos;
  }
  // Markdown emphasis around keys, as in "**Offensiveness**: True".
  void skip_emphasis() {
    while (pos < raw.size() && (raw[pos] == '*' || raw[pos] == '_')) ++pos;
  }
  bool eat(char c) {
    if (pos < raw.size() && raw[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  bool eat_word(std::string_view word) {
    if (lower.compare(pos, word.size(), word) != 0) return false;
    const auto end = pos + word.size();
    if (end < raw.size() && is_word(raw[end])) return false;
    pos = end;
    return true;
  }
  // Positions `pos` just past the first "<key> :" occurring at or after `from`.
  bool find_key(std::string_view key, std::size_t from) {
    for (auto at = lower.find(key, from); at != std::string::npos; at = lower.find(key, at + 1)) {
      if (at > 0 && is_word(raw[at - 1])) continue;
      pos = at + key.size();
      if (pos < raw.size() && (raw[pos] == 's' || raw[pos] == 'S') && key == "span") ++pos;
      skip_emphasis();
      skip_inline_space();
      if (eat(':')) {
        skip_emphasis();
        skip_inline_space();
        return true;
      }
    }
    return false;
  }
};

std::string read_quoted(Scanner& s) {
  const char quote = s.raw[s.pos++];
  std::string out;
  while (s.pos < s.raw.size()) {
    const char c = s.raw[s.pos++];
    if (c == quote) return out;
    if (c == '\\' && s.pos < s.raw.size()) {
      const char next = s.raw[s.pos++];
      switch (next) {
        case 'n':
          out += '\n';
          break;
        case 't':
          out += '\t';
          break;
        default:
          out += next;
      }
      continue;
    }
    out += c;
  }
  throw ParseError("unterminated quoted span");
}

std::vector<std::string> read_span_list(Scanner& s) {
  if (!s.eat('[')) throw ParseError("span list must start with '['");
  std::vector<std::string> spans;
  s.skip_space();
  if (s.eat(']')) return spans;
  while (true) {
    s.skip_space();
    if (s.pos >= s.raw.size()) throw ParseError("unterminated span list");
    const char c = s.raw[s.pos];
    if (c != '"' && c != '\'') throw ParseError("spans must be quoted strings");
    spans.push_back(text::sanitize_utf8(read_quoted(s)));
    s.skip_space();
    if (s.eat(']')) return spans;
    if (!s.eat(',')) throw ParseError("expected ',' or ']' in span list");
  }
}

}  // namespace

ModerationPromptInput prompt_input(const Sample& sample,
                                   const annotate::CulturalAnnotation& annotation) {
  if (!sample.has_translations()) {
    throw ValidationError("sample '" + sample.id + "' has no translations");
  }
  return {*sample.title_translated, *sample.comment_translated, annotation.rendered};
}

std::string build_moderation_prompt(const annotate::PromptSet& prompts,
                                    const ModerationPromptInput& input) {
  if (text::trim(input.comment_translated).empty()) {
    throw ValidationError("moderation input needs a translated comment");
  }
  const auto annotation =
      text::trim(input.annotation_rendered).empty() ? std::string("(none)")
                                                    : "\n" + input.annotation_rendered;
  return text::substitute(prompts.moderation, {{"title", input.title_translated},
                                               {"comment", input.comment_translated},
                                               {"annotation", annotation}});
}

Verdict parse_verdict(std::string_view raw, std::string_view moderator_id, Timestamp issued_at) {
  Scanner s{raw, text::to_lower_ascii(raw)};
  Verdict verdict;
  verdict.moderator_id = std::string(moderator_id);
  verdict.moderator_kind = ModeratorKind::Llm;
  verdict.raw_response = text::sanitize_utf8(raw);
  verdict.issued_at = issued_at;

  std::size_t from = 0;
  std::optional<bool> offensive;
  while (!offensive && s.find_key("offensiveness", from)) {
    from = s.pos;
    if (s.eat_word("true")) {
      offensive = true;
    } else if (s.eat_word("false")) {
      offensive = false;
    }
  }
  if (!offensive) throw ParseError("no 'Offensiveness : True|False' line");
  if (!*offensive) {
    verdict.vote = Vote::NonOffensive;
    return verdict;
  }
  if (!s.find_key("span", s.pos)) throw ParseError("'Offensiveness : True' without a Span line");
  verdict.vote = Vote::Offensive;
  verdict.spans = read_span_list(s);
  return verdict;
}

std::string_view to_string(OutcomeKind kind) {
  return kind == OutcomeKind::Unanimous ? "unanimous" : "split";
}

ConsensusOutcome consensus(std::vector<Verdict> verdicts) {
  if (verdicts.empty()) throw ValidationError("consensus over zero verdicts");
  ConsensusOutcome outcome;
  std::optional<Label> common = verdicts.front().abstained ? std::nullopt
                                                           : to_label(verdicts.front().vote);
  for (const auto& v : verdicts) {
    if (!common || v.abstained || to_label(v.vote) != common) {
      common.reset();
      break;
    }
  }
  outcome.kind = common ? OutcomeKind::Unanimous : OutcomeKind::Split;
  outcome.label = common;
  outcome.verdicts = std::move(verdicts);
  return outcome;
}

double agreement_ratio(std::span<const ConsensusOutcome> outcomes) {
  if (outcomes.empty()) throw ValidationError("agreement ratio over zero outcomes");
  std::size_t unanimous = 0;
  for (const auto& o : outcomes) unanimous += o.kind == OutcomeKind::Unanimous;
  return static_cast<double>(unanimous) / static_cast<double>(outcomes.size());
}

void to_json(json& j, const ConsensusOutcome& outcome) {
  j = json{{"kind", to_string(outcome.kind)},
           {"label", outcome.label ? json(to_string(*outcome.label)) : json(nullptr)},
           {"verdicts", outcome.verdicts}};
}

void from_json(const json& j, ConsensusOutcome& outcome) {
  auto verdicts = j.at("verdicts").get<std::vector<Verdict>>();
  outcome = consensus(std::move(verdicts));
  const auto kind = j.at("kind").get<std::string>();
  if (kind != to_string(outcome.kind)) {
    throw ParseError("stored outcome kind '" + kind + "' disagrees with its verdicts");
  }
}

Ensemble::Ensemble(annotate::PromptSet prompts, std::vector<ModeratorSpec> moderators,
                   std::shared_ptr<const Clock> clock, EnsembleOptions options,
                   std::shared_ptr<JsonlAppender> verdict_log)
    : prompts_(std::move(prompts)),
      moderators_(std::move(moderators)),
      clock_(std::move(clock)),
      options_(options),
      verdict_log_(std::move(verdict_log)) {
  if (moderators_.size() < 2) throw ValidationError("an ensemble needs at least two moderators");
  if (!clock_) throw ValidationError("ensemble requires a clock");
  if (options_.reprompts < 0) throw ValidationError("reprompts must be nonnegative");
  std::set<std::string> ids;
  for (const auto& m : moderators_) {
    if (m.id.empty() || !m.chat) throw ValidationError("moderator needs an id and a provider");
    if (!ids.insert(m.id).second) throw ValidationError("duplicate moderator id '" + m.id + "'");
  }
}

Ensemble::Attempt Ensemble::ask(const ModeratorSpec& moderator, const std::string& sample_id,
                                const std::string& prompt) const {
  using providers::ChatMessage;
  using providers::Role;
  std::vector<ChatMessage> messages{ChatMessage{Role::User, prompt}};
  const auto base_tag = "moderate/" + moderator.id + "/" + sample_id;
  Attempt attempt;
  std::optional<std::string> last_raw;
  for (int round = 0; round <= options_.reprompts; ++round) {
    providers::ChatRequest request;
    request.model_id = moderator.model_id;
    request.messages = messages;
    request.temperature = moderator.temperature;
    request.max_output_chars = options_.max_output_chars;
    request.request_tag = round == 0   ? base_tag
                          : round == 1 ? base_tag + "#reprompt"
                                       : base_tag + "#reprompt" + std::to_string(round);
    std::string content;
    try {
      content = moderator.chat->chat(request).content;
    } catch (const providers::ProviderError& e) {
      spdlog::warn("moderator {} on {}: {}", moderator.id, sample_id, e.what());
      attempt.provider_error = e;
      break;
    }
    last_raw = content;
    try {
      attempt.verdict = parse_verdict(content, moderator.id, clock_->now());
      attempt.parse_error.reset();
      return attempt;
    } catch (const ParseError& e) {
      spdlog::warn("moderator {} on {}: unparseable reply ({})", moderator.id, sample_id, e.what());
      attempt.parse_error = e.what();
      messages.push_back(ChatMessage{Role::Assistant, content});
      messages.push_back(ChatMessage{Role::User, prompts_.moderation_reminder});
    }
  }
  attempt.verdict = Verdict{moderator.id, ModeratorKind::Llm, Vote::Unsure, {},
                            last_raw ? std::optional(text::sanitize_utf8(*last_raw)) : std::nullopt,
                            clock_->now(), true};
  return attempt;
}

ConsensusOutcome Ensemble::run(const Sample& sample,
                               const annotate::CulturalAnnotation& annotation) const {
  validate_sample(sample);
  if (annotation.sample_id != sample.id) {
    throw ValidationError("annotation for '" + annotation.sample_id + "' given with sample '" +
                          sample.id + "'");
  }
  const auto prompt = build_moderation_prompt(prompts_, prompt_input(sample, annotation));

  std::vector<std::future<Attempt>> pending;
  pending.reserve(moderators_.size());
  for (const auto& m : moderators_) {
    pending.push_back(std::async(std::launch::async,
                                 [this, &m, &sample, &prompt] { return ask(m, sample.id, prompt); }));
  }
  std::vector<Attempt> attempts;
  for (auto& f : pending) attempts.push_back(f.get());

  const bool all_failed = std::all_of(attempts.begin(), attempts.end(),
                                      [](const Attempt& a) { return a.provider_error.has_value(); });
  if (all_failed) {
    const auto& first = *attempts.front().provider_error;
    throw providers::ProviderError(first.kind(),
                                   "all " + std::to_string(attempts.size()) +
                                       " moderators failed on '" + sample.id + "': " + first.detail(),
                                   std::nullopt, first.attempts());
  }

  std::vector<Verdict> verdicts;
  for (auto& a : attempts) {
    if (verdict_log_) {
      json record{{"sample_id", sample.id}, {"verdict", a.verdict}};
      if (a.parse_error) record["parse_error"] = *a.parse_error;
      if (a.provider_error) record["provider_error"] = a.provider_error->what();
      verdict_log_->append(record);
    }
    verdicts.push_back(std::move(a.verdict));
  }
  return consensus(std::move(verdicts));
}

}  // namespace c3mod::moderate
