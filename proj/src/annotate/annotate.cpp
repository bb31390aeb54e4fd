#include "c3mod/annotate/annotate.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "c3mod/text.hpp"

namespace c3mod::annotate {

using providers::ChatMessage;
using providers::Role;

std::string_view to_string(SpanLocation location) {
  return location == SpanLocation::Title ? "title" : "comment";
}

SpanLocation span_location_from_string(std::string_view s) {
  const auto key = text::to_lower_ascii(text::trim(s));
  if (key == "title" || key == "제목") return SpanLocation::Title;
  if (key == "comment" || key == "댓글") return SpanLocation::Comment;
  throw ParseError("unknown span location '" + std::string(s) + "'");
}

std::string_view to_string(RetrievalMode mode) {
  return mode == RetrievalMode::Explicit ? "explicit" : "provider-native";
}

RetrievalMode retrieval_mode_from_string(std::string_view s) {
  if (s == "explicit") return RetrievalMode::Explicit;
  if (s == "provider-native") return RetrievalMode::ProviderNative;
  throw ParseError("unknown retrieval mode '" + std::string(s) + "'");
}

void to_json(json& j, const CulturalSpan& s) {
  j = json{{"text", s.text}, {"location", to_string(s.location)}, {"aspect", to_string(s.aspect)}};
}

void from_json(const json& j, CulturalSpan& s) {
  s.text = j.at("text").get<std::string>();
  s.location = span_location_from_string(j.at("location").get<std::string>());
  s.aspect = category_from_string(j.at("aspect").get<std::string>());
}

void to_json(json& j, const CulturalAnnotation& a) {
  json entries = json::array();
  for (const auto& e : a.entries) {
    json sources = json::array();
    for (const auto& s : e.sources) {
      sources.push_back({{"title", s.title}, {"url", s.url}, {"snippet", s.snippet}});
    }
    entries.push_back({{"span", e.span},
                       {"heading", e.heading},
                       {"explanation", e.explanation},
                       {"sources", sources}});
  }
  j = json{{"sample_id", a.sample_id},
           {"prompt_version", a.prompt_version},
           {"rendered", a.rendered},
           {"entries", entries}};
}

void from_json(const json& j, CulturalAnnotation& a) {
  a.sample_id = j.at("sample_id").get<std::string>();
  a.prompt_version = j.at("prompt_version").get<std::string>();
  a.rendered = j.at("rendered").get<std::string>();
  a.entries.clear();
  for (const auto& e : j.at("entries")) {
    AnnotationEntry entry;
    entry.span = e.at("span").get<CulturalSpan>();
    entry.heading = e.value("heading", entry.span.text);
    entry.explanation = e.at("explanation").get<std::string>();
    for (const auto& s : e.value("sources", json::array())) {
      entry.sources.push_back({s.value("title", std::string{}), s.at("url").get<std::string>(),
                               s.value("snippet", std::string{})});
    }
    a.entries.push_back(std::move(entry));
  }
}

std::string render_entries(const std::vector<AnnotationEntry>& entries) {
  std::string out;
  for (const auto& e : entries) {
    if (!out.empty()) out += '\n';
    out += "- \"" + e.heading + "\": " + e.explanation;
  }
  return out;
}

bool asserts_verdict(std::string_view explanation) {
  auto body = text::trim(explanation);
  while (!body.empty() && (body.back() == '.' || body.back() == '!' || body.back() == '?')) {
    body.remove_suffix(1);
  }
  // Final sentence: text after the last terminator followed by whitespace.
  std::size_t start = 0;
  for (std::size_t i = 0; i + 1 < body.size(); ++i) {
    if ((body[i] == '.' || body[i] == '!' || body[i] == '?') &&
        std::isspace(static_cast<unsigned char>(body[i + 1]))) {
      start = i + 1;
    }
  }
  const auto last = text::to_lower_ascii(body.substr(start));
  static const std::regex verdict(
      R"((^|[^a-z])(offensive|inoffensive|offensiveness|hate speech|hateful)([^a-z]|$))");
  return std::regex_search(last, verdict);
}

bool span_grounded(const Sample& sample, const CulturalSpan& span) {
  if (span.text.empty()) return false;
  const auto in = [&](const std::string& field) {
    return field.find(span.text) != std::string::npos;
  };
  if (span.location == SpanLocation::Title) {
    return in(sample.title) || (sample.title_translated && in(*sample.title_translated));
  }
  return in(sample.comment) || (sample.comment_translated && in(*sample.comment_translated));
}

CulturalCategory aspect_from_model(std::string_view aspect) {
  const auto key = text::to_lower_ascii(aspect);
  if (key.find("internet") != std::string::npos || key.find("meme") != std::string::npos ||
      key.find("slang") != std::string::npos || key.find("밈") != std::string::npos) {
    return CulturalCategory::InternetCulture;
  }
  if (key.find("sentiment") != std::string::npos || key.find("정서") != std::string::npos) {
    return CulturalCategory::CulturalSentiment;
  }
  return CulturalCategory::CulturalKnowledge;
}

namespace {

std::string unquote(std::string_view s) {
  s = text::trim(s);
  for (std::string_view q : {"\"", "'", "`"}) {
    if (s.size() >= 2 && s.starts_with(q) && s.ends_with(q)) {
      return std::string(text::trim(s.substr(1, s.size() - 2)));
    }
  }
  if (s.starts_with("“") && s.ends_with("”") && s.size() >= 6) {
    return std::string(text::trim(s.substr(3, s.size() - 6)));
  }
  return std::string(s);
}

// Attempts to read `"heading": explanation` (optionally bulleted or bolded)
// from one line.
std::optional<GeneratedEntry> parse_entry_line(std::string_view line) {
  line = text::trim(line);
  for (std::string_view bullet : {"-", "*", "•"}) {
    if (line.starts_with(bullet) && !line.starts_with("**")) {
      line.remove_prefix(bullet.size());
      line = text::trim(line);
      break;
    }
  }
  const bool bold = line.starts_with("**");
  if (bold) line.remove_prefix(2);

  std::string heading;
  std::string_view rest;
  const auto close_quote = [&](std::string_view open, std::string_view close) -> bool {
    if (!line.starts_with(open)) return false;
    const auto end = line.find(close, open.size());
    if (end == std::string_view::npos) return false;
    heading = std::string(line.substr(open.size(), end - open.size()));
    rest = line.substr(end + close.size());
    return true;
  };
  if (!close_quote("\"", "\"") && !close_quote("“", "”")) {
    if (!bold) return std::nullopt;
    const auto end = line.find("**");
    if (end == std::string_view::npos) return std::nullopt;
    heading = std::string(line.substr(0, end));
    rest = line.substr(end);
  }
  if (rest.starts_with("**")) rest.remove_prefix(2);
  rest = text::trim(rest);
  // A parenthetical between heading and colon belongs to the heading.
  if (rest.starts_with("(")) {
    const auto close = rest.find(')');
    if (close == std::string_view::npos) return std::nullopt;
    heading += " " + std::string(rest.substr(0, close + 1));
    rest = text::trim(rest.substr(close + 1));
  }
  if (rest.starts_with("**")) rest = text::trim(rest.substr(2));
  if (!rest.starts_with(":")) return std::nullopt;
  rest = text::trim(rest.substr(1));
  heading = std::string(text::trim(heading));
  if (heading.empty()) return std::nullopt;
  return GeneratedEntry{heading, std::string(rest)};
}

bool is_echo_line(std::string_view line) {
  line = text::trim(line);
  return line.starts_with("Title:") || line.starts_with("Comment:") ||
         line.starts_with("Title (") || line.starts_with("Comment (");
}

std::optional<CulturalSpan> ground(const Sample& sample, const std::string& candidate,
                                   CulturalCategory aspect) {
  for (auto location : {SpanLocation::Comment, SpanLocation::Title}) {
    CulturalSpan span{candidate, location, aspect};
    if (span_grounded(sample, span)) return span;
  }
  return std::nullopt;
}

// Candidate span texts in a heading: the whole heading, then any parenthetical.
std::vector<std::string> heading_candidates(const std::string& heading) {
  std::vector<std::string> out{heading};
  const auto open = heading.find('(');
  const auto close = heading.rfind(')');
  if (open != std::string::npos && close != std::string::npos && close > open) {
    out.push_back(std::string(text::trim(heading.substr(open + 1, close - open - 1))));
    out.push_back(std::string(text::trim(heading.substr(0, open))));
  }
  return out;
}

}  // namespace

std::vector<GeneratedEntry> parse_generated_entries(std::string_view reply) {
  std::vector<GeneratedEntry> entries;
  for (auto line : text::split_lines(reply)) {
    if (text::trim(line).empty() || is_echo_line(line)) continue;
    if (auto entry = parse_entry_line(line)) {
      entries.push_back(std::move(*entry));
    } else if (!entries.empty()) {
      entries.back().explanation += " " + std::string(text::trim(line));
    }
  }
  for (auto& e : entries) e.explanation = std::string(text::trim(e.explanation));
  return entries;
}

std::vector<ListedSpan> parse_span_listing(std::string_view reply) {
  std::vector<ListedSpan> out;
  for (auto line : text::split_lines(reply)) {
    line = text::trim(line);
    if (line.size() < 4 || !text::iequals(line.substr(0, 4), "SPAN")) continue;
    std::vector<std::string> parts;
    std::string_view rest = line.substr(4);
    if (!text::trim(rest).starts_with("|")) continue;
    rest = text::trim(rest).substr(1);
    for (int i = 0; i < 2; ++i) {
      const auto bar = rest.find('|');
      if (bar == std::string_view::npos) break;
      parts.emplace_back(text::trim(rest.substr(0, bar)));
      rest = rest.substr(bar + 1);
    }
    if (parts.size() < 2) continue;  // "SPAN | none" and malformed lines
    out.push_back({parts[0], parts[1], unquote(rest)});
  }
  return out;
}

std::optional<CulturalAnnotation> MemoryAnnotationCache::get(const std::string& sample_id,
                                                             const std::string& key_version) {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(sample_id + '\x1f' + key_version);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void MemoryAnnotationCache::put(const std::string& key_version,
                                const CulturalAnnotation& annotation) {
  std::lock_guard lock(mutex_);
  entries_[annotation.sample_id + '\x1f' + key_version] = annotation;
}

FileAnnotationCache::FileAnnotationCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path FileAnnotationCache::path_for(const std::string& sample_id,
                                                    const std::string& key_version) const {
  return dir_ / (text::sha256_hex(sample_id + '\x1f' + key_version) + ".json");
}

std::mutex& FileAnnotationCache::lock_for(const std::string& key) {
  std::lock_guard guard(locks_guard_);
  auto& slot = locks_[key];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

std::optional<CulturalAnnotation> FileAnnotationCache::get(const std::string& sample_id,
                                                           const std::string& key_version) {
  const auto path = path_for(sample_id, key_version);
  std::lock_guard lock(lock_for(path.string()));
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  const auto doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) {
    spdlog::warn("ignoring corrupt annotation cache entry {}", path.string());
    return std::nullopt;
  }
  auto annotation = doc.at("annotation").get<CulturalAnnotation>();
  if (annotation.sample_id != sample_id) return std::nullopt;
  return annotation;
}

void FileAnnotationCache::put(const std::string& key_version,
                              const CulturalAnnotation& annotation) {
  const auto path = path_for(annotation.sample_id, key_version);
  std::lock_guard lock(lock_for(path.string()));
  const json doc{{"key_version", key_version}, {"annotation", annotation}};
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump(2, ' ', false, json::error_handler_t::replace) << '\n';
    if (!out) throw Error("cannot write annotation cache entry " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Annotator::Annotator(PromptSet prompts, providers::ChatHandle chat, providers::SearchHandle search,
                     AnnotatorOptions options, std::shared_ptr<AnnotationCache> cache)
    : prompts_(std::move(prompts)),
      prompt_version_(prompts_.version()),
      chat_(std::move(chat)),
      search_(std::move(search)),
      options_(options),
      cache_(std::move(cache)) {
  if (!chat_) throw ValidationError("annotator requires a chat provider");
  if (options_.mode == RetrievalMode::Explicit && !search_) {
    throw ValidationError("explicit retrieval mode requires a search provider");
  }
}

std::string Annotator::cache_version() const {
  return prompt_version_ + "/" + std::string(to_string(options_.mode));
}

providers::ChatRequest Annotator::request(std::string tag,
                                          std::vector<ChatMessage> messages) const {
  providers::ChatRequest req;
  req.model_id = options_.model_id;
  req.messages = std::move(messages);
  req.temperature = options_.temperature;
  req.max_output_chars = options_.max_output_chars;
  req.request_tag = std::move(tag);
  return req;
}

Sample Annotator::translate(const Sample& sample) const {
  validate_sample(sample);
  if (sample.has_translations()) return sample;
  Sample out = sample;
  const auto run = [&](const std::string& field, const std::string& source) -> std::string {
    if (source.empty()) return {};
    const auto prompt = text::substitute(prompts_.translate, {{"text", source}});
    auto response = chat_->chat(request("translate/" + field + "/" + sample.id,
                                        {ChatMessage{Role::User, prompt}}));
    return std::string(text::trim(response.content));
  };
  if (!out.title_translated) out.title_translated = run("title", sample.title);
  if (!out.comment_translated) out.comment_translated = run("comment", sample.comment);
  return out;
}

SpanDetection Annotator::detect_spans(const Sample& sample) const {
  validate_sample(sample);
  SpanDetection detection;
  if (text::utf8_length(text::trim(sample.comment)) < options_.min_comment_chars) {
    detection.skipped = true;
    return detection;
  }
  detection.rag_prompt =
      text::substitute(prompts_.rag_step, {{"title", sample.title}, {"comment", sample.comment}});
  if (options_.mode == RetrievalMode::Explicit) {
    detection.rag_prompt += "\n\n" + prompts_.span_listing;
  }
  const auto response = chat_->chat(
      request("annotate/detect/" + sample.id, {ChatMessage{Role::User, detection.rag_prompt}}));
  detection.rag_response = response.content;
  if (options_.mode != RetrievalMode::Explicit) return detection;

  std::set<std::pair<std::string, SpanLocation>> seen;
  for (const auto& listed : parse_span_listing(response.content)) {
    CulturalSpan span{listed.text, SpanLocation::Comment, aspect_from_model(listed.aspect)};
    try {
      span.location = span_location_from_string(listed.location);
    } catch (const ParseError&) {
    }
    if (!span_grounded(sample, span)) {
      // The model may have named the wrong field; accept the other one.
      span.location =
          span.location == SpanLocation::Title ? SpanLocation::Comment : SpanLocation::Title;
      if (!span_grounded(sample, span)) {
        ++detection.ungrounded;
        spdlog::warn("sample {}: dropping ungrounded span '{}'", sample.id, listed.text);
        continue;
      }
    }
    if (seen.emplace(span.text, span.location).second) detection.spans.push_back(std::move(span));
  }
  return detection;
}

std::vector<SearchResult> Annotator::retrieve_context(const CulturalSpan& span, int top_k) const {
  if (top_k < 1 || top_k > 10) throw ValidationError("top_k outside [1, 10]");
  if (!search_) throw ValidationError("no search provider configured");
  std::vector<SearchResult> out;
  std::set<std::string> urls;
  for (auto& result : search_->search(span.text, top_k)) {
    if (static_cast<int>(out.size()) >= top_k) break;
    if (urls.insert(result.url).second) out.push_back(std::move(result));
  }
  return out;
}

CulturalAnnotation Annotator::generate_annotation(const Sample& sample,
                                                  const SpanDetection& detection,
                                                  const std::vector<GroundedSpan>& grounded) const {
  if (!sample.has_translations()) {
    throw ValidationError("sample '" + sample.id + "' must be translated before annotation");
  }
  CulturalAnnotation annotation{sample.id, {}, {}, prompt_version_};
  const bool explicit_mode = options_.mode == RetrievalMode::Explicit;
  if (detection.skipped || (explicit_mode && grounded.empty())) return annotation;

  auto first_turn = detection.rag_prompt;
  if (explicit_mode) {
    first_turn += "\n\nSearch results:";
    for (const auto& g : grounded) {
      first_turn += "\n\"" + g.span.text + "\":";
      if (g.results.empty()) first_turn += " (no results)";
      for (std::size_t i = 0; i < g.results.size(); ++i) {
        const auto& r = g.results[i];
        first_turn += "\n[" + std::to_string(i + 1) + "] " + r.title + " (" + r.url + "): " + r.snippet;
      }
    }
  }
  const auto second_turn = text::substitute(
      prompts_.generation_step, {{"example", prompts_.generation_example},
                                 {"title", *sample.title_translated},
                                 {"comment", *sample.comment_translated}});
  std::vector<ChatMessage> messages{ChatMessage{Role::User, first_turn},
                                    ChatMessage{Role::Assistant, detection.rag_response},
                                    ChatMessage{Role::User, second_turn}};

  const auto base_tag = "annotate/generate/" + sample.id;
  for (int attempt = 0; attempt <= options_.max_regenerations; ++attempt) {
    const auto tag = attempt == 0 ? base_tag : base_tag + "#regen" + std::to_string(attempt);
    const auto reply = chat_->chat(request(tag, messages)).content;
    const auto generated = parse_generated_entries(reply);

    std::vector<AnnotationEntry> entries;
    if (explicit_mode) {
      std::vector<bool> used(generated.size(), false);
      std::vector<std::optional<std::size_t>> match(grounded.size());
      for (std::size_t s = 0; s < grounded.size(); ++s) {
        for (std::size_t g = 0; g < generated.size(); ++g) {
          if (!used[g] && generated[g].heading.find(grounded[s].span.text) != std::string::npos) {
            match[s] = g;
            used[g] = true;
            break;
          }
        }
      }
      std::size_t next = 0;
      for (std::size_t s = 0; s < grounded.size(); ++s) {
        if (match[s]) continue;
        while (next < generated.size() && used[next]) ++next;
        if (next == generated.size()) break;
        match[s] = next;
        used[next] = true;
      }
      for (std::size_t s = 0; s < grounded.size(); ++s) {
        if (!match[s]) continue;
        const auto& g = generated[*match[s]];
        entries.push_back({grounded[s].span, g.heading, g.explanation, grounded[s].results});
      }
    } else {
      std::set<std::string> seen;
      for (const auto& g : generated) {
        for (const auto& candidate : heading_candidates(g.heading)) {
          auto span = ground(sample, candidate, CulturalCategory::CulturalKnowledge);
          if (!span) continue;
          if (seen.insert(span->text).second) {
            entries.push_back({std::move(*span), g.heading, g.explanation, {}});
          }
          break;
        }
      }
    }

    const bool objective = std::none_of(entries.begin(), entries.end(), [](const auto& e) {
      return asserts_verdict(e.explanation);
    });
    if (objective) {
      annotation.entries = std::move(entries);
      annotation.rendered = render_entries(annotation.entries);
      return annotation;
    }
    spdlog::info("sample {}: annotation asserted a verdict (attempt {}), regenerating", sample.id,
                 attempt + 1);
    messages.push_back(ChatMessage{Role::Assistant, reply});
    messages.push_back(ChatMessage{Role::User, prompts_.regeneration_reminder});
  }
  throw AnnotationRejected("sample '" + sample.id + "': annotation failed the objectivity guard after " +
                           std::to_string(options_.max_regenerations) + " regenerations");
}

CulturalAnnotation Annotator::annotate(const Sample& sample) const {
  if (!sample.has_translations()) {
    throw ValidationError("sample '" + sample.id + "' must be translated before annotation");
  }
  const auto version = cache_version();
  if (cache_) {
    if (auto hit = cache_->get(sample.id, version)) return *hit;
  }
  const auto detection = detect_spans(sample);
  std::vector<GroundedSpan> grounded;
  if (options_.mode == RetrievalMode::Explicit) {
    for (const auto& span : detection.spans) {
      grounded.push_back({span, retrieve_context(span, options_.top_k)});
    }
  }
  auto annotation = generate_annotation(sample, detection, grounded);
  if (cache_) cache_->put(version, annotation);
  return annotation;
}

}  // namespace c3mod::annotate
