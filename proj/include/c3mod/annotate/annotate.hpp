#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "c3mod/annotate/prompts.hpp"
#include "c3mod/domain.hpp"
#include "c3mod/providers/provider.hpp"
#include "c3mod/serialization.hpp"

namespace c3mod::annotate {

using providers::SearchResult;

enum class SpanLocation { Title, Comment };

std::string_view to_string(SpanLocation location);
SpanLocation span_location_from_string(std::string_view s);

struct CulturalSpan {
  std::string text;
  SpanLocation location = SpanLocation::Comment;
  CulturalCategory aspect = CulturalCategory::CulturalKnowledge;

  friend bool operator==(const CulturalSpan&, const CulturalSpan&) = default;
};

struct AnnotationEntry {
  CulturalSpan span;
  /// How the model referred to the span (often its English rendering).
  std::string heading;
  std::string explanation;
  std::vector<SearchResult> sources;

  friend bool operator==(const AnnotationEntry&, const AnnotationEntry&) = default;
};

struct CulturalAnnotation {
  std::string sample_id;
  std::vector<AnnotationEntry> entries;
  std::string rendered;
  std::string prompt_version;

  friend bool operator==(const CulturalAnnotation&, const CulturalAnnotation&) = default;
};

void to_json(json& j, const CulturalSpan& s);
void from_json(const json& j, CulturalSpan& s);
void to_json(json& j, const CulturalAnnotation& a);
void from_json(const json& j, CulturalAnnotation& a);

/// Dash-prefixed `- "<heading>": <explanation>` lines, one per entry; empty for
/// no entries.
std::string render_entries(const std::vector<AnnotationEntry>& entries);

/// Lexical objectivity guard: true when the final sentence of `explanation`
/// states an offensiveness verdict (mentions offensive / not offensive /
/// inoffensive / hate speech / hateful).
bool asserts_verdict(std::string_view explanation);

/// True when `span` occurs verbatim in the field it names (source or
/// translated text).
bool span_grounded(const Sample& sample, const CulturalSpan& span);

/// Maps a model's free-form aspect name onto the three categories; anything
/// unrecognized becomes CulturalKnowledge.
CulturalCategory aspect_from_model(std::string_view aspect);

enum class RetrievalMode { Explicit, ProviderNative };

std::string_view to_string(RetrievalMode mode);
RetrievalMode retrieval_mode_from_string(std::string_view s);

class AnnotationRejected : public Error {
 public:
  using Error::Error;
};

struct SpanDetection {
  std::vector<CulturalSpan> spans;
  /// Spans the model named that do not occur in the text; they were dropped.
  std::size_t ungrounded = 0;
  /// The first-turn prompt and the model's reply, reused by generation.
  std::string rag_prompt;
  std::string rag_response;
  bool skipped = false;
};

struct GroundedSpan {
  CulturalSpan span;
  std::vector<SearchResult> results;
};

/// Parsed `"<heading>": <explanation>` entry from a generation reply.
struct GeneratedEntry {
  std::string heading;
  std::string explanation;
};

std::vector<GeneratedEntry> parse_generated_entries(std::string_view reply);

/// Parses `SPAN | <location> | <aspect> | <text>` lines.
struct ListedSpan {
  std::string location;
  std::string aspect;
  std::string text;
};
std::vector<ListedSpan> parse_span_listing(std::string_view reply);

class AnnotationCache {
 public:
  virtual ~AnnotationCache() = default;
  virtual std::optional<CulturalAnnotation> get(const std::string& sample_id,
                                                const std::string& key_version) = 0;
  virtual void put(const std::string& key_version, const CulturalAnnotation& annotation) = 0;
};

class MemoryAnnotationCache final : public AnnotationCache {
 public:
  std::optional<CulturalAnnotation> get(const std::string& sample_id,
                                        const std::string& key_version) override;
  void put(const std::string& key_version, const CulturalAnnotation& annotation) override;

 private:
  std::mutex mutex_;
  std::map<std::string, CulturalAnnotation> entries_;
};

/// One JSON document per (sample_id, version) under `dir`, named by the SHA-256
/// of the pair. Writes go through a temp file and rename, serialized per key.
class FileAnnotationCache final : public AnnotationCache {
 public:
  explicit FileAnnotationCache(std::filesystem::path dir);

  std::optional<CulturalAnnotation> get(const std::string& sample_id,
                                        const std::string& key_version) override;
  void put(const std::string& key_version, const CulturalAnnotation& annotation) override;

  std::filesystem::path path_for(const std::string& sample_id, const std::string& key_version) const;

 private:
  std::mutex& lock_for(const std::string& key);

  std::filesystem::path dir_;
  std::mutex locks_guard_;
  std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

struct AnnotatorOptions {
  RetrievalMode mode = RetrievalMode::Explicit;
  int top_k = 5;
  double temperature = 0.3;
  std::string model_id;
  std::size_t max_output_chars = 8192;
  int max_regenerations = 2;
  /// Comments shorter than this many code points skip span detection.
  std::size_t min_comment_chars = 2;
};

/// Step 1: translation and objective cultural-context annotation. Never reads
/// or produces verdicts.
class Annotator {
 public:
  Annotator(PromptSet prompts, providers::ChatHandle chat, providers::SearchHandle search,
            AnnotatorOptions options = {}, std::shared_ptr<AnnotationCache> cache = nullptr);

  /// Fills missing translations; no provider call when both are present.
  Sample translate(const Sample& sample) const;

  SpanDetection detect_spans(const Sample& sample) const;

  /// Up to top_k search results for the span, deduplicated by URL.
  std::vector<SearchResult> retrieve_context(const CulturalSpan& span, int top_k) const;

  /// Second turn of the annotation conversation. Requires translations.
  CulturalAnnotation generate_annotation(const Sample& sample, const SpanDetection& detection,
                                         const std::vector<GroundedSpan>& grounded) const;

  /// Full Step 1 for a translated sample, served from the cache when present.
  CulturalAnnotation annotate(const Sample& sample) const;

  /// Prompt version plus retrieval mode; the cache key component.
  std::string cache_version() const;
  const std::string& prompt_version() const { return prompt_version_; }
  const PromptSet& prompts() const { return prompts_; }
  const AnnotatorOptions& options() const { return options_; }

 private:
  providers::ChatRequest request(std::string tag,
                                 std::vector<providers::ChatMessage> messages) const;

  PromptSet prompts_;
  std::string prompt_version_;
  providers::ChatHandle chat_;
  providers::SearchHandle search_;
  AnnotatorOptions options_;
  std::shared_ptr<AnnotationCache> cache_;
};

}  // namespace c3mod::annotate
