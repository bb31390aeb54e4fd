#pragma once

#include <filesystem>
#include <string>

namespace c3mod::annotate {

/// Versioned prompt templates. Placeholders use `{name}` syntax:
///   rag_step            {title} {comment}            (source language)
///   generation_step     {example} {title} {comment}  (translated)
///   moderation          {title} {comment} {annotation}
///   translate           {text}
/// The remaining members are fixed follow-up messages.
struct PromptSet {
  std::string name;
  std::string rag_step;
  std::string generation_step;
  std::string generation_example;
  std::string span_listing;
  std::string moderation;
  std::string moderation_reminder;
  std::string regeneration_reminder;
  std::string translate;

  /// The templates compiled into the binary from assets/prompts/v1.
  static const PromptSet& v1();
  /// Loads `<dir>/<member>.txt` for every member; the set is named after `dir`.
  static PromptSet load(const std::filesystem::path& dir);

  /// "<name>-<first 12 hex digits of a SHA-256 over all templates>".
  std::string version() const;
};

}  // namespace c3mod::annotate
