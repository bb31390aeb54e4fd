#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <string>
#include <variant>

#include "c3mod/providers/provider.hpp"

namespace c3mod::providers {

/// Deterministic chat + search backend answering from a JSON Lines fixture.
///
/// Each fixture line is one object:
///   {"tag": "...", "kind": "chat",   "response": "text"}
///   {"tag": "...", "kind": "search", "response": [{"title", "url", "snippet"}, ...]}
/// Chat entries are keyed by ChatRequest::request_tag, search entries by the
/// query string. An entry may carry {"error": "<kind>"} instead of a response,
/// where <kind> is one of timeout, rate_limited, transport, content_filtered,
/// bad_response; the provider then fails with that error on every call.
/// Unknown tags and queries fail with ProviderError(BadResponse).
class ScriptedProvider final : public ChatProvider, public SearchProvider {
 public:
  static std::shared_ptr<ScriptedProvider> from_fixture(const std::filesystem::path& path);
  /// Same format as the fixture file; `origin` is used in error messages.
  static std::shared_ptr<ScriptedProvider> from_jsonl(std::string_view jsonl,
                                                      std::string origin = "<fixture>");

  std::string name() const override { return "scripted"; }
  ChatResponse chat(const ChatRequest& request) override;
  std::vector<SearchResult> search(std::string_view query, int top_k) override;

  std::size_t chat_entries() const { return chat_.size(); }
  std::size_t search_entries() const { return search_.size(); }
  std::uint64_t chat_calls() const { return chat_calls_.load(); }
  std::uint64_t search_calls() const { return search_calls_.load(); }

 private:
  using ChatEntry = std::variant<std::string, ProviderErrorKind>;
  using SearchEntry = std::variant<std::vector<SearchResult>, ProviderErrorKind>;

  std::map<std::string, ChatEntry, std::less<>> chat_;
  std::map<std::string, SearchEntry, std::less<>> search_;
  std::atomic<std::uint64_t> chat_calls_{0};
  std::atomic<std::uint64_t> search_calls_{0};
};

}  // namespace c3mod::providers
