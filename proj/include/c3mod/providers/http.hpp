#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>

#include "c3mod/providers/provider.hpp"

namespace c3mod::providers {

/// Looks up an environment variable; injectable for tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

struct HttpEndpoint {
  std::string url;
  std::string api_key;
  std::chrono::milliseconds timeout{60000};
};

struct HttpChatConfig {
  HttpEndpoint endpoint;
  std::string model;
  std::string provider_name = "http-chat";

  /// Reads C3MOD_CHAT_URL, C3MOD_CHAT_KEY and C3MOD_CHAT_MODEL; `default_model`
  /// applies when the model variable is unset.
  static HttpChatConfig from_env(const EnvLookup& env, std::string provider_name,
                                 std::string default_model);
};

struct HttpSearchConfig {
  HttpEndpoint endpoint;

  /// Reads C3MOD_SEARCH_URL and C3MOD_SEARCH_KEY.
  static HttpSearchConfig from_env(const EnvLookup& env);
};

/// Chat-completion backend speaking the common JSON wire format: a POST of
/// {"model", "messages": [{"role", "content"}], "temperature"} answered with
/// {"choices": [{"message": {"content"}, "finish_reason"}]}.
class HttpChatProvider final : public ChatProvider {
 public:
  explicit HttpChatProvider(HttpChatConfig config);

  std::string name() const override { return config_.provider_name; }
  ChatResponse chat(const ChatRequest& request) override;

 private:
  HttpChatConfig config_;
};

/// Web search over GET <url>?query=<q>&count=<k>. Accepts {"results": [...]},
/// {"web": {"results": [...]}} or {"webPages": {"value": [...]}} bodies with
/// title|name, url|link and snippet|description fields.
class HttpSearchProvider final : public SearchProvider {
 public:
  explicit HttpSearchProvider(HttpSearchConfig config);

  std::string name() const override { return "http-search"; }
  std::vector<SearchResult> search(std::string_view query, int top_k) override;

 private:
  HttpSearchConfig config_;
};

/// Parses a Retry-After header given in seconds.
std::optional<std::chrono::milliseconds> parse_retry_after(std::string_view value);

/// Extracts the first choice's message content; throws ProviderError.
std::string extract_chat_content(std::string_view body);

std::vector<SearchResult> extract_search_results(std::string_view body, int top_k);

}  // namespace c3mod::providers
