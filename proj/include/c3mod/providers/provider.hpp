#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "c3mod/domain.hpp"

namespace c3mod::providers {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::size_t max_output_chars = 8192;
  /// Stable identifier of the logical call; scripted providers answer by it.
  std::string request_tag;
};

/// Throws ValidationError unless messages are nonempty, the first non-system
/// message comes from the user, temperature lies in [0, 2] and the output
/// budget is positive.
void validate_request(const ChatRequest& request);

struct ChatResponse {
  std::string content;
  std::string provider_name;
  std::uint64_t latency_ms = 0;
};

struct SearchResult {
  std::string title;
  std::string url;
  std::string snippet;

  friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

/// Absolute URL with a scheme and a nonempty authority.
bool is_absolute_url(std::string_view url);

enum class ProviderErrorKind { Timeout, RateLimited, Transport, ContentFiltered, BadResponse };

std::string_view to_string(ProviderErrorKind kind);

/// True for failures worth another attempt.
constexpr bool is_transient(ProviderErrorKind kind) {
  return kind == ProviderErrorKind::Timeout || kind == ProviderErrorKind::RateLimited ||
         kind == ProviderErrorKind::Transport;
}

class ProviderError : public Error {
 public:
  ProviderError(ProviderErrorKind kind, const std::string& message,
                std::optional<std::chrono::milliseconds> retry_after = std::nullopt,
                int attempts = 1);

  ProviderErrorKind kind() const { return kind_; }
  std::optional<std::chrono::milliseconds> retry_after() const { return retry_after_; }
  int attempts() const { return attempts_; }
  /// The message without the kind prefix.
  const std::string& detail() const { return detail_; }

 private:
  ProviderErrorKind kind_;
  std::string detail_;
  std::optional<std::chrono::milliseconds> retry_after_;
  int attempts_;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string name() const = 0;
  /// Throws ProviderError on backend failure.
  virtual ChatResponse chat(const ChatRequest& request) = 0;
};

class SearchProvider {
 public:
  virtual ~SearchProvider() = default;
  virtual std::string name() const = 0;
  /// At most `top_k` results in backend order. Throws ProviderError on backend
  /// failure and ValidationError on an empty query or top_k outside [1, 20].
  virtual std::vector<SearchResult> search(std::string_view query, int top_k) = 0;
};

using ChatHandle = std::shared_ptr<ChatProvider>;
using SearchHandle = std::shared_ptr<SearchProvider>;

inline constexpr int kMaxSearchResults = 20;

void validate_search_args(std::string_view query, int top_k);

}  // namespace c3mod::providers
