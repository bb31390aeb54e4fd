#include "c3mod/providers/provider.hpp"

#include <regex>

#include "c3mod/text.hpp"

namespace c3mod::providers {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System:
      return "system";
    case Role::User:
      return "user";
    case Role::Assistant:
      return "assistant";
  }
  return "user";
}

void validate_request(const ChatRequest& request) {
  if (request.messages.empty()) throw ValidationError("chat request has no messages");
  for (const auto& message : request.messages) {
    if (message.role == Role::System) continue;
    if (message.role != Role::User) {
      throw ValidationError("first non-system message must come from the user");
    }
    break;
  }
  if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
    throw ValidationError("temperature outside [0, 2]");
  }
  if (request.max_output_chars == 0) throw ValidationError("max_output_chars must be positive");
}

bool is_absolute_url(std::string_view url) {
  static const std::regex pattern(R"(^[A-Za-z][A-Za-z0-9+.\-]*://[^\s/?#]+([/?#][^\s]*)?$)");
  return std::regex_match(url.begin(), url.end(), pattern);
}

std::string_view to_string(ProviderErrorKind kind) {
  switch (kind) {
    case ProviderErrorKind::Timeout:
      return "timeout";
    case ProviderErrorKind::RateLimited:
      return "rate_limited";
    case ProviderErrorKind::Transport:
      return "transport";
    case ProviderErrorKind::ContentFiltered:
      return "content_filtered";
    case ProviderErrorKind::BadResponse:
      return "bad_response";
  }
  return "transport";
}

ProviderError::ProviderError(ProviderErrorKind kind, const std::string& message,
                             std::optional<std::chrono::milliseconds> retry_after, int attempts)
    : Error(std::string(to_string(kind)) + ": " + message),
      kind_(kind),
      detail_(message),
      retry_after_(retry_after),
      attempts_(attempts) {}

void validate_search_args(std::string_view query, int top_k) {
  if (text::trim(query).empty()) throw ValidationError("search query empty");
  if (top_k < 1 || top_k > kMaxSearchResults) throw ValidationError("top_k outside [1, 20]");
}

}  // namespace c3mod::providers
