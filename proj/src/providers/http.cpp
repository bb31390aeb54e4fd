#include "c3mod/providers/http.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <cstdlib>

#include "c3mod/serialization.hpp"
#include "c3mod/text.hpp"

namespace c3mod::providers {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always begins with '/'
};

SplitUrl split_url(const std::string& url) {
  if (!is_absolute_url(url)) throw ValidationError("invalid endpoint url '" + url + "'");
  const auto scheme_end = url.find("://") + 3;
  const auto path_start = url.find_first_of("/?#", scheme_end);
  if (path_start == std::string::npos) return {url, "/"};
  auto path = url.substr(path_start);
  if (path.front() != '/') path.insert(path.begin(), '/');
  return {url.substr(0, path_start), path};
}

std::unique_ptr<httplib::Client> make_client(const HttpEndpoint& endpoint, const SplitUrl& url) {
  auto client = std::make_unique<httplib::Client>(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
  client->set_connection_timeout(secs.count(), usecs.count());
  client->set_read_timeout(secs.count(), usecs.count());
  client->set_write_timeout(secs.count(), usecs.count());
  if (!endpoint.api_key.empty()) client->set_bearer_token_auth(endpoint.api_key);
  return client;
}

[[noreturn]] void throw_transport(const httplib::Error error) {
  const auto message = httplib::to_string(error);
  if (error == httplib::Error::Read || error == httplib::Error::Write ||
      error == httplib::Error::ConnectionTimeout) {
    // cpp-httplib reports an elapsed read/write deadline as a Read/Write error.
    throw ProviderError(ProviderErrorKind::Timeout, message);
  }
  throw ProviderError(ProviderErrorKind::Transport, message);
}

void check_status(const httplib::Result& result) {
  if (!result) throw_transport(result.error());
  const int status = result->status;
  if (status >= 200 && status < 300) return;
  const auto body = result->body.substr(0, 256);
  if (status == 429) {
    std::optional<std::chrono::milliseconds> retry_after;
    if (result->has_header("Retry-After")) {
      retry_after = parse_retry_after(result->get_header_value("Retry-After"));
    }
    throw ProviderError(ProviderErrorKind::RateLimited, "HTTP 429: " + body, retry_after);
  }
  if (status == 408 || status == 504) {
    throw ProviderError(ProviderErrorKind::Timeout, "HTTP " + std::to_string(status));
  }
  if (status >= 500) {
    throw ProviderError(ProviderErrorKind::Transport, "HTTP " + std::to_string(status) + ": " + body);
  }
  if (result->body.find("content_filter") != std::string::npos) {
    throw ProviderError(ProviderErrorKind::ContentFiltered, "HTTP " + std::to_string(status));
  }
  throw ProviderError(ProviderErrorKind::BadResponse, "HTTP " + std::to_string(status) + ": " + body);
}

std::string first_string(const json& obj, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    if (obj.contains(key) && obj[key].is_string()) return obj[key].get<std::string>();
  }
  return {};
}

}  // namespace

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* value = std::getenv(name.c_str()); value != nullptr && *value != '\0') {
      return std::string(value);
    }
    return std::nullopt;
  };
}

HttpChatConfig HttpChatConfig::from_env(const EnvLookup& env, std::string provider_name,
                                        std::string default_model) {
  HttpChatConfig config;
  config.provider_name = std::move(provider_name);
  config.endpoint.url = env("C3MOD_CHAT_URL").value_or("");
  config.endpoint.api_key = env("C3MOD_CHAT_KEY").value_or("");
  config.model = env("C3MOD_CHAT_MODEL").value_or(std::move(default_model));
  return config;
}

HttpSearchConfig HttpSearchConfig::from_env(const EnvLookup& env) {
  HttpSearchConfig config;
  config.endpoint.url = env("C3MOD_SEARCH_URL").value_or("");
  config.endpoint.api_key = env("C3MOD_SEARCH_KEY").value_or("");
  return config;
}

std::optional<std::chrono::milliseconds> parse_retry_after(std::string_view value) {
  const std::string s(text::trim(value));
  char* end = nullptr;
  const double seconds = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !(seconds >= 0)) return std::nullopt;
  return std::chrono::milliseconds{static_cast<std::int64_t>(seconds * 1000.0)};
}

std::string extract_chat_content(std::string_view body) {
  const auto doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ProviderError(ProviderErrorKind::BadResponse, "response is not a JSON object");
  }
  if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
    throw ProviderError(ProviderErrorKind::BadResponse, "response has no choices");
  }
  const auto& choice = doc["choices"][0];
  if (choice.is_object() && choice.value("finish_reason", json()).is_string() &&
      choice["finish_reason"] == "content_filter") {
    throw ProviderError(ProviderErrorKind::ContentFiltered, "completion was filtered");
  }
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object() ||
      !choice["message"].contains("content") || !choice["message"]["content"].is_string()) {
    throw ProviderError(ProviderErrorKind::BadResponse, "first choice has no message content");
  }
  return choice["message"]["content"].get<std::string>();
}

std::vector<SearchResult> extract_search_results(std::string_view body, int top_k) {
  const auto doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ProviderError(ProviderErrorKind::BadResponse, "search response is not a JSON object");
  }
  const json* items = nullptr;
  if (doc.contains("results") && doc["results"].is_array()) {
    items = &doc["results"];
  } else if (doc.contains("web") && doc["web"].is_object() && doc["web"].contains("results")) {
    items = &doc["web"]["results"];
  } else if (doc.contains("webPages") && doc["webPages"].is_object() &&
             doc["webPages"].contains("value")) {
    items = &doc["webPages"]["value"];
  }
  if (items == nullptr || !items->is_array()) {
    throw ProviderError(ProviderErrorKind::BadResponse, "search response has no result list");
  }
  std::vector<SearchResult> results;
  for (const auto& item : *items) {
    if (static_cast<int>(results.size()) >= top_k) break;
    if (!item.is_object()) continue;
    SearchResult r{first_string(item, {"title", "name"}), first_string(item, {"url", "link"}),
                   first_string(item, {"snippet", "description"})};
    if (!is_absolute_url(r.url)) continue;
    results.push_back(std::move(r));
  }
  return results;
}

HttpChatProvider::HttpChatProvider(HttpChatConfig config) : config_(std::move(config)) {
  if (config_.endpoint.url.empty()) {
    throw ValidationError("chat endpoint url not configured (set C3MOD_CHAT_URL)");
  }
  split_url(config_.endpoint.url);
}

ChatResponse HttpChatProvider::chat(const ChatRequest& request) {
  validate_request(request);
  const auto url = split_url(config_.endpoint.url);
  auto client = make_client(config_.endpoint, url);

  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  const json body{{"model", request.model_id.empty() ? config_.model : request.model_id},
                  {"messages", messages},
                  {"temperature", request.temperature}};

  const auto started = std::chrono::steady_clock::now();
  const auto result = client->Post(url.path, dump_line(body), "application/json");
  check_status(result);
  auto content = extract_chat_content(result->body);
  text::truncate_utf8(content, request.max_output_chars);
  const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  return ChatResponse{std::move(content), name(), static_cast<std::uint64_t>(latency.count())};
}

HttpSearchProvider::HttpSearchProvider(HttpSearchConfig config) : config_(std::move(config)) {
  if (config_.endpoint.url.empty()) {
    throw ValidationError("search endpoint url not configured (set C3MOD_SEARCH_URL)");
  }
  split_url(config_.endpoint.url);
}

std::vector<SearchResult> HttpSearchProvider::search(std::string_view query, int top_k) {
  validate_search_args(query, top_k);
  const auto url = split_url(config_.endpoint.url);
  auto client = make_client(config_.endpoint, url);
  const httplib::Params params{{"query", std::string(query)}, {"count", std::to_string(top_k)}};
  const auto result = client->Get(url.path, params, httplib::Headers{});
  check_status(result);
  return extract_search_results(result->body, top_k);
}

}  // namespace c3mod::providers
