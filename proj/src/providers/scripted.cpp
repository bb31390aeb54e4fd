#include "c3mod/providers/scripted.hpp"

#include <fstream>
#include <sstream>

#include "c3mod/serialization.hpp"
#include "c3mod/text.hpp"

namespace c3mod::providers {
namespace {

ProviderErrorKind error_kind_from_string(std::string_view s) {
  for (auto kind : {ProviderErrorKind::Timeout, ProviderErrorKind::RateLimited,
                    ProviderErrorKind::Transport, ProviderErrorKind::ContentFiltered,
                    ProviderErrorKind::BadResponse}) {
    if (to_string(kind) == s) return kind;
  }
  throw ParseError("unknown error kind '" + std::string(s) + "'");
}

std::vector<SearchResult> parse_results(const json& array) {
  if (!array.is_array()) throw ParseError("search response must be an array");
  std::vector<SearchResult> results;
  for (const auto& item : array) {
    if (!item.is_object()) throw ParseError("search result must be an object");
    SearchResult r{item.value("title", std::string{}), item.at("url").get<std::string>(),
                   item.value("snippet", std::string{})};
    if (!is_absolute_url(r.url)) throw ParseError("invalid url '" + r.url + "'");
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_fixture(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open fixture " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_jsonl(buffer.str(), path.string());
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::from_jsonl(std::string_view jsonl,
                                                               std::string origin) {
  auto provider = std::make_shared<ScriptedProvider>();
  std::size_t number = 0;
  for (auto line : text::split_lines(jsonl)) {
    ++number;
    if (text::trim(line).empty()) continue;
    const auto where = origin + ":" + std::to_string(number);
    try {
      const auto entry = json::parse(line);
      if (!entry.is_object()) throw ParseError("entry must be an object");
      const auto tag = entry.at("tag").get<std::string>();
      const auto kind = entry.at("kind").get<std::string>();
      const bool has_error = entry.contains("error");
      if (!has_error && !entry.contains("response")) throw ParseError("missing response");
      if (kind == "chat") {
        ChatEntry value = has_error
                              ? ChatEntry{error_kind_from_string(entry["error"].get<std::string>())}
                              : ChatEntry{entry["response"].get<std::string>()};
        if (!provider->chat_.emplace(tag, std::move(value)).second) {
          throw ParseError("duplicate chat tag '" + tag + "'");
        }
      } else if (kind == "search") {
        SearchEntry value =
            has_error ? SearchEntry{error_kind_from_string(entry["error"].get<std::string>())}
                      : SearchEntry{parse_results(entry["response"])};
        if (!provider->search_.emplace(tag, std::move(value)).second) {
          throw ParseError("duplicate search tag '" + tag + "'");
        }
      } else {
        throw ParseError("kind must be \"chat\" or \"search\"");
      }
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const json::exception& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  return provider;
}

ChatResponse ScriptedProvider::chat(const ChatRequest& request) {
  ++chat_calls_;
  validate_request(request);
  const auto it = chat_.find(request.request_tag);
  if (it == chat_.end()) {
    throw ProviderError(ProviderErrorKind::BadResponse,
                        "no scripted response for tag '" + request.request_tag + "'");
  }
  if (const auto* kind = std::get_if<ProviderErrorKind>(&it->second)) {
    throw ProviderError(*kind, "scripted failure for tag '" + request.request_tag + "'");
  }
  auto content = std::get<std::string>(it->second);
  text::truncate_utf8(content, request.max_output_chars);
  return ChatResponse{std::move(content), name(), 0};
}

std::vector<SearchResult> ScriptedProvider::search(std::string_view query, int top_k) {
  ++search_calls_;
  validate_search_args(query, top_k);
  const auto it = search_.find(query);
  if (it == search_.end()) {
    throw ProviderError(ProviderErrorKind::BadResponse,
                        "no scripted results for query '" + std::string(query) + "'");
  }
  if (const auto* kind = std::get_if<ProviderErrorKind>(&it->second)) {
    throw ProviderError(*kind, "scripted failure for query '" + std::string(query) + "'");
  }
  auto results = std::get<std::vector<SearchResult>>(it->second);
  if (results.size() > static_cast<std::size_t>(top_k)) results.resize(top_k);
  return results;
}

}  // namespace c3mod::providers
