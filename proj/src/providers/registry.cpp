#include "c3mod/providers/registry.hpp"

#include <array>

namespace c3mod::providers {
namespace {

struct LiveChatName {
  std::string_view name;
  std::string_view default_model;
};

constexpr std::array kLiveChat{
    LiveChatName{"gpt-4o-like", "gpt-4o"},
    LiveChatName{"claude-like", "claude-3-haiku"},
    LiveChatName{"gemini-like", "gemini-1.5"},
};

}  // namespace

ProviderRegistry::ProviderRegistry(ProviderOptions options) : options_(std::move(options)) {}

bool ProviderRegistry::is_known_chat(std::string_view name) {
  if (name == "scripted") return true;
  for (const auto& live : kLiveChat) {
    if (live.name == name) return true;
  }
  return false;
}

bool ProviderRegistry::is_known_search(std::string_view name) {
  return name == "scripted" || name == "live";
}

std::shared_ptr<ScriptedProvider> ProviderRegistry::scripted() {
  std::lock_guard lock(mutex_);
  if (!scripted_) {
    if (!options_.fixture) throw ValidationError("provider 'scripted' requires a fixture path");
    scripted_ = ScriptedProvider::from_fixture(*options_.fixture);
  }
  return scripted_;
}

ChatHandle ProviderRegistry::chat(std::string_view name) {
  if (name == "scripted") return scripted();
  std::lock_guard lock(mutex_);
  if (const auto it = chat_.find(name); it != chat_.end()) return it->second;
  for (const auto& live : kLiveChat) {
    if (live.name != name) continue;
    auto config = HttpChatConfig::from_env(options_.env, std::string(live.name),
                                           std::string(live.default_model));
    config.endpoint.timeout = options_.timeout;
    auto handle = std::make_shared<RetryingChatProvider>(
        std::make_shared<HttpChatProvider>(std::move(config)), options_.call_policy);
    chat_.emplace(std::string(name), handle);
    return handle;
  }
  throw ValidationError("unknown chat provider '" + std::string(name) + "'");
}

SearchHandle ProviderRegistry::search(std::string_view name) {
  if (name == "scripted") return scripted();
  if (name != "live") throw ValidationError("unknown search provider '" + std::string(name) + "'");
  std::lock_guard lock(mutex_);
  if (!live_search_) {
    auto config = HttpSearchConfig::from_env(options_.env);
    config.endpoint.timeout = options_.timeout;
    live_search_ = std::make_shared<RetryingSearchProvider>(
        std::make_shared<HttpSearchProvider>(std::move(config)), options_.call_policy);
  }
  return live_search_;
}

}  // namespace c3mod::providers
