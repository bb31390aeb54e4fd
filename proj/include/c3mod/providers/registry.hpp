#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>

#include "c3mod/providers/http.hpp"
#include "c3mod/providers/retry.hpp"
#include "c3mod/providers/scripted.hpp"

namespace c3mod::providers {

struct ProviderOptions {
  std::optional<std::filesystem::path> fixture;  // required by "scripted"
  CallPolicy call_policy;
  std::chrono::milliseconds timeout{60000};
  EnvLookup env = process_env();
};

/// Resolves provider names to shared handles. Names: "scripted" (fixture
/// replay), "gpt-4o-like", "claude-like", "gemini-like" (live chat backends
/// configured through C3MOD_CHAT_*), and for search additionally "live"
/// (C3MOD_SEARCH_*). Live handles are wrapped with retry and concurrency
/// limits; the scripted handle is shared per registry.
class ProviderRegistry {
 public:
  explicit ProviderRegistry(ProviderOptions options);

  ChatHandle chat(std::string_view name);
  SearchHandle search(std::string_view name);

  /// The shared scripted backend, loading it on first use.
  std::shared_ptr<ScriptedProvider> scripted();

  static bool is_known_chat(std::string_view name);
  static bool is_known_search(std::string_view name);

 private:
  ProviderOptions options_;
  std::mutex mutex_;
  std::shared_ptr<ScriptedProvider> scripted_;
  std::map<std::string, ChatHandle, std::less<>> chat_;
  SearchHandle live_search_;
};

}  // namespace c3mod::providers
