#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "c3mod/pipeline/pipeline.hpp"
#include "c3mod/providers/http.hpp"
#include "c3mod/providers/registry.hpp"

namespace c3mod::interface {

struct ServerSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  /// Console assets served under /ui when set.
  std::optional<std::filesystem::path> ui_dir;
};

struct AppConfig {
  std::filesystem::path runs_root = "runs";
  pipeline::RunConfig run;
  std::optional<std::filesystem::path> fixture;
  std::chrono::milliseconds provider_timeout{60000};
  providers::RetryPolicy retry;
  int provider_concurrency = 4;
  std::uint64_t seed = 0;
  ServerSettings server;
  /// reviewer id -> bearer token. Empty disables authentication.
  std::map<std::string, std::string> reviewer_tokens;
};

/// Defaults, then the INI file (if any), then C3MOD_<SECTION>_<KEY>
/// environment variables. Sections: [run], [providers], [server], [reviewers].
///
///   [run]
///   moderator_providers = gpt-4o-like, claude-like, gemini-like
///   retrieval_mode = provider-native
///
///   [reviewers]
///   alice = s3cret
///
/// Throws ValidationError on unknown keys or malformed values.
AppConfig load_config(const std::optional<std::filesystem::path>& file,
                      const providers::EnvLookup& env = providers::process_env());

providers::ProviderOptions provider_options(const AppConfig& config);

}  // namespace c3mod::interface
