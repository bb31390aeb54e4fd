#include "c3mod/providers/retry.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <thread>

namespace c3mod::providers {
namespace {

Sleeper default_sleeper(Sleeper sleep) {
  if (sleep) return sleep;
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

template <typename Call>
auto call_with_retry(const CallPolicy& policy, FullJitterBackoff& backoff,
                     ConcurrencyLimit& limit, std::string_view what, Call&& call) {
  const int budget = std::max(1, policy.retry.max_attempts);
  for (int attempt = 1;; ++attempt) {
    try {
      ConcurrencyLimit::Permit permit(limit);
      auto result = call();
      if (attempt > 1) spdlog::info("{} succeeded on attempt {}/{}", what, attempt, budget);
      return result;
    } catch (const ProviderError& e) {
      if (!is_transient(e.kind()) || attempt >= budget) {
        spdlog::warn("{} failed after {} attempt(s): {}", what, attempt, e.what());
        throw ProviderError(e.kind(), e.detail(), e.retry_after(), attempt);
      }
      auto wait = backoff.delay(attempt - 1);
      if (e.retry_after() && *e.retry_after() <= policy.retry.max_retry_after) {
        wait = *e.retry_after();
      }
      spdlog::info("{} attempt {}/{} failed ({}); retrying in {} ms", what, attempt, budget,
                   to_string(e.kind()), wait.count());
      policy.sleep(wait);
    }
  }
}

}  // namespace

FullJitterBackoff::FullJitterBackoff(RetryPolicy policy, std::uint64_t seed)
    : policy_(policy), rng_(seed) {}

std::chrono::milliseconds FullJitterBackoff::ceiling(int retry_index) const {
  auto cap = policy_.base_delay;
  for (int i = 0; i < retry_index && cap < policy_.max_delay; ++i) cap *= 2;
  return std::min(cap, policy_.max_delay);
}

std::chrono::milliseconds FullJitterBackoff::delay(int retry_index) {
  const auto cap = ceiling(retry_index);
  std::uniform_int_distribution<std::int64_t> dist(0, cap.count());
  std::lock_guard lock(mutex_);
  return std::chrono::milliseconds{dist(rng_)};
}

ConcurrencyLimit::ConcurrencyLimit(int limit)
    : limit_(std::clamp(limit, 1, 1024)), slots_(limit_) {}

RetryingChatProvider::RetryingChatProvider(ChatHandle inner, CallPolicy policy)
    : inner_(std::move(inner)),
      policy_(std::move(policy)),
      backoff_(policy_.retry, policy_.seed),
      limit_(policy_.concurrency) {
  policy_.sleep = default_sleeper(std::move(policy_.sleep));
}

ChatResponse RetryingChatProvider::chat(const ChatRequest& request) {
  validate_request(request);
  return call_with_retry(policy_, backoff_, limit_, "chat[" + request.request_tag + "]",
                         [&] { return inner_->chat(request); });
}

RetryingSearchProvider::RetryingSearchProvider(SearchHandle inner, CallPolicy policy)
    : inner_(std::move(inner)),
      policy_(std::move(policy)),
      backoff_(policy_.retry, policy_.seed),
      limit_(policy_.concurrency) {
  policy_.sleep = default_sleeper(std::move(policy_.sleep));
}

std::vector<SearchResult> RetryingSearchProvider::search(std::string_view query, int top_k) {
  validate_search_args(query, top_k);
  return call_with_retry(policy_, backoff_, limit_, "search[" + std::string(query) + "]",
                         [&] { return inner_->search(query, top_k); });
}

}  // namespace c3mod::providers
