#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <mutex>
#include <random>
#include <semaphore>

#include "c3mod/providers/provider.hpp"

namespace c3mod::providers {

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};
  /// Upper bound on a server-provided Retry-After before it is ignored.
  std::chrono::milliseconds max_retry_after{60000};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Exponential backoff with full jitter: the delay before retry `n` (0-based) is
/// uniform in [0, min(max_delay, base_delay * 2^n)].
class FullJitterBackoff {
 public:
  explicit FullJitterBackoff(RetryPolicy policy, std::uint64_t seed = std::random_device{}());

  std::chrono::milliseconds delay(int retry_index);
  /// The cap the jitter is drawn under for `retry_index`.
  std::chrono::milliseconds ceiling(int retry_index) const;

 private:
  RetryPolicy policy_;
  std::mutex mutex_;
  std::mt19937_64 rng_;
};

/// Counting limiter over concurrently running calls.
class ConcurrencyLimit {
 public:
  explicit ConcurrencyLimit(int limit);

  class Permit {
   public:
    explicit Permit(ConcurrencyLimit& owner) : owner_(owner) { owner_.slots_.acquire(); }
    ~Permit() { owner_.slots_.release(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    ConcurrencyLimit& owner_;
  };

  int limit() const { return limit_; }

 private:
  int limit_;
  std::counting_semaphore<1024> slots_;
};

struct CallPolicy {
  RetryPolicy retry;
  int concurrency = 4;
  std::uint64_t seed = std::random_device{}();
  Sleeper sleep;  // defaults to std::this_thread::sleep_for
};

/// Wraps a chat backend with retry on transient errors and an in-flight limit.
class RetryingChatProvider final : public ChatProvider {
 public:
  RetryingChatProvider(ChatHandle inner, CallPolicy policy);

  std::string name() const override { return inner_->name(); }
  ChatResponse chat(const ChatRequest& request) override;

 private:
  ChatHandle inner_;
  CallPolicy policy_;
  FullJitterBackoff backoff_;
  ConcurrencyLimit limit_;
};

class RetryingSearchProvider final : public SearchProvider {
 public:
  RetryingSearchProvider(SearchHandle inner, CallPolicy policy);

  std::string name() const override { return inner_->name(); }
  std::vector<SearchResult> search(std::string_view query, int top_k) override;

 private:
  SearchHandle inner_;
  CallPolicy policy_;
  FullJitterBackoff backoff_;
  ConcurrencyLimit limit_;
};

}  // namespace c3mod::providers
