#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "c3mod/domain.hpp"
#include "c3mod/providers/provider.hpp"

namespace c3mod::testing {

inline std::filesystem::path fixture_dir() { return C3MOD_FIXTURE_DIR; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<unsigned> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("c3mod-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Chat backend driven by a callback; records every request it sees.
class FakeChat final : public providers::ChatProvider {
 public:
  using Handler = std::function<std::string(const providers::ChatRequest&)>;
  explicit FakeChat(Handler handler) : handler_(std::move(handler)) {}
  std::string name() const override { return "fake"; }
  providers::ChatResponse chat(const providers::ChatRequest& request) override {
    {
      std::lock_guard lock(mutex_);
      requests_.push_back(request);
    }
    return {handler_(request), "fake", 0};
  }
  std::vector<providers::ChatRequest> requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }

 private:
  Handler handler_;
  mutable std::mutex mutex_;
  std::vector<providers::ChatRequest> requests_;
};

inline Verdict llm_verdict(std::string id, Vote vote) {
  Verdict v;
  v.moderator_id = std::move(id);
  v.vote = vote;
  if (vote == Vote::Offensive) v.spans = {"x"};
  return v;
}

inline Verdict human_verdict(std::string id, Vote vote) {
  Verdict v;
  v.moderator_id = std::move(id);
  v.moderator_kind = ModeratorKind::Human;
  v.vote = vote;
  return v;
}

inline Sample make_sample(std::string id, std::string comment = "comment text") {
  Sample s;
  s.id = std::move(id);
  s.title = "title";
  s.comment = std::move(comment);
  s.title_translated = "title";
  s.comment_translated = s.comment;
  return s;
}

/// Three native votes, with `dissent` of them (0 or 1) against `gold`.
inline void set_natives(Sample& s, Label gold, int dissent, std::vector<std::string> ids = {"n1", "n2", "n3"}) {
  const Label other = gold == Label::Offensive ? Label::NonOffensive : Label::Offensive;
  s.gold_label = gold;
  s.native_votes = {{ids[0], gold}, {ids[1], gold}, {ids[2], dissent > 0 ? other : gold}};
}

}  // namespace c3mod::testing
