#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "c3mod/annotate/annotate.hpp"
#include "c3mod/domain.hpp"
#include "c3mod/jsonl.hpp"
#include "c3mod/moderate/moderate.hpp"

namespace c3mod::review {

enum class TaskState { Open, AwaitingVotes, Finalized, Unresolved };
std::string_view to_string(TaskState state);
TaskState task_state_from_string(std::string_view s);

constexpr bool is_closed(TaskState s) {
  return s == TaskState::Finalized || s == TaskState::Unresolved;
}

struct TaskPayload {
  std::string title_translated;
  std::string comment_translated;
  std::string annotation_rendered;

  friend bool operator==(const TaskPayload&, const TaskPayload&) = default;
};

struct ReviewTask {
  std::string sample_id;
  TaskPayload payload;
  int required_votes = 3;
  /// One per Unsure vote received.
  int extra_slots = 0;
  TaskState state = TaskState::Open;
  std::vector<Verdict> votes;
  std::vector<Verdict> llm_verdicts;
  std::optional<Label> final_label;
  Timestamp enqueued_at{};

  std::size_t binary_votes() const;
  bool has_voted(const std::string& reviewer_id) const;

  friend bool operator==(const ReviewTask&, const ReviewTask&) = default;
};

/// `include_llm_verdicts` is off for anything a reviewer sees.
json task_to_json(const ReviewTask& task, bool include_llm_verdicts = false);
ReviewTask task_from_json(const json& j);

struct ReviewerSession {
  std::string reviewer_id;
  std::string display_name;
  bool active = true;
};

class UnknownTask : public Error {
 public:
  using Error::Error;
};
class UnknownReviewer : public Error {
 public:
  using Error::Error;
};
class DuplicateVote : public Error {
 public:
  using Error::Error;
};
class TaskFinalized : public Error {
 public:
  using Error::Error;
};
class PreconditionFailed : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct VoteSubmission {
  std::string sample_id;
  std::string reviewer_id;
  Vote vote = Vote::NonOffensive;
  std::vector<std::string> spans;
  std::optional<std::string> note;
  /// When equal to idempotency_key(reviewer_id, sample_id) and an identical vote
  /// is already stored, the submission succeeds without effect.
  std::optional<std::string> idempotency_key;
};

std::string idempotency_key(const std::string& reviewer_id, const std::string& sample_id);

/// The outcome a task reaches from its votes alone: Finalized(label) when the
/// first `required_votes` binary votes hold a strict majority.
std::optional<Label> tally(const std::vector<Verdict>& votes, int required_votes);

using FinalizeHook = std::function<void(const ReviewTask&)>;

/// Human review queue. Every mutation is appended to the event log before it
/// becomes visible; constructing the store over an existing log replays it.
class ReviewStore {
 public:
  ReviewStore(std::optional<std::filesystem::path> event_log, std::shared_ptr<const Clock> clock,
              int required_votes = 3);

  void register_reviewer(ReviewerSession session);
  std::vector<ReviewerSession> reviewers() const;
  bool is_registered(const std::string& reviewer_id) const;

  /// Requires a Split outcome; re-enqueueing a sample returns its existing task.
  ReviewTask enqueue(const Sample& sample, const annotate::CulturalAnnotation& annotation,
                     const moderate::ConsensusOutcome& outcome);

  /// Oldest open task the reviewer has not voted on.
  std::optional<ReviewTask> next_task(const std::string& reviewer_id) const;

  ReviewTask submit_vote(const VoteSubmission& submission);

  /// Closes a task whose reviewer pool is used up: Finalized on a strict
  /// majority of the binary votes collected so far, Unresolved otherwise.
  ReviewTask finalize_exhausted(const std::string& sample_id, std::size_t pool_size);

  std::optional<ReviewTask> get(const std::string& sample_id) const;
  /// All tasks in enqueue order.
  std::vector<ReviewTask> tasks() const;
  std::size_t open_count() const;

  /// Called after a task reaches Finalized or Unresolved, outside the store lock.
  void on_close(FinalizeHook hook);

  int required_votes() const { return required_votes_; }

 private:
  void record(const std::string& type, const std::string& sample_id, json payload, Timestamp ts);
  void apply(const std::string& type, const std::string& sample_id, const json& payload,
             Timestamp ts);
  ReviewTask& task_or_throw(const std::string& sample_id);
  void notify(const ReviewTask& task);

  mutable std::shared_mutex mutex_;
  std::unique_ptr<JsonlAppender> log_;
  std::shared_ptr<const Clock> clock_;
  int required_votes_;
  std::map<std::string, ReviewTask> tasks_;
  std::vector<std::string> order_;
  std::map<std::string, ReviewerSession> reviewers_;
  std::vector<FinalizeHook> hooks_;
};

}  // namespace c3mod::review
