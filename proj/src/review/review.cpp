#include "c3mod/review/review.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace c3mod::review {

std::string_view to_string(TaskState state) {
  switch (state) {
    case TaskState::Open:
      return "open";
    case TaskState::AwaitingVotes:
      return "awaiting_votes";
    case TaskState::Finalized:
      return "finalized";
    case TaskState::Unresolved:
      return "unresolved";
  }
  return "open";
}

TaskState task_state_from_string(std::string_view s) {
  for (auto state : {TaskState::Open, TaskState::AwaitingVotes, TaskState::Finalized,
                     TaskState::Unresolved}) {
    if (to_string(state) == s) return state;
  }
  throw ParseError("unknown task state '" + std::string(s) + "'");
}

std::size_t ReviewTask::binary_votes() const {
  return static_cast<std::size_t>(std::count_if(
      votes.begin(), votes.end(), [](const Verdict& v) { return v.vote != Vote::Unsure; }));
}

bool ReviewTask::has_voted(const std::string& reviewer_id) const {
  return std::any_of(votes.begin(), votes.end(),
                     [&](const Verdict& v) { return v.moderator_id == reviewer_id; });
}

json task_to_json(const ReviewTask& task, bool include_llm_verdicts) {
  json j{{"sample_id", task.sample_id},
         {"state", to_string(task.state)},
         {"required_votes", task.required_votes},
         {"extra_slots", task.extra_slots},
         {"binary_votes", task.binary_votes()},
         {"payload",
          {{"title", task.payload.title_translated},
           {"comment", task.payload.comment_translated},
           {"annotation", task.payload.annotation_rendered}}},
         {"votes", task.votes},
         {"final_label", task.final_label ? json(to_string(*task.final_label)) : json(nullptr)},
         {"enqueued_at", to_epoch_ms(task.enqueued_at)}};
  if (include_llm_verdicts) j["llm_verdicts"] = task.llm_verdicts;
  return j;
}

ReviewTask task_from_json(const json& j) {
  ReviewTask task;
  task.sample_id = j.at("sample_id").get<std::string>();
  task.state = task_state_from_string(j.at("state").get<std::string>());
  task.required_votes = j.at("required_votes").get<int>();
  task.extra_slots = j.value("extra_slots", 0);
  const auto& p = j.at("payload");
  task.payload = {p.at("title").get<std::string>(), p.at("comment").get<std::string>(),
                  p.at("annotation").get<std::string>()};
  task.votes = j.at("votes").get<std::vector<Verdict>>();
  if (j.contains("llm_verdicts")) task.llm_verdicts = j.at("llm_verdicts").get<std::vector<Verdict>>();
  if (!j.at("final_label").is_null()) {
    task.final_label = label_from_string(j.at("final_label").get<std::string>());
  }
  task.enqueued_at = from_epoch_ms(j.value("enqueued_at", std::int64_t{0}));
  return task;
}

std::string idempotency_key(const std::string& reviewer_id, const std::string& sample_id) {
  return reviewer_id + ":" + sample_id;
}

std::optional<Label> tally(const std::vector<Verdict>& votes, int required_votes) {
  std::vector<Vote> binary;
  for (const auto& v : votes) {
    if (v.vote == Vote::Unsure) continue;
    binary.push_back(v.vote);
    if (static_cast<int>(binary.size()) == required_votes) return strict_majority(binary);
  }
  return std::nullopt;
}

ReviewStore::ReviewStore(std::optional<std::filesystem::path> event_log,
                         std::shared_ptr<const Clock> clock, int required_votes)
    : clock_(std::move(clock)), required_votes_(required_votes) {
  if (!clock_) throw ValidationError("review store requires a clock");
  if (required_votes_ < 1) throw ValidationError("required_votes must be positive");
  if (event_log) {
    std::size_t events = 0;
    read_jsonl(*event_log, [&](const json& e, std::size_t line) {
      try {
        apply(e.at("type").get<std::string>(), e.at("sample_id").get<std::string>(),
              e.at("payload"), from_epoch_ms(e.at("ts").get<std::int64_t>()));
      } catch (const Error& err) {
        throw ParseError(event_log->string() + ":" + std::to_string(line) + ": " + err.what());
      } catch (const json::exception& err) {
        throw ParseError(event_log->string() + ":" + std::to_string(line) + ": " + err.what());
      }
      ++events;
    });
    if (events > 0) {
      spdlog::info("review store: replayed {} events, {} tasks", events, tasks_.size());
    }
    log_ = std::make_unique<JsonlAppender>(*event_log);
  }
}

void ReviewStore::register_reviewer(ReviewerSession session) {
  if (session.reviewer_id.empty()) throw ValidationError("reviewer id empty");
  std::unique_lock lock(mutex_);
  reviewers_[session.reviewer_id] = std::move(session);
}

std::vector<ReviewerSession> ReviewStore::reviewers() const {
  std::shared_lock lock(mutex_);
  std::vector<ReviewerSession> out;
  for (const auto& [id, session] : reviewers_) out.push_back(session);
  return out;
}

bool ReviewStore::is_registered(const std::string& reviewer_id) const {
  std::shared_lock lock(mutex_);
  const auto it = reviewers_.find(reviewer_id);
  return it != reviewers_.end() && it->second.active;
}

void ReviewStore::record(const std::string& type, const std::string& sample_id, json payload,
                         Timestamp ts) {
  // Validate by applying first; a rejected event never reaches the log.
  apply(type, sample_id, payload, ts);
  if (log_) {
    log_->append(json{{"type", type},
                      {"sample_id", sample_id},
                      {"payload", std::move(payload)},
                      {"ts", to_epoch_ms(ts)}});
  }
}

void ReviewStore::apply(const std::string& type, const std::string& sample_id,
                        const json& payload, Timestamp ts) {
  if (type == "enqueued") {
    if (tasks_.contains(sample_id)) throw ValidationError("task '" + sample_id + "' enqueued twice");
    ReviewTask task;
    task.sample_id = sample_id;
    const auto& p = payload.at("payload");
    task.payload = {p.at("title").get<std::string>(), p.at("comment").get<std::string>(),
                    p.at("annotation").get<std::string>()};
    task.required_votes = payload.at("required_votes").get<int>();
    task.llm_verdicts = payload.at("llm_verdicts").get<std::vector<Verdict>>();
    task.enqueued_at = ts;
    tasks_.emplace(sample_id, std::move(task));
    order_.push_back(sample_id);
    return;
  }
  auto& task = task_or_throw(sample_id);
  if (is_closed(task.state)) {
    throw TaskFinalized("task '" + sample_id + "' is already " + std::string(to_string(task.state)));
  }
  if (type == "vote") {
    auto verdict = payload.at("verdict").get<Verdict>();
    if (verdict.moderator_kind != ModeratorKind::Human) {
      throw ValidationError("review votes must come from human reviewers");
    }
    if (task.has_voted(verdict.moderator_id)) {
      throw DuplicateVote("reviewer '" + verdict.moderator_id + "' already voted on '" + sample_id +
                          "'");
    }
    if (verdict.vote == Vote::Unsure) ++task.extra_slots;
    task.votes.push_back(std::move(verdict));
    task.state = TaskState::AwaitingVotes;
  } else if (type == "finalized") {
    task.final_label = label_from_string(payload.at("final_label").get<std::string>());
    task.state = TaskState::Finalized;
  } else if (type == "unresolved") {
    task.state = TaskState::Unresolved;
  } else {
    throw ParseError("unknown review event type '" + type + "'");
  }
}

ReviewTask& ReviewStore::task_or_throw(const std::string& sample_id) {
  const auto it = tasks_.find(sample_id);
  if (it == tasks_.end()) throw UnknownTask("no review task for sample '" + sample_id + "'");
  return it->second;
}

void ReviewStore::notify(const ReviewTask& task) {
  std::vector<FinalizeHook> hooks;
  {
    std::shared_lock lock(mutex_);
    hooks = hooks_;
  }
  for (const auto& hook : hooks) hook(task);
}

void ReviewStore::on_close(FinalizeHook hook) {
  std::unique_lock lock(mutex_);
  hooks_.push_back(std::move(hook));
}

ReviewTask ReviewStore::enqueue(const Sample& sample, const annotate::CulturalAnnotation& annotation,
                                const moderate::ConsensusOutcome& outcome) {
  if (outcome.kind != moderate::OutcomeKind::Split) {
    throw PreconditionFailed("only Split outcomes are escalated; '" + sample.id + "' is unanimous");
  }
  const auto input = moderate::prompt_input(sample, annotation);
  std::unique_lock lock(mutex_);
  if (const auto it = tasks_.find(sample.id); it != tasks_.end()) return it->second;
  const json payload{{"payload",
                      {{"title", input.title_translated},
                       {"comment", input.comment_translated},
                       {"annotation", input.annotation_rendered}}},
                     {"required_votes", required_votes_},
                     {"llm_verdicts", outcome.verdicts}};
  record("enqueued", sample.id, payload, clock_->now());
  return tasks_.at(sample.id);
}

std::optional<ReviewTask> ReviewStore::next_task(const std::string& reviewer_id) const {
  std::shared_lock lock(mutex_);
  if (!reviewers_.contains(reviewer_id)) {
    throw UnknownReviewer("reviewer '" + reviewer_id + "' is not registered");
  }
  for (const auto& id : order_) {
    const auto& task = tasks_.at(id);
    if (!is_closed(task.state) && !task.has_voted(reviewer_id)) return task;
  }
  return std::nullopt;
}

ReviewTask ReviewStore::submit_vote(const VoteSubmission& s) {
  ReviewTask snapshot;
  {
    std::unique_lock lock(mutex_);
    const auto reviewer = reviewers_.find(s.reviewer_id);
    if (reviewer == reviewers_.end() || !reviewer->second.active) {
      throw UnknownReviewer("reviewer '" + s.reviewer_id + "' is not registered");
    }
    auto& task = task_or_throw(s.sample_id);
    const auto previous = std::find_if(task.votes.begin(), task.votes.end(), [&](const Verdict& v) {
      return v.moderator_id == s.reviewer_id;
    });
    if (previous != task.votes.end()) {
      const bool replay = s.idempotency_key == idempotency_key(s.reviewer_id, s.sample_id) &&
                          previous->vote == s.vote && previous->spans == s.spans &&
                          previous->raw_response == s.note;
      if (replay) return task;
      throw DuplicateVote("reviewer '" + s.reviewer_id + "' already voted on '" + s.sample_id + "'");
    }
    if (is_closed(task.state)) {
      throw TaskFinalized("task '" + s.sample_id + "' is already " +
                          std::string(to_string(task.state)));
    }
    const auto now = clock_->now();
    const Verdict verdict{s.reviewer_id, ModeratorKind::Human, s.vote, s.spans, s.note, now, false};
    record("vote", s.sample_id, json{{"verdict", verdict}}, now);
    if (const auto label = tally(task.votes, task.required_votes)) {
      record("finalized", s.sample_id, json{{"final_label", to_string(*label)}}, now);
    }
    snapshot = task;
  }
  if (is_closed(snapshot.state)) notify(snapshot);
  return snapshot;
}

ReviewTask ReviewStore::finalize_exhausted(const std::string& sample_id, std::size_t pool_size) {
  ReviewTask snapshot;
  {
    std::unique_lock lock(mutex_);
    auto& task = task_or_throw(sample_id);
    if (is_closed(task.state)) return task;
    if (task.votes.size() < pool_size) {
      throw PreconditionFailed("task '" + sample_id + "' still has unvoted reviewers in the pool");
    }
    const auto now = clock_->now();
    if (const auto label = strict_majority(std::span<const Verdict>(task.votes))) {
      record("finalized", sample_id, json{{"final_label", to_string(*label)}}, now);
    } else {
      record("unresolved", sample_id, json::object(), now);
    }
    snapshot = task;
  }
  notify(snapshot);
  return snapshot;
}

std::optional<ReviewTask> ReviewStore::get(const std::string& sample_id) const {
  std::shared_lock lock(mutex_);
  const auto it = tasks_.find(sample_id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second;
}

std::vector<ReviewTask> ReviewStore::tasks() const {
  std::shared_lock lock(mutex_);
  std::vector<ReviewTask> out;
  out.reserve(order_.size());
  for (const auto& id : order_) out.push_back(tasks_.at(id));
  return out;
}

std::size_t ReviewStore::open_count() const {
  std::shared_lock lock(mutex_);
  return static_cast<std::size_t>(std::count_if(
      tasks_.begin(), tasks_.end(), [](const auto& kv) { return !is_closed(kv.second.state); }));
}

}  // namespace c3mod::review
