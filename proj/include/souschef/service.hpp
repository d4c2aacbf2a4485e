#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "souschef/error.hpp"
#include "souschef/tasks.hpp"
#include "souschef/util.hpp"

namespace souschef::service {

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Judgment arrived out of step order or for an already-answered step.
class OrderingError : public Error {
 public:
  using Error::Error;
};

class ExpiredError : public Error {
 public:
  using Error::Error;
};

/// Final answers submitted before every step was judged.
class CompletenessError : public Error {
 public:
  using Error::Error;
};

/// Assignment is no longer open (already submitted).
class StateError : public Error {
 public:
  using Error::Error;
};

enum class AssignmentState { kOpen, kSubmitted, kExpired };

std::string_view to_string(AssignmentState s) noexcept;

struct Assignment {
  std::string assignment_id;
  std::string task_id;
  std::string worker_id;
  AssignmentState state = AssignmentState::kOpen;
  Timestamp issued_at{};
  Timestamp deadline{};
  std::vector<tasks::StepJudgment> judgments;
  std::optional<tasks::FinalAnswers> final;
  std::optional<Timestamp> submitted_at;

  bool operator==(const Assignment&) const = default;
};

nlohmann::json to_json(const Assignment& a);

struct ServiceConfig {
  std::chrono::minutes deadline{60};
  /// Overrides every task's target_annotations when set.
  std::optional<std::size_t> target_annotations;
  /// Append-only event log; empty keeps state in memory only.
  std::filesystem::path log_path;
};

struct Issued {
  Assignment assignment;
  tasks::AnnotationTask task;
};

/// Hands out A/B tasks, collects judgments and persists every state change as
/// one JSON line in an append-only log. Constructing over an existing log
/// replays it. All mutations are serialized; reads share a lock.
class AnnotationService {
 public:
  using NowFn = std::function<Timestamp()>;

  AnnotationService(std::vector<tasks::AnnotationTask> tasks, ServiceConfig config,
                    NowFn now = {});
  ~AnnotationService();

  AnnotationService(const AnnotationService&) = delete;
  AnnotationService& operator=(const AnnotationService&) = delete;

  /// Fewest submitted annotations first, ties by task_id. A worker never gets a
  /// task twice. nullopt when nothing is available for this worker.
  std::optional<Issued> next_task(const std::string& worker_id);

  void submit_step(const std::string& assignment_id, const tasks::StepJudgment& judgment);

  /// Closes the assignment; returns the assembled response.
  tasks::TaskResponse submit_final(const std::string& assignment_id,
                                   const tasks::FinalAnswers& final);

  /// Submitted responses in submission order.
  std::vector<tasks::TaskResponse> responses() const;
  std::string export_responses() const;

  std::optional<Assignment> assignment(const std::string& assignment_id) const;
  std::size_t submitted_count(const std::string& task_id) const;
  std::size_t task_count() const noexcept { return tasks_.size(); }

  /// Canonical dump of all state; equal dumps mean equal services.
  nlohmann::json snapshot() const;

 private:
  struct TaskSlot {
    tasks::AnnotationTask task;
    std::size_t target = 0;
    std::size_t submitted = 0;
    std::size_t open = 0;
    std::set<std::string> workers;
  };

  void replay();
  void record(const nlohmann::json& event);  // append to log, then apply
  void apply(const nlohmann::json& event);
  void expire_overdue(Timestamp now);
  Assignment& open_assignment(const std::string& assignment_id, Timestamp now);
  tasks::TaskResponse response_of(const Assignment& a) const;

  std::map<std::string, TaskSlot> tasks_;
  ServiceConfig config_;
  NowFn now_;
  int log_fd_ = -1;

  mutable std::shared_mutex mutex_;
  std::map<std::string, Assignment> assignments_;
  std::vector<std::string> submission_order_;
  std::size_t issued_seq_ = 0;
};

}  // namespace souschef::service
