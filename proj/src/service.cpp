#include "souschef/service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <mutex>

namespace souschef::service {

using nlohmann::json;

std::string_view to_string(AssignmentState s) noexcept {
  switch (s) {
    case AssignmentState::kOpen: return "open";
    case AssignmentState::kSubmitted: return "submitted";
    case AssignmentState::kExpired: return "expired";
  }
  return "open";
}

json to_json(const Assignment& a) {
  json steps = json::array();
  for (const auto& s : a.judgments) steps.push_back(tasks::to_json(s));
  json j{{"assignment_id", a.assignment_id},
         {"task_id", a.task_id},
         {"worker_id", a.worker_id},
         {"state", to_string(a.state)},
         {"issued_at", format_timestamp(a.issued_at)},
         {"deadline", format_timestamp(a.deadline)},
         {"judgments", std::move(steps)}};
  j["final"] = a.final ? tasks::to_json(*a.final) : json(nullptr);
  j["submitted_at"] = a.submitted_at ? json(format_timestamp(*a.submitted_at)) : json(nullptr);
  return j;
}

AnnotationService::AnnotationService(std::vector<tasks::AnnotationTask> task_list,
                                     ServiceConfig config, NowFn now)
    : config_(std::move(config)), now_(std::move(now)) {
  if (!now_) {
    now_ = [] { return std::chrono::time_point_cast<std::chrono::milliseconds>(Clock::now()); };
  }
  for (auto& t : task_list) {
    if (auto v = tasks::validate_task(t); !v.empty()) throw ValidationError(std::move(v));
    const auto target = config_.target_annotations.value_or(t.target_annotations);
    if (target < 1) throw ValidationError({"target_annotations must be >= 1"});
    auto id = t.task_id;
    if (!tasks_.emplace(id, TaskSlot{std::move(t), target, 0, 0, {}}).second) {
      throw ValidationError({"duplicate task_id " + id});
    }
  }
  if (!config_.log_path.empty()) {
    replay();
    log_fd_ = ::open(config_.log_path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (log_fd_ < 0) {
      throw IoError("cannot open log " + config_.log_path.string() + ": " + std::strerror(errno));
    }
  }
}

AnnotationService::~AnnotationService() {
  if (log_fd_ >= 0) ::close(log_fd_);
}

void AnnotationService::replay() {
  if (!std::filesystem::exists(config_.log_path)) return;
  const auto text = read_file(config_.log_path);
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    json event;
    try {
      event = json::parse(lines[i]);
    } catch (const json::parse_error&) {
      // A torn final write (no trailing newline) is dropped; anything else is corruption.
      const bool last = i + 1 == lines.size() && !text.ends_with('\n');
      if (last) break;
      throw FormatError(config_.log_path.string() + ":" + std::to_string(i + 1) + ": corrupt event");
    }
    try {
      apply(event);
    } catch (const std::exception& e) {
      throw FormatError(config_.log_path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
  }
}

void AnnotationService::record(const json& event) {
  if (log_fd_ >= 0) {
    const std::string line = event.dump() + "\n";
    // O_APPEND + a single write keeps each event on its own line.
    std::size_t done = 0;
    while (done < line.size()) {
      const auto n = ::write(log_fd_, line.data() + done, line.size() - done);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("log append failed: ") + std::strerror(errno));
      }
      done += static_cast<std::size_t>(n);
    }
  }
  apply(event);
}

void AnnotationService::apply(const json& e) {
  const auto type = e.at("type").get<std::string>();
  const auto id = e.at("assignment_id").get<std::string>();
  if (type == "issued") {
    Assignment a;
    a.assignment_id = id;
    a.task_id = e.at("task_id").get<std::string>();
    a.worker_id = e.at("worker_id").get<std::string>();
    a.issued_at = parse_timestamp(e.at("at").get<std::string>());
    a.deadline = parse_timestamp(e.at("deadline").get<std::string>());
    auto slot = tasks_.find(a.task_id);
    if (slot == tasks_.end()) throw FormatError("event references unknown task " + a.task_id);
    if (!assignments_.emplace(id, a).second) throw FormatError("assignment " + id + " issued twice");
    slot->second.open += 1;
    slot->second.workers.insert(a.worker_id);
    issued_seq_ += 1;
    return;
  }
  auto it = assignments_.find(id);
  if (it == assignments_.end()) throw FormatError("event references unknown assignment " + id);
  auto& a = it->second;
  auto& slot = tasks_.at(a.task_id);
  if (type == "step") {
    a.judgments.push_back(tasks::judgment_from_json(e.at("judgment")));
  } else if (type == "final") {
    a.final = tasks::final_from_json(e.at("final"));
    a.submitted_at = parse_timestamp(e.at("at").get<std::string>());
    a.state = AssignmentState::kSubmitted;
    slot.open -= 1;
    slot.submitted += 1;
    submission_order_.push_back(id);
  } else if (type == "expired") {
    a.state = AssignmentState::kExpired;
    slot.open -= 1;
  } else {
    throw FormatError("unknown event type " + type);
  }
}

void AnnotationService::expire_overdue(Timestamp now) {
  std::vector<std::string> overdue;
  for (const auto& [id, a] : assignments_) {
    if (a.state == AssignmentState::kOpen && a.deadline <= now) overdue.push_back(id);
  }
  for (const auto& id : overdue) {
    record({{"type", "expired"}, {"assignment_id", id}, {"at", format_timestamp(now)}});
  }
}

std::optional<Issued> AnnotationService::next_task(const std::string& worker_id) {
  if (is_blank(worker_id)) throw ValidationError({"worker_id missing"});
  std::unique_lock lock(mutex_);
  const auto now = now_();
  expire_overdue(now);

  const TaskSlot* best = nullptr;
  for (const auto& [id, slot] : tasks_) {
    if (slot.workers.contains(worker_id)) continue;
    if (slot.submitted + slot.open >= slot.target) continue;
    // map iteration is by task_id, so strict < keeps the smallest id on ties
    if (best == nullptr || slot.submitted < best->submitted) best = &slot;
  }
  if (best == nullptr) return std::nullopt;

  char buf[32];
  std::snprintf(buf, sizeof buf, "a-%06zu", issued_seq_ + 1);
  const std::string assignment_id = buf;
  const auto deadline = now + std::chrono::duration_cast<std::chrono::milliseconds>(config_.deadline);
  record({{"type", "issued"},
          {"assignment_id", assignment_id},
          {"task_id", best->task.task_id},
          {"worker_id", worker_id},
          {"at", format_timestamp(now)},
          {"deadline", format_timestamp(deadline)}});
  return Issued{assignments_.at(assignment_id), best->task};
}

Assignment& AnnotationService::open_assignment(const std::string& assignment_id, Timestamp now) {
  auto it = assignments_.find(assignment_id);
  if (it == assignments_.end()) throw NotFoundError("unknown assignment " + assignment_id);
  expire_overdue(now);
  auto& a = it->second;
  if (a.state == AssignmentState::kExpired) throw ExpiredError("assignment " + assignment_id + " expired");
  if (a.state == AssignmentState::kSubmitted) {
    throw StateError("assignment " + assignment_id + " already submitted");
  }
  return a;
}

void AnnotationService::submit_step(const std::string& assignment_id,
                                    const tasks::StepJudgment& judgment) {
  std::unique_lock lock(mutex_);
  const auto now = now_();
  auto& a = open_assignment(assignment_id, now);
  const auto& task = tasks_.at(a.task_id).task;
  const auto expected = a.judgments.size();
  if (judgment.step_index != expected) {
    if (judgment.step_index < expected) {
      throw OrderingError("step " + std::to_string(judgment.step_index) + " already submitted");
    }
    throw OrderingError("expected step " + std::to_string(expected) + ", got " +
                        std::to_string(judgment.step_index));
  }
  if (auto v = tasks::validate_step(task, judgment); !v.empty()) throw ValidationError(std::move(v));
  record({{"type", "step"},
          {"assignment_id", assignment_id},
          {"judgment", tasks::to_json(judgment)},
          {"at", format_timestamp(now)}});
}

tasks::TaskResponse AnnotationService::submit_final(const std::string& assignment_id,
                                                    const tasks::FinalAnswers& final) {
  std::unique_lock lock(mutex_);
  const auto now = now_();
  auto& a = open_assignment(assignment_id, now);
  const auto& task = tasks_.at(a.task_id).task;
  if (a.judgments.size() != task.recipe_b_steps.size()) {
    throw CompletenessError(std::to_string(task.recipe_b_steps.size() - a.judgments.size()) +
                            " step(s) still unanswered");
  }
  if (auto v = tasks::validate_final(task, final); !v.empty()) throw ValidationError(std::move(v));

  tasks::TaskResponse candidate = response_of(a);
  candidate.final = final;
  candidate.submitted_at = now;
  // The server re-checks the whole response; the browser is not trusted.
  if (auto v = tasks::validate_response(task, candidate); !v.empty()) throw ValidationError(std::move(v));

  record({{"type", "final"},
          {"assignment_id", assignment_id},
          {"final", tasks::to_json(final)},
          {"at", format_timestamp(now)}});
  return response_of(assignments_.at(assignment_id));
}

tasks::TaskResponse AnnotationService::response_of(const Assignment& a) const {
  tasks::TaskResponse r;
  r.task_id = a.task_id;
  r.worker_id = a.worker_id;
  r.step_judgments = a.judgments;
  if (a.final) r.final = *a.final;
  r.started_at = a.issued_at;
  r.submitted_at = a.submitted_at.value_or(a.issued_at);
  return r;
}

std::vector<tasks::TaskResponse> AnnotationService::responses() const {
  std::shared_lock lock(mutex_);
  std::vector<tasks::TaskResponse> out;
  out.reserve(submission_order_.size());
  for (const auto& id : submission_order_) out.push_back(response_of(assignments_.at(id)));
  return out;
}

std::string AnnotationService::export_responses() const {
  return tasks::serialize_responses(responses());
}

std::optional<Assignment> AnnotationService::assignment(const std::string& assignment_id) const {
  std::shared_lock lock(mutex_);
  const auto it = assignments_.find(assignment_id);
  if (it == assignments_.end()) return std::nullopt;
  return it->second;
}

std::size_t AnnotationService::submitted_count(const std::string& task_id) const {
  std::shared_lock lock(mutex_);
  const auto it = tasks_.find(task_id);
  return it == tasks_.end() ? 0 : it->second.submitted;
}

json AnnotationService::snapshot() const {
  std::shared_lock lock(mutex_);
  json slots = json::object();
  for (const auto& [id, slot] : tasks_) {
    slots[id] = {{"target", slot.target},
                 {"submitted", slot.submitted},
                 {"open", slot.open},
                 {"workers", slot.workers}};
  }
  json assignments = json::object();
  for (const auto& [id, a] : assignments_) assignments[id] = to_json(a);
  return {{"tasks", std::move(slots)},
          {"assignments", std::move(assignments)},
          {"submission_order", submission_order_},
          {"issued_seq", issued_seq_}};
}

}  // namespace souschef::service
