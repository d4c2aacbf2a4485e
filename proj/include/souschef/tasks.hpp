#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "souschef/corpus.hpp"
#include "souschef/llm.hpp"
#include "souschef/util.hpp"

namespace souschef::tasks {

/// One A/B comparison. Recipe A is shown whole; Recipe B one step at a time.
struct AnnotationTask {
  std::string task_id;
  std::string recipe_id;
  std::string dish_title;
  std::vector<std::string> ingredients;
  std::vector<std::string> recipe_a_steps;
  std::vector<std::string> recipe_b_steps;
  bool a_is_generation = false;
  std::uint64_t flip_seed = 0;
  std::size_t target_annotations = 3;

  bool operator==(const AnnotationTask&) const = default;
};

struct InvalidReason {
  enum class Kind { kInvalidIngredient, kInvalidAction, kOther };
  Kind kind = Kind::kOther;
  std::string text;  // only for kOther

  bool operator==(const InvalidReason&) const = default;
};

struct StepJudgment {
  std::size_t step_index = 0;
  bool included = false;
  std::optional<bool> valid;                                 // iff !included
  std::optional<std::vector<InvalidReason>> invalid_reasons;  // iff valid == false

  bool operator==(const StepJudgment&) const = default;
};

enum class Preference { kA, kB, kNeither };

struct FinalAnswers {
  int familiarity = 0;
  std::vector<std::size_t> missing_steps;  // Recipe A indices
  std::optional<std::string> missing_text;
  Preference preference = Preference::kNeither;

  bool operator==(const FinalAnswers&) const = default;
};

struct TaskResponse {
  std::string task_id;
  std::string worker_id;
  std::vector<StepJudgment> step_judgments;
  FinalAnswers final;
  Timestamp started_at{};
  Timestamp submitted_at{};

  bool operator==(const TaskResponse&) const = default;
};

inline constexpr std::size_t kDefaultTargetAnnotations = 3;

/// Seeded fair coin decides which side holds the generation. Throws
/// ValidationError if the revision belongs to another recipe.
AnnotationTask make_task(const corpus::Recipe& original, const llm::RevisionResult& revision,
                         std::uint64_t seed,
                         std::size_t target_annotations = kDefaultTargetAnnotations);

/// (original steps, generated steps) recovered from the A/B sides.
std::pair<std::vector<std::string>, std::vector<std::string>> unflip(const AnnotationTask& task);

std::vector<std::string> validate_task(const AnnotationTask& task);
std::vector<std::string> validate_step(const AnnotationTask& task, const StepJudgment& judgment);
std::vector<std::string> validate_final(const AnnotationTask& task, const FinalAnswers& final);
/// Empty when accepted.
std::vector<std::string> validate_response(const AnnotationTask& task, const TaskResponse& response);

// Wire format: one JSON object per line, field names as in the structs above.
nlohmann::json to_json(const AnnotationTask& t);
nlohmann::json to_json(const StepJudgment& j);
nlohmann::json to_json(const FinalAnswers& f);
nlohmann::json to_json(const TaskResponse& r);
/// What the annotator sees: the task without a_is_generation or flip_seed.
nlohmann::json task_view_json(const AnnotationTask& t);

AnnotationTask task_from_json(const nlohmann::json& j);
StepJudgment judgment_from_json(const nlohmann::json& j);
FinalAnswers final_from_json(const nlohmann::json& j);
TaskResponse response_from_json(const nlohmann::json& j);

std::string_view to_string(Preference p) noexcept;
Preference preference_from_string(std::string_view s);

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

template <typename T>
struct ImportResult {
  std::vector<T> items;
  std::vector<LineError> errors;
};

std::string serialize_tasks(std::span<const AnnotationTask> tasks);
std::string serialize_responses(std::span<const TaskResponse> responses);
void export_tasks(std::span<const AnnotationTask> tasks, const std::filesystem::path& path);
void export_responses(std::span<const TaskResponse> responses, const std::filesystem::path& path);

ImportResult<AnnotationTask> parse_tasks(std::string_view text);
ImportResult<AnnotationTask> import_tasks(const std::filesystem::path& path);

/// Records that are malformed, reference an unknown task, or fail
/// validate_response are reported with their line and left out.
ImportResult<TaskResponse> parse_responses(std::string_view text,
                                           std::span<const AnnotationTask> tasks);
ImportResult<TaskResponse> import_responses(const std::filesystem::path& path,
                                            std::span<const AnnotationTask> tasks);

}  // namespace souschef::tasks
