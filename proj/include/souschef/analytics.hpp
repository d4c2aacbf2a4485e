#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "souschef/tasks.hpp"

namespace souschef::analytics {

/// Which underlying recipe sits in the static "Recipe A" slot.
enum class Condition { kAIsOriginal, kAIsGeneration };
enum class Owner { kOriginal, kGeneration };

std::string_view to_string(Condition c) noexcept;
std::string_view to_string(Owner o) noexcept;

struct CanonicalStep {
  Owner owner = Owner::kGeneration;  // owner of the step-by-step side
  bool included = false;
  std::optional<bool> valid;
  std::vector<tasks::InvalidReason> reasons;
};

/// One response with A/B labels resolved to original/generation.
struct CanonicalJudgment {
  std::string recipe_id;
  std::string task_id;
  std::string worker_id;
  Condition condition = Condition::kAIsOriginal;
  std::vector<CanonicalStep> steps;
  std::size_t static_steps = 0;               // |Recipe A|
  std::vector<std::size_t> missing;           // Recipe A indices
  int preference_code = 0;                    // original -1, neither 0, generation +1
  int familiarity = 0;
  std::size_t length_a = 0;
  std::size_t length_b = 0;
  double duration_minutes = 0.0;
};

/// Throws ValidationError naming the task of any orphan or invalid response.
std::vector<CanonicalJudgment> normalize(std::span<const tasks::AnnotationTask> tasks,
                                         std::span<const tasks::TaskResponse> responses);

struct PreferenceDistribution {
  std::size_t original = 0;
  std::size_t neither = 0;
  std::size_t generation = 0;

  std::size_t total() const noexcept { return original + neither + generation; }
  /// Proportion for code -1, 0 or +1.
  double share(int code) const;
};

struct PreferenceStats {
  PreferenceDistribution overall;
  std::map<Condition, PreferenceDistribution> by_condition;  // only non-empty conditions
};

/// Throws DomainError on empty input.
PreferenceStats preference_stats(std::span<const CanonicalJudgment> judgments);

/// Value held by more than half the votes. Even or empty vote lists throw DomainError.
bool majority_vote(std::span<const bool> votes);

struct ConditionRates {
  std::size_t tasks = 0;
  std::size_t steps = 0;          // step-by-step side, after majority vote
  std::size_t included = 0;
  std::size_t added = 0;          // judged not included
  std::size_t added_valid = 0;
  std::size_t static_steps = 0;
  std::size_t missing = 0;

  double inclusion_rate() const;
  /// nullopt when no step was judged added.
  std::optional<double> validity_rate() const;
  double missing_rate() const;
};

struct AggregateStats {
  std::map<Condition, ConditionRates> by_condition;
  std::vector<std::string> notices;
};

/// Majority-votes every step of every task across its annotators, then pools per
/// condition. A rater who judged a step included counts as judging it valid.
AggregateStats inclusion_validity_stats(std::span<const CanonicalJudgment> judgments);

struct AgreementResult {
  double kappa = 0.0;
  double observed = 0.0;  // P-bar
  double expected = 0.0;  // P-bar-e
  std::size_t n_items = 0;
  std::size_t n_raters = 0;
  std::size_t n_categories = 0;
};

/// Fleiss' kappa over an item x category count matrix whose rows each sum to n_raters.
AgreementResult fleiss_kappa(const std::vector<std::vector<std::size_t>>& ratings,
                             std::size_t n_raters);

struct CorrelationResult {
  double r = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t n = 0;
};

/// Pearson product-moment r with a two-sided p from Student's t, n-2 dof.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

struct FamiliarityStats {
  double mean = 0.0;
  double median = 0.0;
  std::size_t n = 0;
};

FamiliarityStats familiarity_stats(std::span<const CanonicalJudgment> judgments);

double median(std::vector<double> values);

struct TimingStats {
  double median_minutes = 0.0;
  double stddev_minutes = 0.0;  // sample (n-1); 0 for a single response
  std::size_t n = 0;
};

TimingStats timing_stats(std::span<const double> durations_minutes);

/// Per-task vote matrices, the inputs to every aggregate statistic.
struct AuditMatrices {
  nlohmann::json per_task;
  std::vector<std::vector<std::size_t>> included_counts;  // [included, not]
  std::vector<std::vector<std::size_t>> valid_counts;     // [valid, invalid]
  std::size_t raters = 0;
};

AuditMatrices audit_matrices(std::span<const CanonicalJudgment> judgments);

struct AnalysisReport {
  std::size_t n_tasks = 0;
  std::size_t n_responses = 0;
  std::size_t n_workers = 0;
  PreferenceStats preferences;
  AggregateStats aggregate;
  std::optional<AgreementResult> kappa_included;
  std::optional<AgreementResult> kappa_valid;
  std::optional<CorrelationResult> familiarity_vs_preference;
  std::optional<CorrelationResult> length_a_vs_preference;
  std::optional<CorrelationResult> length_b_vs_preference;
  FamiliarityStats familiarity;
  TimingStats timing;
  std::vector<std::string> notices;
};

AnalysisReport build_report(std::span<const tasks::AnnotationTask> tasks,
                            std::span<const tasks::TaskResponse> responses);

/// "62.5%" style: one decimal of a percent.
std::string format_percent(double proportion);
/// Rounds to `decimals` places and drops trailing zeros ("2.58", "2.5").
std::string format_decimal(double value, int decimals);

std::string render_text(const AnalysisReport& report);
nlohmann::json to_json(const AnalysisReport& report);

}  // namespace souschef::analytics
