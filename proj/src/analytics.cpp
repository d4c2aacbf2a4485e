#include "souschef/analytics.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>

#include "souschef/error.hpp"

namespace souschef::analytics {

using nlohmann::json;

std::string_view to_string(Condition c) noexcept {
  return c == Condition::kAIsOriginal ? "A_is_original" : "A_is_generation";
}

std::string_view to_string(Owner o) noexcept {
  return o == Owner::kOriginal ? "original" : "generation";
}

std::vector<CanonicalJudgment> normalize(std::span<const tasks::AnnotationTask> task_list,
                                         std::span<const tasks::TaskResponse> responses) {
  std::map<std::string_view, const tasks::AnnotationTask*> by_id;
  for (const auto& t : task_list) by_id.emplace(t.task_id, &t);

  std::vector<CanonicalJudgment> out;
  out.reserve(responses.size());
  for (const auto& r : responses) {
    const auto it = by_id.find(r.task_id);
    if (it == by_id.end()) throw ValidationError({"response references unknown task " + r.task_id});
    const auto& task = *it->second;
    if (auto v = tasks::validate_response(task, r); !v.empty()) {
      v.insert(v.begin(), "task " + task.task_id + ", worker " + r.worker_id);
      throw ValidationError(std::move(v));
    }

    CanonicalJudgment c;
    c.recipe_id = task.recipe_id;
    c.task_id = task.task_id;
    c.worker_id = r.worker_id;
    c.condition = task.a_is_generation ? Condition::kAIsGeneration : Condition::kAIsOriginal;
    const Owner b_owner = task.a_is_generation ? Owner::kOriginal : Owner::kGeneration;
    for (const auto& j : r.step_judgments) {
      CanonicalStep s;
      s.owner = b_owner;
      s.included = j.included;
      s.valid = j.valid;
      if (j.invalid_reasons) s.reasons = *j.invalid_reasons;
      c.steps.push_back(std::move(s));
    }
    c.static_steps = task.recipe_a_steps.size();
    c.missing = r.final.missing_steps;
    switch (r.final.preference) {
      case tasks::Preference::kA: c.preference_code = task.a_is_generation ? 1 : -1; break;
      case tasks::Preference::kB: c.preference_code = task.a_is_generation ? -1 : 1; break;
      case tasks::Preference::kNeither: c.preference_code = 0; break;
    }
    c.familiarity = r.final.familiarity;
    c.length_a = task.recipe_a_steps.size();
    c.length_b = task.recipe_b_steps.size();
    c.duration_minutes =
        std::chrono::duration<double, std::ratio<60>>(r.submitted_at - r.started_at).count();
    out.push_back(std::move(c));
  }
  return out;
}

double PreferenceDistribution::share(int code) const {
  const auto n = total();
  if (n == 0) throw DomainError("empty preference distribution");
  const std::size_t k = code < 0 ? original : code == 0 ? neither : generation;
  return static_cast<double>(k) / static_cast<double>(n);
}

namespace {

void count_preference(PreferenceDistribution& d, int code) {
  if (code < 0) {
    ++d.original;
  } else if (code == 0) {
    ++d.neither;
  } else {
    ++d.generation;
  }
}

}  // namespace

PreferenceStats preference_stats(std::span<const CanonicalJudgment> judgments) {
  if (judgments.empty()) throw DomainError("no judgments");
  PreferenceStats s;
  for (const auto& j : judgments) {
    count_preference(s.overall, j.preference_code);
    count_preference(s.by_condition[j.condition], j.preference_code);
  }
  return s;
}

bool majority_vote(std::span<const bool> votes) {
  if (votes.empty()) throw DomainError("majority vote over no votes");
  if (votes.size() % 2 == 0) {
    throw DomainError("majority vote needs an odd number of votes, got " + std::to_string(votes.size()));
  }
  const auto yes = static_cast<std::size_t>(std::count(votes.begin(), votes.end(), true));
  return yes * 2 > votes.size();
}

double ConditionRates::inclusion_rate() const {
  if (steps == 0) throw DomainError("no steps");
  return static_cast<double>(included) / static_cast<double>(steps);
}

std::optional<double> ConditionRates::validity_rate() const {
  if (added == 0) return std::nullopt;
  return static_cast<double>(added_valid) / static_cast<double>(added);
}

double ConditionRates::missing_rate() const {
  if (static_steps == 0) throw DomainError("no static-side steps");
  return static_cast<double>(missing) / static_cast<double>(static_steps);
}

namespace {

using TaskGroups = std::map<std::string, std::vector<const CanonicalJudgment*>>;

TaskGroups group_by_task(std::span<const CanonicalJudgment> judgments) {
  TaskGroups groups;
  for (const auto& j : judgments) groups[j.task_id].push_back(&j);
  for (const auto& [id, group] : groups) {
    const auto* first = group.front();
    for (const auto* j : group) {
      if (j->steps.size() != first->steps.size() || j->static_steps != first->static_steps ||
          j->condition != first->condition) {
        throw ValidationError({"task " + id + ": judgments disagree on task shape"});
      }
    }
  }
  return groups;
}

// A rater who judged the step included implicitly judged it valid.
bool rater_valid(const CanonicalStep& s) { return s.included || s.valid.value_or(false); }

struct StepVotes {
  std::vector<bool> included;
  std::vector<bool> valid;
};

std::vector<StepVotes> step_votes(const std::vector<const CanonicalJudgment*>& group) {
  std::vector<StepVotes> votes(group.front()->steps.size());
  for (const auto* j : group) {
    for (std::size_t i = 0; i < j->steps.size(); ++i) {
      votes[i].included.push_back(j->steps[i].included);
      votes[i].valid.push_back(rater_valid(j->steps[i]));
    }
  }
  return votes;
}

std::vector<std::vector<bool>> missing_votes(const std::vector<const CanonicalJudgment*>& group) {
  std::vector<std::vector<bool>> votes(group.front()->static_steps);
  for (const auto* j : group) {
    std::set<std::size_t> marked(j->missing.begin(), j->missing.end());
    for (std::size_t i = 0; i < votes.size(); ++i) votes[i].push_back(marked.contains(i));
  }
  return votes;
}

// Packs a vector<bool> into a contiguous buffer for span-based voting.
bool vote(const std::vector<bool>& v) {
  std::unique_ptr<bool[]> buf(new bool[v.size()]);
  std::copy(v.begin(), v.end(), buf.get());
  return majority_vote(std::span<const bool>(buf.get(), v.size()));
}

}  // namespace

AggregateStats inclusion_validity_stats(std::span<const CanonicalJudgment> judgments) {
  AggregateStats stats;
  for (const auto& [task_id, group] : group_by_task(judgments)) {
    auto& rates = stats.by_condition[group.front()->condition];
    try {
      for (const auto& sv : step_votes(group)) {
        ++rates.steps;
        if (vote(sv.included)) {
          ++rates.included;
        } else {
          ++rates.added;
          if (vote(sv.valid)) ++rates.added_valid;
        }
      }
      for (const auto& mv : missing_votes(group)) {
        ++rates.static_steps;
        if (vote(mv)) ++rates.missing;
      }
    } catch (const DomainError& e) {
      throw DomainError("task " + task_id + ": " + e.what());
    }
    ++rates.tasks;
  }
  for (auto c : {Condition::kAIsOriginal, Condition::kAIsGeneration}) {
    if (!stats.by_condition.contains(c)) {
      stats.notices.push_back("condition " + std::string(to_string(c)) + " has no judgments; omitted");
    }
  }
  return stats;
}

AgreementResult fleiss_kappa(const std::vector<std::vector<std::size_t>>& ratings,
                             std::size_t n_raters) {
  if (ratings.size() < 2) throw DomainError("Fleiss' kappa needs at least 2 items");
  if (n_raters < 2) throw DomainError("Fleiss' kappa needs at least 2 raters");
  const std::size_t k = ratings.front().size();
  if (k < 1) throw DomainError("no categories");

  const double n = static_cast<double>(n_raters);
  const double items = static_cast<double>(ratings.size());
  std::vector<double> column(k, 0.0);
  double p_sum = 0.0;
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    const auto& row = ratings[i];
    if (row.size() != k) throw DomainError("item " + std::to_string(i) + " has a different category count");
    const auto total = std::accumulate(row.begin(), row.end(), std::size_t{0});
    if (total != n_raters) {
      throw DomainError("item " + std::to_string(i) + " sums to " + std::to_string(total) +
                        ", expected " + std::to_string(n_raters));
    }
    double agree = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      const double nij = static_cast<double>(row[c]);
      agree += nij * (nij - 1.0);
      column[c] += nij;
    }
    p_sum += agree / (n * (n - 1.0));
  }
  const double p_bar = p_sum / items;
  double p_e = 0.0;
  for (double col : column) {
    const double pj = col / (items * n);
    p_e += pj * pj;
  }
  if (std::abs(1.0 - p_e) < 1e-15) {
    throw DomainError("Fleiss' kappa undefined: every rating falls in one category");
  }
  return {(p_bar - p_e) / (1.0 - p_e), p_bar, p_e, ratings.size(), n_raters, k};
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("series lengths differ");
  const std::size_t n = x.size();
  if (n < 3) throw DomainError("Pearson test needs n >= 3, got " + std::to_string(n));
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DomainError("correlation undefined for a constant series");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);

  const double dof = static_cast<double>(n - 2);
  double p = 0.0;
  if (1.0 - r * r > 0.0) {
    const double t = r * std::sqrt(dof / (1.0 - r * r));
    // Two-sided tail of Student's t: I_{dof/(dof+t^2)}(dof/2, 1/2).
    p = boost::math::ibeta(dof / 2.0, 0.5, dof / (dof + t * t));
  }
  return {r, std::clamp(p, 0.0, 1.0), n};
}

double median(std::vector<double> values) {
  if (values.empty()) throw DomainError("median of no values");
  std::sort(values.begin(), values.end());
  const auto mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return (values[mid - 1] + values[mid]) / 2.0;
}

FamiliarityStats familiarity_stats(std::span<const CanonicalJudgment> judgments) {
  if (judgments.empty()) throw DomainError("no judgments");
  std::vector<double> scores;
  scores.reserve(judgments.size());
  for (const auto& j : judgments) scores.push_back(j.familiarity);
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
  return {mean, median(scores), scores.size()};
}

TimingStats timing_stats(std::span<const double> durations) {
  if (durations.empty()) throw DomainError("no durations");
  const double n = static_cast<double>(durations.size());
  const double mean = std::accumulate(durations.begin(), durations.end(), 0.0) / n;
  double ss = 0.0;
  for (double d : durations) ss += (d - mean) * (d - mean);
  const double sd = durations.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {median(std::vector<double>(durations.begin(), durations.end())), sd, durations.size()};
}

AuditMatrices audit_matrices(std::span<const CanonicalJudgment> judgments) {
  AuditMatrices m;
  m.per_task = json::array();
  std::set<std::size_t> rater_counts;
  for (const auto& [task_id, group] : group_by_task(judgments)) {
    rater_counts.insert(group.size());
    json steps = json::array();
    for (const auto& sv : step_votes(group)) {
      const auto inc = static_cast<std::size_t>(std::count(sv.included.begin(), sv.included.end(), true));
      const auto val = static_cast<std::size_t>(std::count(sv.valid.begin(), sv.valid.end(), true));
      m.included_counts.push_back({inc, sv.included.size() - inc});
      m.valid_counts.push_back({val, sv.valid.size() - val});
      steps.push_back({{"included_votes", sv.included}, {"valid_votes", sv.valid}});
    }
    json missing = json::array();
    for (const auto& mv : missing_votes(group)) missing.push_back(mv);
    json workers = json::array();
    for (const auto* j : group) workers.push_back(j->worker_id);
    m.per_task.push_back({{"task_id", task_id},
                          {"recipe_id", group.front()->recipe_id},
                          {"condition", to_string(group.front()->condition)},
                          {"workers", std::move(workers)},
                          {"steps", std::move(steps)},
                          {"missing_votes", std::move(missing)}});
  }
  m.raters = rater_counts.size() == 1 ? *rater_counts.begin() : 0;
  return m;
}

namespace {

std::optional<CorrelationResult> try_pearson(const std::vector<double>& x, const std::vector<double>& y,
                                             const std::string& label, std::vector<std::string>& notices) {
  try {
    return pearson(x, y);
  } catch (const DomainError& e) {
    notices.push_back(label + ": " + e.what());
    return std::nullopt;
  }
}

std::optional<AgreementResult> try_kappa(const std::vector<std::vector<std::size_t>>& counts,
                                         std::size_t raters, const std::string& label,
                                         std::vector<std::string>& notices) {
  if (raters == 0) {
    notices.push_back(label + ": tasks have differing annotator counts; kappa omitted");
    return std::nullopt;
  }
  try {
    return fleiss_kappa(counts, raters);
  } catch (const DomainError& e) {
    notices.push_back(label + ": " + e.what());
    return std::nullopt;
  }
}

}  // namespace

AnalysisReport build_report(std::span<const tasks::AnnotationTask> task_list,
                            std::span<const tasks::TaskResponse> responses) {
  if (responses.empty()) throw DomainError("no responses to analyze");
  const auto judgments = normalize(task_list, responses);

  AnalysisReport report;
  std::set<std::string> task_ids, workers;
  for (const auto& j : judgments) {
    task_ids.insert(j.task_id);
    workers.insert(j.worker_id);
  }
  report.n_tasks = task_ids.size();
  report.n_responses = judgments.size();
  report.n_workers = workers.size();

  report.preferences = preference_stats(judgments);
  try {
    report.aggregate = inclusion_validity_stats(judgments);
  } catch (const Error& e) {
    throw DomainError(std::string("aggregate statistics: ") + e.what());
  }
  report.notices = report.aggregate.notices;

  const auto audit = audit_matrices(judgments);
  report.kappa_included = try_kappa(audit.included_counts, audit.raters, "kappa (included)", report.notices);
  report.kappa_valid = try_kappa(audit.valid_counts, audit.raters, "kappa (valid)", report.notices);

  std::vector<double> pref, fam, len_a, len_b, minutes;
  for (const auto& j : judgments) {
    pref.push_back(j.preference_code);
    fam.push_back(j.familiarity);
    len_a.push_back(static_cast<double>(j.length_a));
    len_b.push_back(static_cast<double>(j.length_b));
    minutes.push_back(j.duration_minutes);
  }
  report.familiarity_vs_preference = try_pearson(fam, pref, "familiarity vs preference", report.notices);
  report.length_a_vs_preference = try_pearson(len_a, pref, "Recipe A length vs preference", report.notices);
  report.length_b_vs_preference = try_pearson(len_b, pref, "Recipe B length vs preference", report.notices);
  report.familiarity = familiarity_stats(judgments);
  report.timing = timing_stats(minutes);
  return report;
}

std::string format_percent(double proportion) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", proportion * 100.0);
  return buf;
}

std::string format_decimal(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s = buf;
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

namespace {

std::string ratio(std::size_t num, std::size_t den) {
  return std::to_string(num) + "/" + std::to_string(den);
}

void line_preferences(std::ostringstream& out, const std::string& label, const PreferenceDistribution& d) {
  out << "  " << label << " (n=" << d.total() << "): generation " << format_percent(d.share(1))
      << ", original " << format_percent(d.share(-1)) << ", neither " << format_percent(d.share(0))
      << "\n";
}

std::string correlation_text(const std::optional<CorrelationResult>& c) {
  if (!c) return "n/a";
  return "r = " + format_decimal(c->r, 4) + " (p = " + format_decimal(c->p_value, 4) +
         ", n = " + std::to_string(c->n) + ")";
}

std::string kappa_text(const std::optional<AgreementResult>& k) {
  if (!k) return "n/a";
  return format_decimal(k->kappa, 2) + " (" + std::to_string(k->n_items) + " items, " +
         std::to_string(k->n_raters) + " raters)";
}

json correlation_json(const std::optional<CorrelationResult>& c) {
  if (!c) return nullptr;
  return {{"r", c->r}, {"p_value", c->p_value}, {"n", c->n}};
}

json kappa_json(const std::optional<AgreementResult>& k) {
  if (!k) return nullptr;
  return {{"kappa", k->kappa},       {"observed", k->observed}, {"expected", k->expected},
          {"n_items", k->n_items},   {"n_raters", k->n_raters}, {"n_categories", k->n_categories}};
}

json distribution_json(const PreferenceDistribution& d) {
  return {{"n", d.total()},
          {"counts", {{"original", d.original}, {"neither", d.neither}, {"generation", d.generation}}},
          {"proportions",
           {{"original", d.share(-1)}, {"neither", d.share(0)}, {"generation", d.share(1)}}}};
}

}  // namespace

std::string render_text(const AnalysisReport& r) {
  std::ostringstream out;
  out << "Annotation analysis: " << r.n_tasks << " tasks, " << r.n_responses << " responses, "
      << r.n_workers << " workers\n";
  out << "Time per response: median " << format_decimal(r.timing.median_minutes, 1)
      << " min, std dev " << format_decimal(r.timing.stddev_minutes, 1) << " min\n\n";

  out << "Preferences (individual level)\n";
  line_preferences(out, "overall", r.preferences.overall);
  for (const auto& [c, d] : r.preferences.by_condition) line_preferences(out, std::string(to_string(c)), d);

  out << "\nSteps (majority vote per task)\n";
  for (const auto& [c, rates] : r.aggregate.by_condition) {
    const bool a_original = c == Condition::kAIsOriginal;
    const std::string b_side = a_original ? "generation" : "original";
    const std::string a_side = a_original ? "original" : "generation";
    out << "  " << to_string(c) << " (" << rates.tasks << " tasks)\n";
    out << "    " << b_side << " steps included in Recipe A: " << format_percent(rates.inclusion_rate())
        << " (" << ratio(rates.included, rates.steps) << ")\n";
    out << "    added " << b_side << " steps judged valid: ";
    if (auto v = rates.validity_rate()) {
      out << format_percent(*v) << " (" << ratio(rates.added_valid, rates.added) << ")\n";
    } else {
      out << "n/a (no added steps)\n";
    }
    out << "    " << a_side << " steps missing from Recipe B: " << format_percent(rates.missing_rate())
        << " (" << ratio(rates.missing, rates.static_steps) << ")\n";
  }

  out << "\nAgreement (Fleiss' kappa)\n";
  out << "  included: " << kappa_text(r.kappa_included) << "\n";
  out << "  valid:    " << kappa_text(r.kappa_valid) << "\n";

  out << "\nFamiliarity: mean " << format_decimal(r.familiarity.mean, 2) << ", median "
      << format_decimal(r.familiarity.median, 2) << "\n";
  out << "Correlations with preference (original -1, neither 0, generation +1)\n";
  out << "  familiarity:     " << correlation_text(r.familiarity_vs_preference) << "\n";
  out << "  Recipe A length: " << correlation_text(r.length_a_vs_preference) << "\n";
  out << "  Recipe B length: " << correlation_text(r.length_b_vs_preference) << "\n";

  if (!r.notices.empty()) {
    out << "\nNotices\n";
    for (const auto& n : r.notices) out << "  - " << n << "\n";
  }
  return out.str();
}

json to_json(const AnalysisReport& r) {
  json by_condition = json::object();
  for (const auto& [c, d] : r.preferences.by_condition) by_condition[std::string(to_string(c))] = distribution_json(d);
  json steps = json::object();
  for (const auto& [c, rates] : r.aggregate.by_condition) {
    const auto validity = rates.validity_rate();
    steps[std::string(to_string(c))] = {{"tasks", rates.tasks},
                                        {"steps", rates.steps},
                                        {"included", rates.included},
                                        {"added", rates.added},
                                        {"added_valid", rates.added_valid},
                                        {"static_steps", rates.static_steps},
                                        {"missing", rates.missing},
                                        {"inclusion_rate", rates.inclusion_rate()},
                                        {"validity_rate", validity ? json(*validity) : json(nullptr)},
                                        {"missing_rate", rates.missing_rate()}};
  }
  return {{"n_tasks", r.n_tasks},
          {"n_responses", r.n_responses},
          {"n_workers", r.n_workers},
          {"preferences", {{"overall", distribution_json(r.preferences.overall)}, {"by_condition", by_condition}}},
          {"steps", steps},
          {"kappa", {{"included", kappa_json(r.kappa_included)}, {"valid", kappa_json(r.kappa_valid)}}},
          {"familiarity", {{"mean", r.familiarity.mean}, {"median", r.familiarity.median}, {"n", r.familiarity.n}}},
          {"correlations",
           {{"familiarity_vs_preference", correlation_json(r.familiarity_vs_preference)},
            {"length_a_vs_preference", correlation_json(r.length_a_vs_preference)},
            {"length_b_vs_preference", correlation_json(r.length_b_vs_preference)}}},
          {"timing_minutes", {{"median", r.timing.median_minutes}, {"stddev", r.timing.stddev_minutes}, {"n", r.timing.n}}},
          {"notices", r.notices}};
}

}  // namespace souschef::analytics
