#include "souschef/tasks.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "souschef/error.hpp"
#include "souschef/random.hpp"

namespace souschef::tasks {

using nlohmann::json;

AnnotationTask make_task(const corpus::Recipe& original, const llm::RevisionResult& revision,
                         std::uint64_t seed, std::size_t target_annotations) {
  if (original.id != revision.recipe_id) {
    throw ValidationError({"revision for '" + revision.recipe_id + "' paired with recipe '" +
                           original.id + "'"});
  }
  if (target_annotations < 1) throw ValidationError({"target_annotations must be >= 1"});

  std::mt19937_64 gen(mix_seed({seed, stable_hash(original.id)}));
  const bool a_is_generation = (gen() >> 63) != 0;

  AnnotationTask t;
  t.task_id = "t-" + sha256_hex(original.id + "\n" + std::to_string(seed)).substr(0, 16);
  t.recipe_id = original.id;
  t.dish_title = original.title;
  t.ingredients = original.ingredients;
  t.recipe_a_steps = a_is_generation ? revision.revised_steps : original.steps;
  t.recipe_b_steps = a_is_generation ? original.steps : revision.revised_steps;
  t.a_is_generation = a_is_generation;
  t.flip_seed = seed;
  t.target_annotations = target_annotations;
  if (auto v = validate_task(t); !v.empty()) throw ValidationError(std::move(v));
  return t;
}

std::pair<std::vector<std::string>, std::vector<std::string>> unflip(const AnnotationTask& task) {
  if (task.a_is_generation) return {task.recipe_b_steps, task.recipe_a_steps};
  return {task.recipe_a_steps, task.recipe_b_steps};
}

std::vector<std::string> validate_task(const AnnotationTask& task) {
  std::vector<std::string> v;
  if (task.task_id.empty()) v.emplace_back("task_id missing");
  if (task.recipe_a_steps.empty()) v.emplace_back("recipe_a_steps empty");
  if (task.recipe_b_steps.empty()) v.emplace_back("recipe_b_steps empty");
  if (task.target_annotations < 1) v.emplace_back("target_annotations must be >= 1");
  return v;
}

std::vector<std::string> validate_step(const AnnotationTask& task, const StepJudgment& j) {
  std::vector<std::string> v;
  const auto where = "step " + std::to_string(j.step_index) + ": ";
  if (j.step_index >= task.recipe_b_steps.size()) v.push_back(where + "step_index out of range");
  if (j.included) {
    if (j.valid) v.push_back(where + "valid answered without trigger");
    if (j.invalid_reasons) v.push_back(where + "invalid_reasons answered without trigger");
    return v;
  }
  if (!j.valid) {
    v.push_back(where + "valid unanswered");
    if (j.invalid_reasons) v.push_back(where + "invalid_reasons answered without trigger");
    return v;
  }
  if (*j.valid) {
    if (j.invalid_reasons) v.push_back(where + "invalid_reasons answered without trigger");
    return v;
  }
  if (!j.invalid_reasons || j.invalid_reasons->empty()) {
    v.push_back(where + "missing invalid reason");
    return v;
  }
  std::set<InvalidReason::Kind> kinds;
  for (const auto& r : *j.invalid_reasons) {
    if (!kinds.insert(r.kind).second) v.push_back(where + "duplicate invalid reason");
    if (r.kind == InvalidReason::Kind::kOther && is_blank(r.text)) {
      v.push_back(where + "other reason needs text");
    }
    if (r.kind != InvalidReason::Kind::kOther && !r.text.empty()) {
      v.push_back(where + "text given for a fixed reason");
    }
  }
  return v;
}

std::vector<std::string> validate_final(const AnnotationTask& task, const FinalAnswers& f) {
  std::vector<std::string> v;
  if (f.familiarity < 1 || f.familiarity > 5) v.emplace_back("familiarity out of range 1-5");
  std::set<std::size_t> seen;
  for (auto idx : f.missing_steps) {
    if (idx >= task.recipe_a_steps.size()) {
      v.push_back("missing step " + std::to_string(idx) + " out of range");
    }
    if (!seen.insert(idx).second) v.push_back("missing step " + std::to_string(idx) + " repeated");
  }
  return v;
}

std::vector<std::string> validate_response(const AnnotationTask& task, const TaskResponse& r) {
  std::vector<std::string> v;
  if (r.task_id != task.task_id) v.push_back("response for task '" + r.task_id + "' checked against '" + task.task_id + "'");
  if (is_blank(r.worker_id)) v.emplace_back("worker_id missing");
  if (r.step_judgments.size() != task.recipe_b_steps.size()) {
    v.push_back("expected " + std::to_string(task.recipe_b_steps.size()) + " step judgments, got " +
                std::to_string(r.step_judgments.size()));
  }
  for (std::size_t i = 0; i < r.step_judgments.size(); ++i) {
    const auto& j = r.step_judgments[i];
    if (j.step_index != i) v.push_back("judgment " + std::to_string(i) + " has step_index " + std::to_string(j.step_index));
    auto sv = validate_step(task, j);
    v.insert(v.end(), sv.begin(), sv.end());
  }
  auto fv = validate_final(task, r.final);
  v.insert(v.end(), fv.begin(), fv.end());
  if (r.submitted_at < r.started_at) v.emplace_back("submitted_at precedes started_at");
  return v;
}

std::string_view to_string(Preference p) noexcept {
  switch (p) {
    case Preference::kA: return "A";
    case Preference::kB: return "B";
    case Preference::kNeither: return "neither";
  }
  return "neither";
}

Preference preference_from_string(std::string_view s) {
  if (s == "A") return Preference::kA;
  if (s == "B") return Preference::kB;
  if (s == "neither") return Preference::kNeither;
  throw FormatError("preference must be A, B or neither, got '" + std::string(s) + "'");
}

namespace {

std::string_view reason_name(InvalidReason::Kind k) {
  switch (k) {
    case InvalidReason::Kind::kInvalidIngredient: return "invalid_ingredient";
    case InvalidReason::Kind::kInvalidAction: return "invalid_action";
    case InvalidReason::Kind::kOther: return "other";
  }
  return "other";
}

InvalidReason::Kind reason_kind(const std::string& s) {
  if (s == "invalid_ingredient") return InvalidReason::Kind::kInvalidIngredient;
  if (s == "invalid_action") return InvalidReason::Kind::kInvalidAction;
  if (s == "other") return InvalidReason::Kind::kOther;
  throw FormatError("unknown invalid reason '" + s + "'");
}

// Runs `fn`, turning json type/lookup errors into FormatError.
template <typename F>
auto guarded(const char* what, F&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw FormatError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

json to_json(const AnnotationTask& t) {
  return json{{"task_id", t.task_id},
              {"recipe_id", t.recipe_id},
              {"dish_title", t.dish_title},
              {"ingredients", t.ingredients},
              {"recipe_a_steps", t.recipe_a_steps},
              {"recipe_b_steps", t.recipe_b_steps},
              {"a_is_generation", t.a_is_generation},
              {"flip_seed", t.flip_seed},
              {"target_annotations", t.target_annotations}};
}

json task_view_json(const AnnotationTask& t) {
  auto j = to_json(t);
  j.erase("a_is_generation");
  j.erase("flip_seed");
  j.erase("recipe_id");
  return j;
}

json to_json(const StepJudgment& s) {
  json j{{"step_index", s.step_index}, {"included", s.included}};
  if (s.valid) j["valid"] = *s.valid;
  if (s.invalid_reasons) {
    json arr = json::array();
    for (const auto& r : *s.invalid_reasons) {
      json item{{"kind", reason_name(r.kind)}};
      if (r.kind == InvalidReason::Kind::kOther) item["text"] = r.text;
      arr.push_back(std::move(item));
    }
    j["invalid_reasons"] = std::move(arr);
  }
  return j;
}

json to_json(const FinalAnswers& f) {
  json j{{"familiarity", f.familiarity},
         {"missing_steps", f.missing_steps},
         {"preference", to_string(f.preference)}};
  if (f.missing_text) j["missing_text"] = *f.missing_text;
  return j;
}

json to_json(const TaskResponse& r) {
  json steps = json::array();
  for (const auto& s : r.step_judgments) steps.push_back(to_json(s));
  return json{{"task_id", r.task_id},
              {"worker_id", r.worker_id},
              {"step_judgments", std::move(steps)},
              {"final", to_json(r.final)},
              {"started_at", format_timestamp(r.started_at)},
              {"submitted_at", format_timestamp(r.submitted_at)}};
}

AnnotationTask task_from_json(const json& j) {
  return guarded("task", [&] {
    AnnotationTask t;
    t.task_id = j.at("task_id").get<std::string>();
    t.recipe_id = j.value("recipe_id", std::string{});
    t.dish_title = j.at("dish_title").get<std::string>();
    t.ingredients = j.at("ingredients").get<std::vector<std::string>>();
    t.recipe_a_steps = j.at("recipe_a_steps").get<std::vector<std::string>>();
    t.recipe_b_steps = j.at("recipe_b_steps").get<std::vector<std::string>>();
    t.a_is_generation = j.at("a_is_generation").get<bool>();
    t.flip_seed = j.at("flip_seed").get<std::uint64_t>();
    t.target_annotations = j.at("target_annotations").get<std::size_t>();
    if (auto v = validate_task(t); !v.empty()) throw ValidationError(std::move(v));
    return t;
  });
}

StepJudgment judgment_from_json(const json& j) {
  return guarded("step judgment", [&] {
    if (!j.is_object()) throw FormatError("step judgment must be an object");
    StepJudgment s;
    s.step_index = j.at("step_index").get<std::size_t>();
    s.included = j.at("included").get<bool>();
    if (j.contains("valid") && !j["valid"].is_null()) s.valid = j["valid"].get<bool>();
    if (j.contains("invalid_reasons") && !j["invalid_reasons"].is_null()) {
      std::vector<InvalidReason> reasons;
      for (const auto& item : j["invalid_reasons"]) {
        InvalidReason r;
        r.kind = reason_kind(item.at("kind").get<std::string>());
        r.text = item.value("text", std::string{});
        reasons.push_back(std::move(r));
      }
      s.invalid_reasons = std::move(reasons);
    }
    return s;
  });
}

FinalAnswers final_from_json(const json& j) {
  return guarded("final answers", [&] {
    if (!j.is_object()) throw FormatError("final answers must be an object");
    FinalAnswers f;
    f.familiarity = j.at("familiarity").get<int>();
    f.missing_steps = j.value("missing_steps", std::vector<std::size_t>{});
    if (j.contains("missing_text") && j["missing_text"].is_string()) {
      f.missing_text = j["missing_text"].get<std::string>();
    }
    f.preference = preference_from_string(j.at("preference").get<std::string>());
    return f;
  });
}

TaskResponse response_from_json(const json& j) {
  return guarded("response", [&] {
    TaskResponse r;
    r.task_id = j.at("task_id").get<std::string>();
    r.worker_id = j.at("worker_id").get<std::string>();
    for (const auto& s : j.at("step_judgments")) r.step_judgments.push_back(judgment_from_json(s));
    r.final = final_from_json(j.at("final"));
    r.started_at = parse_timestamp(j.at("started_at").get<std::string>());
    r.submitted_at = parse_timestamp(j.at("submitted_at").get<std::string>());
    return r;
  });
}

std::string serialize_tasks(std::span<const AnnotationTask> tasks) {
  std::string out;
  for (const auto& t : tasks) out += to_json(t).dump() + "\n";
  return out;
}

std::string serialize_responses(std::span<const TaskResponse> responses) {
  std::string out;
  for (const auto& r : responses) out += to_json(r).dump() + "\n";
  return out;
}

void export_tasks(std::span<const AnnotationTask> tasks, const std::filesystem::path& path) {
  write_file(path, serialize_tasks(tasks));
}

void export_responses(std::span<const TaskResponse> responses, const std::filesystem::path& path) {
  write_file(path, serialize_responses(responses));
}

namespace {

template <typename T, typename Parse>
ImportResult<T> parse_lines(std::string_view text, Parse&& parse) {
  ImportResult<T> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    try {
      out.items.push_back(parse(json::parse(lines[i])));
    } catch (const std::exception& e) {
      out.errors.push_back({i + 1, e.what()});
    }
  }
  return out;
}

}  // namespace

ImportResult<AnnotationTask> parse_tasks(std::string_view text) {
  std::set<std::string> ids;
  return parse_lines<AnnotationTask>(text, [&](const json& j) {
    auto t = task_from_json(j);
    if (!ids.insert(t.task_id).second) throw ValidationError({"duplicate task_id " + t.task_id});
    return t;
  });
}

ImportResult<AnnotationTask> import_tasks(const std::filesystem::path& path) {
  return parse_tasks(read_file(path));
}

ImportResult<TaskResponse> parse_responses(std::string_view text,
                                           std::span<const AnnotationTask> tasks) {
  std::map<std::string_view, const AnnotationTask*> by_id;
  for (const auto& t : tasks) by_id.emplace(t.task_id, &t);
  return parse_lines<TaskResponse>(text, [&](const json& j) {
    auto r = response_from_json(j);
    const auto it = by_id.find(r.task_id);
    if (it == by_id.end()) throw ValidationError({"unknown task_id " + r.task_id});
    if (auto v = validate_response(*it->second, r); !v.empty()) throw ValidationError(std::move(v));
    return r;
  });
}

ImportResult<TaskResponse> import_responses(const std::filesystem::path& path,
                                            std::span<const AnnotationTask> tasks) {
  return parse_responses(read_file(path), tasks);
}

}  // namespace souschef::tasks
