#pragma once

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "souschef/corpus.hpp"
#include "souschef/llm.hpp"
#include "souschef/tasks.hpp"
#include "souschef/util.hpp"

namespace fixtures {

using souschef::corpus::Recipe;
using souschef::tasks::AnnotationTask;
using souschef::tasks::FinalAnswers;
using souschef::tasks::InvalidReason;
using souschef::tasks::Preference;
using souschef::tasks::StepJudgment;
using souschef::tasks::TaskResponse;

inline Recipe make_recipe(std::string id, std::string cls, std::size_t n_steps,
                          std::string title = "") {
  Recipe r;
  r.id = std::move(id);
  r.title = title.empty() ? cls + " " + r.id : std::move(title);
  if (!cls.empty()) r.class_labels = {std::move(cls)};
  r.ingredients = {"1 cup flour", "2 eggs", "salt"};
  for (std::size_t i = 0; i < n_steps; ++i) {
    r.steps.push_back("Do step " + std::to_string(i + 1) + " for " + r.id + ".");
  }
  return r;
}

/// The six-step "Mini Apple Pies" original.
inline Recipe mini_apple_pies() {
  Recipe r;
  r.id = "mini-apple-pies-503243";
  r.title = "Mini Apple Pies";
  r.class_labels = {"apple pie"};
  r.source_url = "https://www.food.com/recipe/mini-apple-pies-503243";
  r.ingredients = {"1/3 cup sugar",        "2 tablespoons flour",
                   "1/2 teaspoon nutmeg",  "1 teaspoon cinnamon",
                   "1/4 teaspoon salt",    "3 apples, peeled and diced",
                   "2 refrigerated pie crusts", "1 egg, beaten"};
  r.steps = {
      "Preheat oven to 350 degrees F.",
      "Line baking sheets with parchment paper and set aside.",
      "In a medium bowl combine first 5 ingredients (sugar - salt) and then add the apples and toss.",
      "Unroll the pie crusts on a floured board and cut 3-inch rounds (note in description), re-roll "
      "scraps and cut out more rounds (need an even number of rounds).",
      "brush each round with beaten egg and then place a large spoonful of apple mixture in center of "
      "half of the rounds, top each with a plain round which you have cut a vent in, sealing edges "
      "with a fork or your fingers (we used fingers), sprinkle with sugar.",
      "Bake pies on baking sheets for 20 minutes or until golden.",
  };
  return r;
}

/// The ten revised steps for "Mini Apple Pies", as a completion continuing after "1. ".
inline std::string mini_apple_pies_revision_completion() {
  return "Preheat oven to 350 degrees F.\n"
         "2. Line baking sheets with parchment paper and set aside.\n"
         "3. In a medium bowl, whisk together sugar, flour, nutmeg, cinnamon, and salt.\n"
         "4. Add the peeled and diced apples and toss to combine.\n"
         "5. Unroll the pie crusts on a floured board and cut 3-inch rounds. Re-roll scraps and cut out "
         "more rounds until you have an even number of rounds.\n"
         "6. Brush each round with beaten egg.\n"
         "7. Place a large spoonful of the apple mixture in the center of half of the rounds.\n"
         "8. Top each filled round with a plain round and use a fork or fingers to seal the edges.\n"
         "9. Sprinkle with sugar.\n"
         "10. Bake pies on baking sheets for 20 minutes or until golden.";
}

/// Synthetic corpus: `per_stratum_pool` long and short recipes for every class,
/// plus out-of-range and unlabeled noise, shuffled by `seed`.
inline souschef::corpus::RecipeCollection synthetic_corpus(const std::vector<std::string>& classes,
                                                           std::size_t total, std::uint64_t seed) {
  souschef::corpus::RecipeCollection out;
  std::mt19937_64 gen(seed);
  for (std::size_t i = 0; out.size() < total; ++i) {
    const auto& cls = classes[i % classes.size()];
    std::size_t steps;
    switch (gen() % 5) {
      case 0: steps = 1 + gen() % 4; break;     // below short range
      case 1: steps = 17 + gen() % 6; break;    // above long range
      case 2: steps = 11 + gen() % 6; break;    // long
      default: steps = 5 + gen() % 6; break;    // short
    }
    char id[32];
    std::snprintf(id, sizeof id, "r%05zu", i);
    out.push_back(make_recipe(id, (gen() % 10 == 0) ? "" : cls, steps));
  }
  return out;
}

/// A revision with the given steps for `recipe`.
inline souschef::llm::RevisionResult revision_of(const Recipe& recipe, std::vector<std::string> steps) {
  souschef::llm::RevisionResult r;
  r.recipe_id = recipe.id;
  r.revised_steps = std::move(steps);
  r.raw_completion = souschef::llm::render_completion(r.revised_steps);
  r.backend_id = "fixture";
  r.prompt_fingerprint = "0";
  r.created_at = souschef::Timestamp(std::chrono::milliseconds(1680000000000));
  return r;
}

inline StepJudgment included(std::size_t i) { return {i, true, std::nullopt, std::nullopt}; }
inline StepJudgment added_valid(std::size_t i) { return {i, false, true, std::nullopt}; }
inline StepJudgment added_invalid(std::size_t i) {
  return {i, false, false, std::vector<InvalidReason>{{InvalidReason::Kind::kInvalidAction, ""},
                                                      {InvalidReason::Kind::kOther, "not part of this dish"}}};
}

struct StudyFixture {
  std::vector<AnnotationTask> tasks;
  std::vector<TaskResponse> responses;
};

/// Eight tasks x three annotators with these majority-voted aggregates:
///  - A = original: 43 generation steps, 37 included by majority, 5 of 6 added valid,
///    no original step missing by majority; preferences 5 generation / 7 original.
///  - A = generation: 49 original steps, 43 included, 2 of 6 added valid;
///    preferences 10 generation / 1 original / 1 neither.
///  - 24 familiarity scores summing to 62 (median 2.5); 12 workers x 2 responses;
///    response times with median 22.8 min and sample SD 33.7 min.
/// Individual raters dissent on some steps so agreement is not perfect.
inline StudyFixture study_fixture() {
  struct Plan {
    bool a_is_generation;
    std::size_t a_len;
    std::size_t b_len;
    std::vector<std::size_t> added_valid_steps;    // majority not-included, valid
    std::vector<std::size_t> added_invalid_steps;  // majority not-included, invalid
    std::vector<std::size_t> missing_majority;     // Recipe A steps missing by majority
  };
  const std::vector<Plan> plans = {
      {false, 7, 10, {2, 7}, {}, {}},
      {false, 8, 11, {5}, {}, {}},
      {false, 6, 10, {3}, {8}, {}},
      {false, 9, 12, {10}, {}, {}},
      {true, 14, 12, {4}, {9}, {}},
      {true, 15, 13, {}, {1, 11}, {3}},
      {true, 13, 11, {6}, {}, {}},
      {true, 16, 13, {}, {12}, {}},
  };
  const std::vector<std::string> dishes = {"couscous salad",     "apple pie",       "clam chowder",
                                           "lentil soup",        "chicken enchiladas", "beef stroganoff",
                                           "coconut macaroons",  "pad thai"};
  // Preference per (task, rater), A/B as the annotator saw them.
  const std::vector<std::vector<Preference>> prefs = {
      {Preference::kB, Preference::kA, Preference::kA},  // A original: B = generation
      {Preference::kB, Preference::kB, Preference::kA},
      {Preference::kA, Preference::kA, Preference::kB},
      {Preference::kA, Preference::kB, Preference::kA},
      {Preference::kA, Preference::kA, Preference::kA},  // A generation: A = generation
      {Preference::kA, Preference::kA, Preference::kB},
      {Preference::kA, Preference::kA, Preference::kNeither},
      {Preference::kA, Preference::kA, Preference::kA},
  };
  const std::vector<int> familiarity = {1, 3, 2, 4, 2, 3, 1, 2, 3, 4, 2, 3,
                                        2, 4, 3, 1, 2, 3, 4, 2, 3, 2, 4, 2};
  const std::vector<long> seconds = {390,  1416, 480,  1500, 555,  1590, 660,  1680,
                                     750,  1800, 840,  1950, 930,  2100, 1005, 2280,
                                     1080, 2520, 1170, 2820, 1260, 3300, 1320, 10645};

  StudyFixture fx;
  const souschef::Timestamp base = souschef::parse_timestamp("2023-04-01T09:00:00Z");
  for (std::size_t t = 0; t < plans.size(); ++t) {
    const auto& p = plans[t];
    AnnotationTask task;
    task.task_id = "task-" + std::to_string(t);
    task.recipe_id = "recipe-" + std::to_string(t);
    task.dish_title = dishes[t];
    task.ingredients = {"ingredient one", "ingredient two"};
    for (std::size_t i = 0; i < p.a_len; ++i) task.recipe_a_steps.push_back("A step " + std::to_string(i + 1));
    for (std::size_t i = 0; i < p.b_len; ++i) task.recipe_b_steps.push_back("B step " + std::to_string(i + 1));
    task.a_is_generation = p.a_is_generation;
    task.flip_seed = t;
    task.target_annotations = 3;
    fx.tasks.push_back(task);

    auto contains = [](const std::vector<std::size_t>& v, std::size_t x) {
      return std::find(v.begin(), v.end(), x) != v.end();
    };
    for (std::size_t s = 0; s < 3; ++s) {
      const std::size_t k = t * 3 + s;
      TaskResponse r;
      r.task_id = task.task_id;
      r.worker_id = "worker-" + std::to_string(k % 12);
      for (std::size_t i = 0; i < p.b_len; ++i) {
        const bool dissent = s == (i + t) % 3;
        if (contains(p.added_valid_steps, i)) {
          // Two or three raters call it new but valid; a dissenter may call it included.
          r.step_judgments.push_back(dissent && i % 2 == 0 ? included(i) : added_valid(i));
        } else if (contains(p.added_invalid_steps, i)) {
          // Two raters: new and invalid; the dissenter: new but valid.
          r.step_judgments.push_back(dissent ? added_valid(i) : added_invalid(i));
        } else {
          // Included by majority; one rater dissents on every fourth step.
          r.step_judgments.push_back(dissent && i % 4 == 1 ? added_valid(i) : included(i));
        }
      }
      r.final.familiarity = familiarity[k];
      r.final.preference = prefs[t][s];
      for (auto m : p.missing_majority) {
        if (s != 2) r.final.missing_steps.push_back(m);
      }
      // A lone rater flags a step missing in some tasks; never a majority.
      if (s == 1 && t % 2 == 0) r.final.missing_steps.push_back(0);
      r.started_at = base + std::chrono::hours(static_cast<long>(k));
      r.submitted_at = r.started_at + std::chrono::seconds(seconds[k]);
      fx.responses.push_back(std::move(r));
    }
  }
  return fx;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             ("souschef-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
