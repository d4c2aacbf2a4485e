#include "souschef/corpus.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <sstream>

#include "souschef/error.hpp"
#include "souschef/random.hpp"
#include "souschef/util.hpp"

namespace souschef::corpus {

using nlohmann::json;

SampleSpec SampleSpec::standard(std::uint64_t seed) {
  SampleSpec spec;
  spec.classes = {"couscous salad",     "apple pie",       "clam chowder",      "lentil soup",
                  "chicken enchiladas", "beef stroganoff", "coconut macaroons", "chow mein",
                  "pad thai",           "paella"};
  spec.seed = seed;
  return spec;
}

SampleSpec sample_spec_from_json(const json& j) {
  try {
    SampleSpec spec = SampleSpec::standard();
    if (j.contains("classes")) spec.classes = j.at("classes").get<std::vector<std::string>>();
    spec.per_class_long = j.value("per_class_long", spec.per_class_long);
    spec.per_class_short = j.value("per_class_short", spec.per_class_short);
    auto range = [&](const char* key, StepRange& r) {
      if (!j.contains(key)) return;
      const auto v = j.at(key).get<std::vector<std::size_t>>();
      if (v.size() != 2) throw FormatError(std::string(key) + " must be [min, max]");
      r = {v[0], v[1]};
    };
    range("long_range", spec.long_range);
    range("short_range", spec.short_range);
    spec.seed = j.value("seed", spec.seed);
    return spec;
  } catch (const json::exception& e) {
    throw FormatError(std::string("sample spec: ") + e.what());
  }
}

json to_json(const SampleSpec& spec) {
  return {{"classes", spec.classes},
          {"per_class_long", spec.per_class_long},
          {"per_class_short", spec.per_class_short},
          {"long_range", {spec.long_range.min, spec.long_range.max}},
          {"short_range", {spec.short_range.min, spec.short_range.max}},
          {"seed", spec.seed}};
}

std::vector<std::string> check_sample_spec(const SampleSpec& spec) {
  std::vector<std::string> problems;
  if (spec.classes.empty()) problems.emplace_back("classes empty");
  std::set<std::string> seen;
  for (const auto& c : spec.classes) {
    if (is_blank(c)) problems.emplace_back("blank class label");
    if (!seen.insert(to_lower(trim(c))).second) problems.push_back("duplicate class '" + c + "'");
  }
  for (const auto* r : {&spec.long_range, &spec.short_range}) {
    if (r->min > r->max) problems.emplace_back("step range min exceeds max");
  }
  const bool overlap = spec.long_range.min <= spec.short_range.max &&
                       spec.short_range.min <= spec.long_range.max;
  if (overlap) problems.emplace_back("long and short ranges overlap");
  return problems;
}

std::size_t step_count(const Recipe& recipe) noexcept {
  return static_cast<std::size_t>(std::count_if(recipe.steps.begin(), recipe.steps.end(),
                                                [](const auto& s) { return !is_blank(s); }));
}

LengthBucket bucket_of(const Recipe& recipe, const SampleSpec& spec) noexcept {
  const auto n = step_count(recipe);
  if (spec.long_range.contains(n)) return LengthBucket::kLong;
  if (spec.short_range.contains(n)) return LengthBucket::kShort;
  return LengthBucket::kOutOfRange;
}

std::vector<std::string> recipe_violations(const Recipe& recipe) {
  std::vector<std::string> v;
  if (is_blank(recipe.id)) v.emplace_back("id missing");
  if (is_blank(recipe.title)) v.emplace_back("title missing");
  if (recipe.ingredients.empty()) v.emplace_back("ingredients empty");
  for (std::size_t i = 0; i < recipe.ingredients.size(); ++i) {
    if (is_blank(recipe.ingredients[i])) v.push_back("ingredient " + std::to_string(i + 1) + " blank");
  }
  if (recipe.steps.empty()) v.emplace_back("steps empty");
  for (std::size_t i = 0; i < recipe.steps.size(); ++i) {
    if (is_blank(recipe.steps[i])) v.push_back("step " + std::to_string(i + 1) + " blank");
  }
  return v;
}

namespace {

// Reads an array of {"text": ...} objects. Bare strings are tolerated.
std::vector<std::string> read_text_array(const json& record, const char* field,
                                         std::vector<std::string>& problems) {
  std::vector<std::string> out;
  const auto it = record.find(field);
  if (it == record.end() || it->is_null()) return out;
  if (!it->is_array()) {
    problems.push_back(std::string(field) + " not an array");
    return out;
  }
  for (std::size_t i = 0; i < it->size(); ++i) {
    const auto& item = (*it)[i];
    if (item.is_object() && item.contains("text") && item["text"].is_string()) {
      out.push_back(item["text"].get<std::string>());
    } else if (item.is_string()) {
      out.push_back(item.get<std::string>());
    } else {
      problems.push_back(std::string(field) + " entry " + std::to_string(i + 1) + " has no text");
      out.emplace_back();
    }
  }
  return out;
}

std::string read_string(const json& record, const char* field, std::vector<std::string>& problems) {
  const auto it = record.find(field);
  if (it == record.end() || it->is_null()) return {};
  if (!it->is_string()) {
    problems.push_back(std::string(field) + " not a string");
    return {};
  }
  return it->get<std::string>();
}

}  // namespace

ValidationOutcome validate_recipe(const json& record) {
  if (!record.is_object()) return std::vector<std::string>{"record not an object"};
  std::vector<std::string> problems;
  Recipe r;
  r.id = read_string(record, "id", problems);
  r.title = read_string(record, "title", problems);
  if (const auto it = record.find("class"); it != record.end() && !it->is_null()) {
    if (it->is_string()) {
      r.class_labels.push_back(it->get<std::string>());
    } else if (it->is_array() && std::all_of(it->begin(), it->end(),
                                             [](const json& j) { return j.is_string(); })) {
      r.class_labels = it->get<std::vector<std::string>>();
    } else {
      problems.emplace_back("class not a string or string array");
    }
  }
  r.ingredients = read_text_array(record, "ingredients", problems);
  r.steps = read_text_array(record, "instructions", problems);
  if (const auto it = record.find("url"); it != record.end() && it->is_string()) {
    r.source_url = it->get<std::string>();
  }
  auto violations = recipe_violations(r);
  problems.insert(problems.end(), violations.begin(), violations.end());
  if (!problems.empty()) return problems;
  return r;
}

LoadResult parse_corpus(std::string_view text) {
  LoadResult result;
  std::set<std::string> ids;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    json record;
    try {
      record = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      throw FormatError("line " + std::to_string(i + 1) + ": " + e.what());
    }
    auto outcome = validate_recipe(record);
    if (auto* failures = std::get_if<std::vector<std::string>>(&outcome)) {
      std::string id;
      if (record.is_object() && record.contains("id") && record["id"].is_string()) {
        id = record["id"].get<std::string>();
      }
      result.skipped.push_back({i + 1, std::move(id), std::move(*failures)});
      continue;
    }
    auto& recipe = std::get<Recipe>(outcome);
    if (!ids.insert(recipe.id).second) {
      result.skipped.push_back({i + 1, recipe.id, {"duplicate id"}});
      continue;
    }
    result.recipes.push_back(std::move(recipe));
  }
  return result;
}

LoadResult load_corpus(const std::filesystem::path& path) { return parse_corpus(read_file(path)); }

json to_record(const Recipe& recipe) {
  json j;
  j["id"] = recipe.id;
  j["title"] = recipe.title;
  if (recipe.class_labels.size() == 1) {
    j["class"] = recipe.class_labels.front();
  } else if (!recipe.class_labels.empty()) {
    j["class"] = recipe.class_labels;
  }
  auto texts = [](const std::vector<std::string>& v) {
    json arr = json::array();
    for (const auto& s : v) arr.push_back({{"text", s}});
    return arr;
  };
  j["ingredients"] = texts(recipe.ingredients);
  j["instructions"] = texts(recipe.steps);
  if (recipe.source_url) j["url"] = *recipe.source_url;
  return j;
}

std::string serialize_corpus(const RecipeCollection& recipes) {
  std::string out;
  for (const auto& r : recipes) {
    out += to_record(r).dump();
    out += '\n';
  }
  return out;
}

void write_corpus(const std::filesystem::path& path, const RecipeCollection& recipes) {
  write_file(path, serialize_corpus(recipes));
}

RecipeCollection stratified_sample(const RecipeCollection& collection, const SampleSpec& spec) {
  if (auto problems = check_sample_spec(spec); !problems.empty()) {
    throw ValidationError(std::move(problems));
  }
  const std::size_t n_classes = spec.classes.size();
  std::vector<std::string> lowered;
  lowered.reserve(n_classes);
  for (const auto& c : spec.classes) lowered.push_back(to_lower(trim(c)));

  // strata[class][0 = long, 1 = short] -> indices into collection
  std::vector<std::array<std::vector<std::size_t>, 2>> strata(n_classes);
  for (std::size_t i = 0; i < collection.size(); ++i) {
    const auto& recipe = collection[i];
    const auto bucket = bucket_of(recipe, spec);
    if (bucket == LengthBucket::kOutOfRange) continue;
    std::optional<std::size_t> owner;
    for (std::size_t c = 0; c < n_classes && !owner; ++c) {
      for (const auto& label : recipe.class_labels) {
        if (to_lower(trim(label)) == lowered[c]) {
          owner = c;
          break;
        }
      }
    }
    if (!owner) continue;
    strata[*owner][bucket == LengthBucket::kLong ? 0 : 1].push_back(i);
  }

  std::vector<std::string> deficits;
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (strata[c][0].size() < spec.per_class_long) {
      deficits.push_back("(" + spec.classes[c] + ", long): need " +
                         std::to_string(spec.per_class_long) + ", have " +
                         std::to_string(strata[c][0].size()));
    }
    if (strata[c][1].size() < spec.per_class_short) {
      deficits.push_back("(" + spec.classes[c] + ", short): need " +
                         std::to_string(spec.per_class_short) + ", have " +
                         std::to_string(strata[c][1].size()));
    }
  }
  if (!deficits.empty()) throw ValidationError(std::move(deficits));

  RecipeCollection sample;
  sample.reserve(n_classes * (spec.per_class_long + spec.per_class_short));
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t b = 0; b < 2; ++b) {
      auto& members = strata[c][b];
      // Sort by id so the draw does not depend on input file order.
      std::sort(members.begin(), members.end(), [&](std::size_t x, std::size_t y) {
        return collection[x].id < collection[y].id;
      });
      std::mt19937_64 gen(mix_seed({spec.seed, stable_hash(lowered[c]), b}));
      seeded_shuffle(std::span<std::size_t>(members), gen);
      const std::size_t k = b == 0 ? spec.per_class_long : spec.per_class_short;
      for (std::size_t i = 0; i < k; ++i) sample.push_back(collection[members[i]]);
    }
  }
  return sample;
}

}  // namespace souschef::corpus
