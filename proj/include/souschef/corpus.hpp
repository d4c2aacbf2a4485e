#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace souschef::corpus {

struct Recipe {
  std::string id;
  std::string title;
  /// Class attributes carried by the record. Usually one; the input may list several.
  std::vector<std::string> class_labels;
  std::vector<std::string> ingredients;
  std::vector<std::string> steps;
  std::optional<std::string> source_url;

  bool operator==(const Recipe&) const = default;
};

using RecipeCollection = std::vector<Recipe>;

/// Inclusive step-count interval.
struct StepRange {
  std::size_t min = 0;
  std::size_t max = 0;

  bool contains(std::size_t n) const noexcept { return n >= min && n <= max; }
  bool operator==(const StepRange&) const = default;
};

struct SampleSpec {
  std::vector<std::string> classes;
  std::size_t per_class_long = 5;
  std::size_t per_class_short = 5;
  StepRange long_range{11, 16};
  StepRange short_range{5, 10};
  std::uint64_t seed = 0;

  /// Ten class attributes, 5 long + 5 short each.
  static SampleSpec standard(std::uint64_t seed = 0);
};

/// {"classes": [...], "per_class_long": 5, "per_class_short": 5,
///  "long_range": [11, 16], "short_range": [5, 10], "seed": 0}; omitted keys keep defaults.
SampleSpec sample_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SampleSpec& spec);

/// Empty when the spec is well formed.
std::vector<std::string> check_sample_spec(const SampleSpec& spec);

enum class LengthBucket { kShort, kLong, kOutOfRange };

std::size_t step_count(const Recipe& recipe) noexcept;
LengthBucket bucket_of(const Recipe& recipe, const SampleSpec& spec) noexcept;

/// Either a Recipe or the list of every invariant the record violates.
using ValidationOutcome = std::variant<Recipe, std::vector<std::string>>;

/// Accepts one layer-1 style record: id, title, class (string or array, optional),
/// ingredients/instructions as arrays of {"text": ...}, url (optional).
ValidationOutcome validate_recipe(const nlohmann::json& record);

/// Invariant check on an already-built Recipe.
std::vector<std::string> recipe_violations(const Recipe& recipe);

struct SkippedRecord {
  std::size_t line = 0;  // 1-based
  std::string id;        // empty when the record had none
  std::vector<std::string> reasons;
};

struct LoadResult {
  RecipeCollection recipes;
  std::vector<SkippedRecord> skipped;
};

/// Reads newline-delimited records. Unreadable path or an unparseable line throws;
/// records that parse but fail validation (or repeat an id) are skipped.
LoadResult load_corpus(const std::filesystem::path& path);
LoadResult parse_corpus(std::string_view text);

nlohmann::json to_record(const Recipe& recipe);
std::string serialize_corpus(const RecipeCollection& recipes);
void write_corpus(const std::filesystem::path& path, const RecipeCollection& recipes);

/// Draws the per-(class, bucket) quotas without replacement. Output is ordered by
/// class, then long before short, then draw order. Throws ValidationError naming
/// every deficient stratum.
RecipeCollection stratified_sample(const RecipeCollection& collection, const SampleSpec& spec);

}  // namespace souschef::corpus
