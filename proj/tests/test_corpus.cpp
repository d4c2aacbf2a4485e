#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "souschef/corpus.hpp"
#include "souschef/error.hpp"
#include "support/fixtures.hpp"

using namespace souschef::corpus;
using nlohmann::json;

namespace {

json record(const std::string& id, std::vector<std::string> steps, std::string cls = "apple pie") {
  json ingredients = json::array({{{"text", "1 apple"}}});
  json instructions = json::array();
  for (auto& s : steps) instructions.push_back({{"text", s}});
  return {{"id", id}, {"title", "Pie " + id}, {"class", cls}, {"ingredients", ingredients},
          {"instructions", instructions}};
}

std::vector<std::string> failures(const ValidationOutcome& o) {
  const auto* f = std::get_if<std::vector<std::string>>(&o);
  return f ? *f : std::vector<std::string>{};
}

}  // namespace

TEST(ValidateRecipe, EmptyStepsFails) {
  EXPECT_EQ(failures(validate_recipe(record("a", {}))), std::vector<std::string>{"steps empty"});
}

TEST(ValidateRecipe, BlankStepIsNamedByPosition) {
  EXPECT_EQ(failures(validate_recipe(record("a", {"Mix.", "Stir.", "  "}))),
            std::vector<std::string>{"step 3 blank"});
}

TEST(ValidateRecipe, ListsEveryViolation) {
  json r = record("", {});
  r["ingredients"] = json::array();
  const auto f = failures(validate_recipe(r));
  EXPECT_EQ(f.size(), 3u);
  EXPECT_NE(std::find(f.begin(), f.end(), "id missing"), f.end());
  EXPECT_NE(std::find(f.begin(), f.end(), "ingredients empty"), f.end());
}

TEST(ValidateRecipe, ValidRecordKeepsFieldsVerbatim) {
  json r = record("x1", {"  Boil the water. ", "Serve."});
  r["url"] = "http://example.com/x1";
  const auto outcome = validate_recipe(r);
  ASSERT_TRUE(std::holds_alternative<Recipe>(outcome));
  const auto& recipe = std::get<Recipe>(outcome);
  EXPECT_EQ(recipe.id, "x1");
  EXPECT_EQ(recipe.title, "Pie x1");
  EXPECT_EQ(recipe.class_labels, std::vector<std::string>{"apple pie"});
  EXPECT_EQ(recipe.ingredients, std::vector<std::string>{"1 apple"});
  EXPECT_EQ(recipe.steps, (std::vector<std::string>{"  Boil the water. ", "Serve."}));
  EXPECT_EQ(recipe.source_url, "http://example.com/x1");
  EXPECT_EQ(to_record(recipe), r);
}

TEST(LoadCorpus, SkipsInvalidRecordsWithReason) {
  std::string text;
  text += record("a", {"one"}).dump() + "\n";
  text += record("b", {"one", "two"}).dump() + "\n";
  text += record("c", {}).dump() + "\n";
  text += record("d", {"x"}).dump() + "\n";
  const auto loaded = parse_corpus(text);
  EXPECT_EQ(loaded.recipes.size(), 3u);
  ASSERT_EQ(loaded.skipped.size(), 1u);
  EXPECT_EQ(loaded.skipped[0].line, 3u);
  EXPECT_EQ(loaded.skipped[0].id, "c");
}

TEST(LoadCorpus, EmptyFileIsEmptyCollection) {
  const auto loaded = parse_corpus("");
  EXPECT_TRUE(loaded.recipes.empty());
  EXPECT_TRUE(loaded.skipped.empty());
}

TEST(LoadCorpus, DuplicateIdSkipped) {
  const auto loaded = parse_corpus(record("a", {"one"}).dump() + "\n" + record("a", {"two"}).dump() + "\n");
  EXPECT_EQ(loaded.recipes.size(), 1u);
  ASSERT_EQ(loaded.skipped.size(), 1u);
  EXPECT_EQ(loaded.skipped[0].reasons, std::vector<std::string>{"duplicate id"});
}

TEST(LoadCorpus, UnparseableLineIsFatal) {
  EXPECT_THROW(parse_corpus(record("a", {"one"}).dump() + "\n{not json\n"), souschef::FormatError);
}

TEST(LoadCorpus, UnreadablePathIsFatal) {
  EXPECT_THROW(load_corpus("/nonexistent/corpus.jsonl"), souschef::IoError);
}

TEST(LoadCorpus, MiniApplePiesFixture) {
  const auto dir = fixtures::temp_dir("corpus");
  write_corpus(dir / "pies.jsonl", {fixtures::mini_apple_pies()});
  const auto loaded = load_corpus(dir / "pies.jsonl");
  ASSERT_EQ(loaded.recipes.size(), 1u);
  EXPECT_EQ(loaded.recipes[0].steps.size(), 6u);
  EXPECT_EQ(loaded.recipes[0].steps[0], "Preheat oven to 350 degrees F.");
  EXPECT_EQ(loaded.recipes[0], fixtures::mini_apple_pies());
}

TEST(SampleSpec, StandardDefaults) {
  const auto spec = SampleSpec::standard(7);
  EXPECT_EQ(spec.classes.size(), 10u);
  EXPECT_EQ(spec.per_class_long, 5u);
  EXPECT_EQ(spec.per_class_short, 5u);
  EXPECT_EQ(spec.long_range, (StepRange{11, 16}));
  EXPECT_EQ(spec.short_range, (StepRange{5, 10}));
  EXPECT_TRUE(check_sample_spec(spec).empty());
  EXPECT_EQ(sample_spec_from_json(to_json(spec)).classes, spec.classes);
}

TEST(SampleSpec, RejectsOverlapAndDuplicates) {
  auto spec = SampleSpec::standard();
  spec.short_range = {5, 11};
  spec.classes.push_back("Apple Pie");
  EXPECT_EQ(check_sample_spec(spec).size(), 2u);
}

TEST(Bucketing, TotalAndExclusive) {
  const auto spec = SampleSpec::standard();
  for (std::size_t n = 1; n <= 25; ++n) {
    const auto b = bucket_of(fixtures::make_recipe("r", "x", n), spec);
    const int hits = int(spec.long_range.contains(n)) + int(spec.short_range.contains(n));
    EXPECT_LE(hits, 1);
    if (n >= 11 && n <= 16) EXPECT_EQ(b, LengthBucket::kLong) << n;
    else if (n >= 5 && n <= 10) EXPECT_EQ(b, LengthBucket::kShort) << n;
    else EXPECT_EQ(b, LengthBucket::kOutOfRange) << n;
  }
}

TEST(StratifiedSample, StandardSpecYieldsHundred) {
  const auto spec = SampleSpec::standard(42);
  const auto corpus = fixtures::synthetic_corpus(spec.classes, 2000, 1);
  const auto sample = stratified_sample(corpus, spec);
  ASSERT_EQ(sample.size(), 100u);
  std::set<std::string> ids;
  for (const auto& r : sample) ids.insert(r.id);
  EXPECT_EQ(ids.size(), 100u);
}

TEST(StratifiedSample, SingleStratumMembershipOverSeeds) {
  SampleSpec spec;
  spec.classes = {"soup"};
  spec.per_class_long = 0;
  spec.per_class_short = 1;
  const RecipeCollection corpus = {
      fixtures::make_recipe("s1", "soup", 5), fixtures::make_recipe("s2", "soup", 7),
      fixtures::make_recipe("s3", "soup", 10), fixtures::make_recipe("l1", "soup", 12),
      fixtures::make_recipe("o1", "soup", 3), fixtures::make_recipe("x1", "salad", 6)};
  // Oracle: filter by class and step range.
  std::set<std::string> eligible;
  for (const auto& r : corpus) {
    if (r.class_labels[0] == "soup" && r.steps.size() >= 5 && r.steps.size() <= 10) eligible.insert(r.id);
  }
  ASSERT_EQ(eligible, (std::set<std::string>{"s1", "s2", "s3"}));
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    spec.seed = seed;
    const auto sample = stratified_sample(corpus, spec);
    ASSERT_EQ(sample.size(), 1u);
    EXPECT_TRUE(eligible.contains(sample[0].id)) << "seed " << seed;
    seen.insert(sample[0].id);
  }
  EXPECT_EQ(seen, eligible);  // every eligible id drawn at least once
}

TEST(StratifiedSample, DeficientStratumNamed) {
  SampleSpec spec;
  spec.classes = {"soup", "stew"};
  spec.per_class_long = 1;
  spec.per_class_short = 1;
  const RecipeCollection corpus = {fixtures::make_recipe("a", "soup", 5), fixtures::make_recipe("b", "soup", 12),
                                   fixtures::make_recipe("c", "stew", 6)};
  try {
    stratified_sample(corpus, spec);
    FAIL() << "expected ValidationError";
  } catch (const souschef::ValidationError& e) {
    ASSERT_EQ(e.violations().size(), 1u);
    EXPECT_NE(e.violations()[0].find("(stew, long)"), std::string::npos);
  }
}

TEST(StratifiedSample, IndependentOfInputOrder) {
  const auto spec = SampleSpec::standard(3);
  auto corpus = fixtures::synthetic_corpus(spec.classes, 1500, 9);
  const auto a = stratified_sample(corpus, spec);
  std::reverse(corpus.begin(), corpus.end());
  const auto b = stratified_sample(corpus, spec);
  EXPECT_EQ(a, b);
  EXPECT_EQ(serialize_corpus(a), serialize_corpus(b));
}

TEST(StratifiedSample, MultiClassRecipeGoesToFirstListedClass) {
  SampleSpec spec;
  spec.classes = {"soup", "stew"};
  spec.per_class_long = 0;
  spec.per_class_short = 1;
  auto both = fixtures::make_recipe("both", "", 6);
  both.class_labels = {"STEW", "Soup"};
  const RecipeCollection corpus = {both, fixtures::make_recipe("stew-only", "stew", 6)};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    spec.seed = seed;
    const auto sample = stratified_sample(corpus, spec);
    ASSERT_EQ(sample.size(), 2u);
    EXPECT_EQ(sample[0].id, "both");
    EXPECT_EQ(sample[1].id, "stew-only");
  }
}

TEST(StratifiedSample, SubsetWithExactStratumCountsProperty) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SampleSpec spec = SampleSpec::standard(seed);
    spec.per_class_long = seed % 4;
    spec.per_class_short = 3 - seed % 4 + 1;
    const auto corpus = fixtures::synthetic_corpus(spec.classes, 1200, seed + 100);
    const auto sample = stratified_sample(corpus, spec);
    std::set<std::string> corpus_ids;
    for (const auto& r : corpus) corpus_ids.insert(r.id);
    std::map<std::pair<std::string, LengthBucket>, std::size_t> counts;
    std::set<std::string> ids;
    for (const auto& r : sample) {
      EXPECT_TRUE(corpus_ids.contains(r.id));
      EXPECT_TRUE(ids.insert(r.id).second);
      ++counts[{r.class_labels[0], bucket_of(r, spec)}];
    }
    for (const auto& c : spec.classes) {
      EXPECT_EQ((counts[{c, LengthBucket::kLong}]), spec.per_class_long);
      EXPECT_EQ((counts[{c, LengthBucket::kShort}]), spec.per_class_short);
    }
  }
}
