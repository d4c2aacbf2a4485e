#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <random>

#include "souschef/error.hpp"
#include "souschef/llm.hpp"
#include "support/fixtures.hpp"

using namespace souschef::llm;
using souschef::corpus::Recipe;
using nlohmann::json;

namespace {

RetryPolicy no_sleep(std::vector<std::chrono::milliseconds>* delays = nullptr) {
  RetryPolicy p;
  p.sleep = [delays](std::chrono::milliseconds d) {
    if (delays) delays->push_back(d);
  };
  return p;
}

/// Fails the first `failures` calls with the given status, then answers.
class FakeTransport : public HttpTransport {
 public:
  FakeTransport(int failures, int status, std::string text) : failures_(failures), status_(status), text_(std::move(text)) {}

  HttpReply post_json(const std::string& path, const std::string& body, const std::string& token) override {
    std::lock_guard lock(mu_);
    ++calls;
    last_path = path;
    last_body = json::parse(body);
    last_token = token;
    if (calls <= failures_) {
      if (status_ == 0) throw TransportError("connection refused");
      return {status_, "busy"};
    }
    return {200, json{{"choices", {{{"text", text_}}}}}.dump()};
  }

  int calls = 0;
  std::string last_path;
  json last_body;
  std::string last_token;

 private:
  std::mutex mu_;
  int failures_;
  int status_;
  std::string text_;
};

/// Answers with a fixed script of completions, one per call.
class SequenceBackend : public CompletionBackend {
 public:
  explicit SequenceBackend(std::vector<std::string> script) : script_(std::move(script)) {}
  std::string id() const override { return "sequence"; }
  std::string attempt(const CompletionRequest&) override { return script_.at(calls++); }
  std::size_t calls = 0;

 private:
  std::vector<std::string> script_;
};

Recipe random_recipe(std::mt19937_64& gen, std::size_t i) {
  static const std::vector<std::string> words = {"Stir", "the", "onions", "until", "golden", "(about", "5",
                                                 "minutes).", "Add", "1/2", "cup", "stock;", "season", "to",
                                                 "taste,", "then", "serve", "hot!", "350", "degrees", "F."};
  Recipe r = fixtures::make_recipe("rand-" + std::to_string(i), "x", 1 + gen() % 20);
  for (auto& s : r.steps) {
    s.clear();
    const std::size_t n = 1 + gen() % 15;
    for (std::size_t w = 0; w < n; ++w) {
      if (w) s += ' ';
      s += words[gen() % words.size()];
    }
  }
  return r;
}

}  // namespace

TEST(ParseRevision, ContinuesAfterOpenStepOne) {
  EXPECT_EQ(parse_revision("Mix.\n2. Bake.\n3. Cool."), (std::vector<std::string>{"Mix.", "Bake.", "Cool."}));
}

TEST(ParseRevision, RestatedFirstNumberAccepted) {
  EXPECT_EQ(parse_revision("1. Mix.\n2. Bake."), (std::vector<std::string>{"Mix.", "Bake."}));
}

TEST(ParseRevision, NumberGapKeepsOrder) {
  EXPECT_EQ(parse_revision("1. Mix.\n3. Bake."), (std::vector<std::string>{"Mix.", "Bake."}));
}

TEST(ParseRevision, ContinuationLineJoinsStep) {
  EXPECT_EQ(parse_revision("Mix\nwell.\n2. Bake."), (std::vector<std::string>{"Mix\nwell.", "Bake."}));
}

TEST(ParseRevision, StopsAtSeparator) {
  EXPECT_EQ(parse_revision("Mix.\n2. Bake.\n---\nTitle\n1. Other"), (std::vector<std::string>{"Mix.", "Bake."}));
}

TEST(ParseRevision, DecreasingOrDuplicateNumbersFail) {
  EXPECT_THROW(parse_revision("Mix.\n3. Bake.\n2. Cool."), ParseError);
  EXPECT_THROW(parse_revision("Mix.\n2. Bake.\n2. Cool."), ParseError);
}

TEST(ParseRevision, EmptyStepFailsWithRawText) {
  try {
    parse_revision("Mix.\n2.  \n3. Cool.");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.raw(), "Mix.\n2.  \n3. Cool.");
  }
  EXPECT_THROW(parse_revision("   "), ParseError);
}

TEST(ParseRevision, NonExecutableStepRetained) {
  EXPECT_EQ(parse_revision("Serve.\n2. Enjoy!"), (std::vector<std::string>{"Serve.", "Enjoy!"}));
}

TEST(ParseRevision, MiniApplePiesCompletionHasTenSteps) {
  const auto steps = parse_revision(fixtures::mini_apple_pies_revision_completion());
  ASSERT_EQ(steps.size(), 10u);
  EXPECT_EQ(steps[0], "Preheat oven to 350 degrees F.");
  EXPECT_EQ(steps[9], "Bake pies on baking sheets for 20 minutes or until golden.");
}

TEST(IdentityBackend, RoundTripsOriginalSteps) {
  IdentityMockBackend backend;
  std::mt19937_64 gen(11);
  for (std::size_t i = 0; i < 100; ++i) {
    const auto r = random_recipe(gen, i);
    const auto result = revise_recipe(r, backend, {}, no_sleep());
    EXPECT_EQ(result.revised_steps, r.steps) << r.id;
    EXPECT_EQ(result.backend_id, "identity-mock");
  }
}

TEST(IdentityBackend, FirstStepContinuesOpenAnchor) {
  IdentityMockBackend backend;
  const auto raw = complete(RequestDefaults{}.make(souschef::prompt::build_revision_prompt(fixtures::mini_apple_pies())),
                            backend, no_sleep());
  EXPECT_TRUE(raw.starts_with("Preheat oven to 350 degrees F.\n2. "));
}

TEST(ScriptedBackend, MiniApplePiesRevisionTenSteps) {
  const auto recipe = fixtures::mini_apple_pies();
  const auto fp = souschef::prompt::build_revision_prompt(recipe).fingerprint();
  ScriptedMockBackend backend(std::map<std::string, std::string>{{fp, fixtures::mini_apple_pies_revision_completion()}});
  const auto result = revise_recipe(recipe, backend, {}, no_sleep());
  ASSERT_EQ(result.revised_steps.size(), 10u);
  EXPECT_EQ(result.revised_steps[9], "Bake pies on baking sheets for 20 minutes or until golden.");
  EXPECT_EQ(result.prompt_fingerprint, fp);
  EXPECT_EQ(result.raw_completion, fixtures::mini_apple_pies_revision_completion());
  EXPECT_EQ(result.max_tokens, 1024u);
  EXPECT_DOUBLE_EQ(result.temperature, 0.7);
}

TEST(ScriptedBackend, UnknownFingerprintIsConfigError) {
  ScriptedMockBackend backend(std::map<std::string, std::string>{});
  EXPECT_THROW(revise_recipe(fixtures::mini_apple_pies(), backend, {}, no_sleep()), souschef::ConfigError);
}

TEST(ScriptedBackend, LoadsFixtureFile) {
  const auto dir = fixtures::temp_dir("scripted");
  souschef::write_file(dir / "f.json", json{{souschef::sha256_hex("hello"), "Mix."}}.dump());
  auto backend = ScriptedMockBackend::from_file(dir / "f.json");
  CompletionRequest req;
  req.prompt.text = "hello";
  EXPECT_EQ(backend.attempt(req), "Mix.");
  req.prompt.text = "other";
  EXPECT_THROW(backend.attempt(req), souschef::ConfigError);
}

TEST(Complete, TransientFailuresWithinBudgetSucceed) {
  auto transport = std::make_unique<FakeTransport>(2, 0, "Mix.\n2. Bake.");
  auto* t = transport.get();
  RemoteBackend backend({"http://127.0.0.1:9/v1", "test-model"}, "secret", std::move(transport));
  std::vector<std::chrono::milliseconds> delays;
  const auto result = revise_recipe(fixtures::mini_apple_pies(), backend, {}, no_sleep(&delays));
  EXPECT_EQ(result.revised_steps, (std::vector<std::string>{"Mix.", "Bake."}));
  EXPECT_EQ(t->calls, 3);
  EXPECT_EQ(delays, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500),
                                                             std::chrono::milliseconds(1000)}));
  EXPECT_EQ(t->last_path, "/v1/completions");
  EXPECT_EQ(t->last_token, "secret");
  EXPECT_EQ(t->last_body["model"], "test-model");
  EXPECT_EQ(t->last_body["max_tokens"], 1024);
  EXPECT_EQ(t->last_body["stop"], json::array({"---"}));
  EXPECT_TRUE(t->last_body["prompt"].get<std::string>().ends_with("Revised Recipe\n1. "));
}

TEST(Complete, ExhaustedBudgetSurfacesTransportError) {
  RemoteBackend backend({"http://127.0.0.1:9/v1", "m"}, "k", std::make_unique<FakeTransport>(5, 503, "x"));
  CompletionRequest req;
  req.attempt_budget = 3;
  EXPECT_THROW(complete(req, backend, no_sleep()), TransportError);
}

TEST(Complete, ThrottleIsRetriedThenSurfaced) {
  auto transport = std::make_unique<FakeTransport>(9, 429, "x");
  auto* t = transport.get();
  RemoteBackend backend({"http://127.0.0.1:9", "m"}, "k", std::move(transport));
  CompletionRequest req;
  req.attempt_budget = 2;
  EXPECT_THROW(complete(req, backend, no_sleep()), ThrottleError);
  EXPECT_EQ(t->calls, 2);
}

TEST(Complete, ClientErrorNotRetried) {
  auto transport = std::make_unique<FakeTransport>(9, 401, "x");
  auto* t = transport.get();
  RemoteBackend backend({"http://127.0.0.1:9", "m"}, "k", std::move(transport));
  EXPECT_THROW(complete(CompletionRequest{}, backend, no_sleep()), souschef::ConfigError);
  EXPECT_EQ(t->calls, 1);
}

TEST(Complete, BackoffCapped) {
  RemoteBackend backend({"http://127.0.0.1:9", "m"}, "k", std::make_unique<FakeTransport>(20, 500, "x"));
  CompletionRequest req;
  req.attempt_budget = 10;
  RetryPolicy p = no_sleep();
  std::vector<std::chrono::milliseconds> delays;
  p.sleep = [&](std::chrono::milliseconds d) { delays.push_back(d); };
  p.max_delay = std::chrono::milliseconds(3000);
  EXPECT_THROW(complete(req, backend, p), TransportError);
  ASSERT_EQ(delays.size(), 9u);
  EXPECT_EQ(delays[2], std::chrono::milliseconds(2000));
  EXPECT_EQ(delays.back(), std::chrono::milliseconds(3000));
}

TEST(RemoteBackend, MissingKeyFailsBeforeAnyRequest) {
  ::unsetenv("LLM_API_KEY");
  EXPECT_THROW(RemoteBackend({"http://127.0.0.1:9", "m"}), souschef::ConfigError);
}

TEST(ReviseRecipe, OneReparseThenSuccess) {
  SequenceBackend backend({"\n\n", "Mix.\n2. Bake."});
  const auto result = revise_recipe(fixtures::mini_apple_pies(), backend, {}, no_sleep());
  EXPECT_EQ(backend.calls, 2u);
  EXPECT_EQ(result.revised_steps.size(), 2u);
}

TEST(ReviseRecipe, SecondParseFailureSurfaces) {
  SequenceBackend backend({"Mix.\n1. again", "Mix.\n2. x\n2. y", "Mix."});
  EXPECT_THROW(revise_recipe(fixtures::mini_apple_pies(), backend, {}, no_sleep()), ParseError);
  EXPECT_EQ(backend.calls, 2u);
}

TEST(ReviseAll, KeepsInputOrderAndReportsFailures) {
  souschef::corpus::RecipeCollection recipes;
  for (int i = 0; i < 12; ++i) recipes.push_back(fixtures::make_recipe("r" + std::to_string(i), "x", 3));
  std::map<std::string, std::string> script;
  for (std::size_t i = 0; i < recipes.size(); ++i) {
    if (i == 5) continue;
    script[souschef::prompt::build_revision_prompt(recipes[i]).fingerprint()] = "Step " + std::to_string(i);
  }
  ScriptedMockBackend backend(script);
  const auto out = revise_all(recipes, backend, {}, 4, no_sleep());
  ASSERT_EQ(out.results.size(), 12u);
  for (std::size_t i = 0; i < recipes.size(); ++i) {
    if (i == 5) {
      EXPECT_FALSE(out.results[i]);
      EXPECT_FALSE(out.errors[i].empty());
    } else {
      ASSERT_TRUE(out.results[i]);
      EXPECT_EQ(out.results[i]->recipe_id, recipes[i].id);
      EXPECT_EQ(out.results[i]->revised_steps, std::vector<std::string>{"Step " + std::to_string(i)});
    }
  }
}

TEST(RevisionRecord, PersistAndReload) {
  const auto dir = fixtures::temp_dir("revisions");
  const auto r = fixtures::revision_of(fixtures::mini_apple_pies(), {"Mix.", "Bake."});
  const auto path = persist_revision(r, dir);
  EXPECT_EQ(path.filename(), "mini-apple-pies-503243.revision.jsonl");
  auto again = r;
  again.revised_steps = {"Only."};
  persist_revision(again, dir);
  const auto loaded = load_revisions(dir);
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded.at(r.recipe_id), again);
  EXPECT_EQ(revision_from_json(to_json(r)), r);
}

TEST(RenderCompletion, InverseOfParse) {
  const std::vector<std::string> steps = {"Mix.", "Bake at 350.", "Serve."};
  EXPECT_EQ(render_completion(steps), "Mix.\n2. Bake at 350.\n3. Serve.");
  EXPECT_EQ(parse_revision(render_completion(steps)), steps);
}
