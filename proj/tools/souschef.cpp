// souschef: sample -> revise -> make-tasks -> serve -> analyze.

#include <CLI11.hpp>
#include <httplib.h>

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include "souschef/analytics.hpp"
#include "souschef/corpus.hpp"
#include "souschef/error.hpp"
#include "souschef/http_api.hpp"
#include "souschef/llm.hpp"
#include "souschef/manifest.hpp"
#include "souschef/service.hpp"
#include "souschef/tasks.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 0;

struct Globals {
  std::uint64_t seed = kDefaultSeed;
  std::string out;
  std::string manifest;
  bool verbose = false;
};

fs::path manifest_path(const Globals& g, const fs::path& output) {
  if (!g.manifest.empty()) return g.manifest;
  const auto dir = output.has_parent_path() ? output.parent_path() : fs::path(".");
  return dir / "manifest.json";
}

void note(const Globals& g, const std::string& msg) {
  if (g.verbose) std::cerr << msg << "\n";
}

// ---- sample ---------------------------------------------------------------

struct SampleArgs {
  std::string corpus;
  std::string spec;
};

int run_sample(const Globals& g, const SampleArgs& a, bool seed_given) {
  const auto started = souschef::now_or_source_date();
  auto spec = souschef::corpus::SampleSpec::standard(g.seed);
  if (!a.spec.empty()) {
    spec = souschef::corpus::sample_spec_from_json(json::parse(souschef::read_file(a.spec)));
    if (seed_given) spec.seed = g.seed;
  }
  const auto loaded = souschef::corpus::load_corpus(a.corpus);
  for (const auto& s : loaded.skipped) {
    std::cerr << "warning: " << a.corpus << ":" << s.line << " skipped";
    if (!s.id.empty()) std::cerr << " (" << s.id << ")";
    for (const auto& r : s.reasons) std::cerr << "; " << r;
    std::cerr << "\n";
  }
  note(g, "loaded " + std::to_string(loaded.recipes.size()) + " recipes, skipped " +
              std::to_string(loaded.skipped.size()));
  const auto sample = souschef::corpus::stratified_sample(loaded.recipes, spec);
  const fs::path out = g.out.empty() ? fs::path("sample.jsonl") : fs::path(g.out);
  souschef::corpus::write_corpus(out, sample);
  std::cout << "sampled " << sample.size() << " recipes -> " << out.string() << "\n";

  souschef::record_stage(manifest_path(g, out),
                         {"sample", spec.seed, "",
                          json{{"corpus", a.corpus}, {"spec", souschef::corpus::to_json(spec)}},
                          {out.string()}, started, souschef::now_or_source_date()});
  return 0;
}

// ---- revise ---------------------------------------------------------------

struct ReviseArgs {
  std::string input;
  std::string backend = "identity";
  std::string fixture;
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "text-davinci-003";
  std::size_t max_tokens = 1024;
  double temperature = 0.7;
  std::size_t attempts = 3;
  std::size_t parallel = 4;
};

std::unique_ptr<souschef::llm::CompletionBackend> make_backend(const ReviseArgs& a) {
  using namespace souschef::llm;
  if (a.backend == "identity") return std::make_unique<IdentityMockBackend>();
  if (a.backend == "scripted") {
    if (a.fixture.empty()) throw souschef::ConfigError("scripted backend needs --fixture");
    return std::make_unique<ScriptedMockBackend>(ScriptedMockBackend::from_file(a.fixture));
  }
  if (a.backend == "remote") return std::make_unique<RemoteBackend>(RemoteConfig{a.base_url, a.model});
  throw souschef::ConfigError("unknown backend '" + a.backend + "'");
}

int run_revise(const Globals& g, const ReviseArgs& a) {
  const auto started = souschef::now_or_source_date();
  // Backend first: a missing credential must fail before any work.
  auto backend = make_backend(a);
  const auto loaded = souschef::corpus::load_corpus(a.input);
  if (!loaded.skipped.empty()) {
    throw souschef::ValidationError({std::to_string(loaded.skipped.size()) + " invalid record(s) in " + a.input});
  }
  souschef::llm::RequestDefaults defaults;
  defaults.max_tokens = a.max_tokens;
  defaults.temperature = a.temperature;
  defaults.attempt_budget = a.attempts;

  const fs::path out_dir = g.out.empty() ? fs::path("results") : fs::path(g.out);
  const auto outcome = souschef::llm::revise_all(loaded.recipes, *backend, defaults, a.parallel);
  std::vector<std::string> written;
  std::size_t failures = 0;
  for (std::size_t i = 0; i < loaded.recipes.size(); ++i) {
    if (outcome.results[i]) {
      written.push_back(souschef::llm::persist_revision(*outcome.results[i], out_dir).string());
    } else {
      ++failures;
      std::cerr << "error: " << loaded.recipes[i].id << ": " << outcome.errors[i] << "\n";
    }
  }
  std::cout << "revised " << written.size() << " of " << loaded.recipes.size() << " recipes -> "
            << out_dir.string() << "\n";
  souschef::record_stage(manifest_path(g, out_dir / "x"),
                         {"revise", g.seed, backend->id(),
                          json{{"input", a.input},
                               {"backend", a.backend},
                               {"fixture", a.fixture},
                               {"model", a.model},
                               {"max_tokens", a.max_tokens},
                               {"temperature", a.temperature},
                               {"attempts", a.attempts}},
                          written, started, souschef::now_or_source_date()});
  return failures == 0 ? 0 : 1;
}

// ---- make-tasks -----------------------------------------------------------

struct MakeTasksArgs {
  std::string sampled;
  std::string revisions;
  std::size_t target = souschef::tasks::kDefaultTargetAnnotations;
};

int run_make_tasks(const Globals& g, const MakeTasksArgs& a) {
  const auto started = souschef::now_or_source_date();
  const auto loaded = souschef::corpus::load_corpus(a.sampled);
  const auto revisions = souschef::llm::load_revisions(a.revisions);
  std::map<std::string, const souschef::corpus::Recipe*> by_id;
  for (const auto& r : loaded.recipes) by_id.emplace(r.id, &r);

  std::vector<std::string> orphans;
  for (const auto& [id, rev] : revisions) {
    if (!by_id.contains(id)) orphans.push_back("revision '" + id + "' has no recipe in " + a.sampled);
  }
  if (!orphans.empty()) throw souschef::ValidationError(std::move(orphans));

  std::vector<souschef::tasks::AnnotationTask> out_tasks;
  for (const auto& recipe : loaded.recipes) {
    const auto it = revisions.find(recipe.id);
    if (it == revisions.end()) {
      note(g, "no revision for " + recipe.id + "; skipped");
      continue;
    }
    out_tasks.push_back(souschef::tasks::make_task(recipe, it->second, g.seed, a.target));
  }
  const fs::path out = g.out.empty() ? fs::path("tasks.jsonl") : fs::path(g.out);
  souschef::tasks::export_tasks(out_tasks, out);
  std::cout << "wrote " << out_tasks.size() << " tasks -> " << out.string() << "\n";
  souschef::record_stage(manifest_path(g, out),
                         {"make-tasks", g.seed, "",
                          json{{"sampled", a.sampled}, {"revisions", a.revisions}, {"target", a.target}},
                          {out.string()}, started, souschef::now_or_source_date()});
  return 0;
}

// ---- serve ----------------------------------------------------------------

struct ServeArgs {
  std::string tasks;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string log = "annotations.log";
  int deadline_minutes = 60;
  std::size_t target = 0;  // 0 = use each task's own target
  std::string static_dir;
};

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

int run_serve(const Globals& g, const ServeArgs& a) {
  const auto imported = souschef::tasks::import_tasks(a.tasks);
  for (const auto& e : imported.errors) {
    std::cerr << "error: " << a.tasks << ":" << e.line << ": " << e.message << "\n";
  }
  if (!imported.errors.empty()) return 1;

  souschef::service::ServiceConfig config;
  config.deadline = std::chrono::minutes(a.deadline_minutes);
  if (a.target > 0) config.target_annotations = a.target;
  config.log_path = a.log;
  souschef::service::AnnotationService service(imported.items, config);

  httplib::Server server;
  souschef::service::install_routes(server, service, a.static_dir);

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::jthread watcher([&server](std::stop_token st) {
    while (!g_stop && !st.stop_requested()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
  });

  if (!server.bind_to_port(a.host, a.port)) {
    std::cerr << "error: cannot bind " << a.host << ":" << a.port << "\n";
    watcher.request_stop();
    return 1;
  }
  std::cout << "serving " << service.task_count() << " tasks on http://" << a.host << ":" << a.port
            << " (log " << a.log << ")" << std::endl;
  note(g, "deadline " + std::to_string(a.deadline_minutes) + " min");
  server.listen_after_bind();
  watcher.request_stop();
  return 0;
}

// ---- analyze --------------------------------------------------------------

struct AnalyzeArgs {
  std::string tasks;
  std::string responses;
  bool raw = false;
};

int run_analyze(const Globals& g, const AnalyzeArgs& a) {
  const auto started = souschef::now_or_source_date();
  const auto tasks = souschef::tasks::import_tasks(a.tasks);
  for (const auto& e : tasks.errors) std::cerr << "warning: " << a.tasks << ":" << e.line << ": " << e.message << "\n";
  const auto responses = souschef::tasks::import_responses(a.responses, tasks.items);
  for (const auto& e : responses.errors) {
    std::cerr << "warning: " << a.responses << ":" << e.line << ": " << e.message << "\n";
  }
  if (responses.items.empty()) throw souschef::DomainError("no valid responses in " + a.responses);

  const auto report = souschef::analytics::build_report(tasks.items, responses.items);
  const auto text = souschef::analytics::render_text(report);
  std::cout << text;

  const fs::path out_dir = g.out.empty() ? fs::path("report") : fs::path(g.out);
  std::vector<std::string> written{(out_dir / "report.txt").string(), (out_dir / "report.json").string()};
  souschef::write_file(written[0], text);
  souschef::write_file(written[1], souschef::analytics::to_json(report).dump(2) + "\n");
  if (a.raw) {
    const auto judgments = souschef::analytics::normalize(tasks.items, responses.items);
    const auto audit = souschef::analytics::audit_matrices(judgments);
    json j{{"per_task", audit.per_task},
           {"included_counts", audit.included_counts},
           {"valid_counts", audit.valid_counts},
           {"raters", audit.raters}};
    written.push_back((out_dir / "audit.json").string());
    souschef::write_file(written.back(), j.dump(2) + "\n");
  }
  note(g, "report written to " + out_dir.string());
  souschef::record_stage(manifest_path(g, out_dir / "x"),
                         {"analyze", g.seed, "",
                          json{{"tasks", a.tasks}, {"responses", a.responses}, {"raw", a.raw}},
                          written, started, souschef::now_or_source_date()});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recipe revision and pairwise human-evaluation pipeline"};
  app.require_subcommand(1);
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for sampling and A/B flips")
                       ->default_val(kDefaultSeed);
  app.add_option("--out", g.out, "Output file or directory for the command");
  app.add_option("--manifest", g.manifest, "Run manifest path (default: manifest.json beside --out)");
  app.add_flag("-v,--verbose", g.verbose, "Progress notes on stderr");
  app.fallthrough();

  SampleArgs sample;
  auto* cmd_sample = app.add_subcommand("sample", "Stratified sample of a recipe corpus");
  cmd_sample->add_option("corpus", sample.corpus, "Newline-delimited recipe records")->required();
  cmd_sample->add_option("--spec", sample.spec, "Sample spec JSON (default: 10 classes x 5 long + 5 short)");

  ReviseArgs revise;
  auto* cmd_revise = app.add_subcommand("revise", "Revise sampled recipes with a completion backend");
  cmd_revise->add_option("input", revise.input, "Sampled recipes")->required();
  cmd_revise->add_option("--backend", revise.backend, "identity | scripted | remote")
      ->check(CLI::IsMember({"identity", "scripted", "remote"}))
      ->capture_default_str();
  cmd_revise->add_option("--fixture", revise.fixture, "Scripted backend fixture (fingerprint -> text)");
  cmd_revise->add_option("--base-url", revise.base_url, "Remote completion API base URL")->capture_default_str();
  cmd_revise->add_option("--model", revise.model, "Remote model id")->capture_default_str();
  cmd_revise->add_option("--max-tokens", revise.max_tokens)->capture_default_str()->check(CLI::PositiveNumber);
  cmd_revise->add_option("--temperature", revise.temperature)->capture_default_str()->check(CLI::NonNegativeNumber);
  cmd_revise->add_option("--attempts", revise.attempts, "Attempt budget per completion")
      ->capture_default_str()->check(CLI::PositiveNumber);
  cmd_revise->add_option("--parallel", revise.parallel, "Max in-flight completions")
      ->capture_default_str()->check(CLI::PositiveNumber);

  MakeTasksArgs make;
  auto* cmd_make = app.add_subcommand("make-tasks", "Pair originals with revisions into A/B tasks");
  cmd_make->add_option("sampled", make.sampled, "Sampled recipes")->required();
  cmd_make->add_option("revisions", make.revisions, "Revision results directory or file")->required();
  cmd_make->add_option("--target", make.target, "Annotations per task")->capture_default_str()->check(CLI::PositiveNumber);

  ServeArgs serve;
  auto* cmd_serve = app.add_subcommand("serve", "Serve annotation tasks over HTTP");
  cmd_serve->add_option("tasks", serve.tasks, "Tasks file")->required();
  cmd_serve->add_option("--host", serve.host)->capture_default_str()->envname("SOUSCHEF_HOST");
  cmd_serve->add_option("--port", serve.port)->capture_default_str()->envname("SOUSCHEF_PORT");
  cmd_serve->add_option("--log", serve.log, "Append-only event log")->capture_default_str()->envname("SOUSCHEF_LOG");
  cmd_serve->add_option("--deadline-minutes", serve.deadline_minutes)
      ->capture_default_str()->envname("SOUSCHEF_DEADLINE_MINUTES")->check(CLI::PositiveNumber);
  cmd_serve->add_option("--target", serve.target, "Override annotations per task")
      ->envname("SOUSCHEF_TARGET_ANNOTATIONS");
  cmd_serve->add_option("--static-dir", serve.static_dir, "Annotator UI assets to mount at /");

  AnalyzeArgs analyze;
  auto* cmd_analyze = app.add_subcommand("analyze", "Compute the evaluation report");
  cmd_analyze->add_option("tasks", analyze.tasks, "Tasks file")->required();
  cmd_analyze->add_option("responses", analyze.responses, "Responses file")->required();
  cmd_analyze->add_flag("--raw", analyze.raw, "Also write per-task vote matrices (audit.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_sample) return run_sample(g, sample, seed_opt->count() > 0);
    if (*cmd_revise) return run_revise(g, revise);
    if (*cmd_make) return run_make_tasks(g, make);
    if (*cmd_serve) return run_serve(g, serve);
    if (*cmd_analyze) return run_analyze(g, analyze);
  } catch (const souschef::ValidationError& e) {
    std::cerr << "error:";
    for (const auto& v : e.violations()) std::cerr << "\n  " << v;
    std::cerr << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
