#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "souschef/corpus.hpp"
#include "souschef/error.hpp"
#include "souschef/prompt.hpp"
#include "souschef/util.hpp"

namespace souschef::llm {

/// Retryable failure: connection problems, 5xx replies.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// The backend refused for rate reasons (HTTP 429) and retries ran out.
class ThrottleError : public Error {
 public:
  using Error::Error;
};

/// A completion that cannot be split into steps. Keeps the raw text for logging.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string raw) : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

struct CompletionRequest {
  prompt::PromptText prompt;
  std::size_t max_tokens = 1024;
  double temperature = 0.7;
  std::vector<std::string> stop_sequences{"---"};
  std::size_t attempt_budget = 3;
};

/// Parameters shared by every request of a run.
struct RequestDefaults {
  std::size_t max_tokens = 1024;
  double temperature = 0.7;
  std::vector<std::string> stop_sequences{"---"};
  std::size_t attempt_budget = 3;

  CompletionRequest make(prompt::PromptText p) const;
};

/// One completion attempt. Implementations throw TransportError for retryable
/// failures, ThrottleError for rate refusals, ConfigError for anything a retry
/// cannot fix. Must be callable from several threads at once.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string id() const = 0;
  virtual std::string attempt(const CompletionRequest& request) = 0;
};

/// Echoes the prompt's Original Recipe steps as "<step1>\n2. <step2>\n...".
class IdentityMockBackend final : public CompletionBackend {
 public:
  std::string id() const override { return "identity-mock"; }
  std::string attempt(const CompletionRequest& request) override;
};

/// Returns fixed texts keyed by prompt fingerprint; unknown fingerprints are errors.
class ScriptedMockBackend final : public CompletionBackend {
 public:
  explicit ScriptedMockBackend(std::map<std::string, std::string> by_fingerprint);
  /// Fixture file: a JSON object mapping fingerprint -> completion text.
  static ScriptedMockBackend from_file(const std::filesystem::path& path);

  std::string id() const override { return "scripted-mock"; }
  std::string attempt(const CompletionRequest& request) override;

 private:
  std::map<std::string, std::string> by_fingerprint_;
};

struct HttpReply {
  int status = 0;
  std::string body;
};

/// Minimal POST abstraction under the remote backend; tests swap in fakes.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// Throws TransportError when no reply was received.
  virtual HttpReply post_json(const std::string& path, const std::string& body,
                              const std::string& bearer_token) = 0;
};

/// cpp-httplib transport for "http://host:port" / "https://host:port" bases.
std::unique_ptr<HttpTransport> make_http_transport(const std::string& scheme_host_port,
                                                   std::chrono::seconds timeout);

struct RemoteConfig {
  /// e.g. "https://api.openai.com/v1"; requests go to <base_url>/completions.
  std::string base_url;
  std::string model;
  std::chrono::seconds timeout{60};
};

/// Text-completion endpoint speaking the {"model","prompt","max_tokens",
/// "temperature","stop"} -> {"choices":[{"text":...}]} shape.
class RemoteBackend final : public CompletionBackend {
 public:
  /// Reads the credential from LLM_API_KEY; throws ConfigError if absent.
  explicit RemoteBackend(RemoteConfig config);
  RemoteBackend(RemoteConfig config, std::string api_key, std::unique_ptr<HttpTransport> transport);

  std::string id() const override;
  std::string attempt(const CompletionRequest& request) override;

 private:
  RemoteConfig config_;
  std::string api_key_;
  std::string path_prefix_;
  std::unique_ptr<HttpTransport> transport_;
};

struct RetryPolicy {
  std::chrono::milliseconds initial_delay{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_delay{30000};
  /// Injected for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Runs backend.attempt up to request.attempt_budget times with exponential backoff.
std::string complete(const CompletionRequest& request, CompletionBackend& backend,
                     const RetryPolicy& retry = {});

/// Splits a completion that continues after "Revised Recipe\n1. ". Text up to the
/// first numbered line is step 1; later steps start at lines matching
/// `\s*\d+\.\s`. Numbers must strictly increase (gaps allowed). Continuation lines
/// stay with their step; a line consisting of "---" ends the list.
std::vector<std::string> parse_revision(std::string_view raw);

/// Inverse of parse_revision for steps without embedded line breaks.
std::string render_completion(const std::vector<std::string>& steps);

struct RevisionResult {
  std::string recipe_id;
  std::vector<std::string> revised_steps;
  std::string raw_completion;
  std::string backend_id;
  std::string prompt_fingerprint;
  std::size_t max_tokens = 0;
  double temperature = 0.0;
  Timestamp created_at{};

  bool operator==(const RevisionResult&) const = default;
};

nlohmann::json to_json(const RevisionResult& r);
RevisionResult revision_from_json(const nlohmann::json& j);

/// prompt -> complete -> parse, with one fresh completion if the first cannot be parsed.
RevisionResult revise_recipe(const corpus::Recipe& recipe, CompletionBackend& backend,
                             const RequestDefaults& defaults, const RetryPolicy& retry = {});

struct BatchOutcome {
  std::vector<std::optional<RevisionResult>> results;  // input order
  std::vector<std::string> errors;                     // parallel to results; empty on success
};

/// Revises every recipe with at most `max_in_flight` concurrent completions.
BatchOutcome revise_all(const corpus::RecipeCollection& recipes, CompletionBackend& backend,
                        const RequestDefaults& defaults, std::size_t max_in_flight,
                        const RetryPolicy& retry = {});

/// Writes the record as the single line of <dir>/<recipe_id>.revision.jsonl.
std::filesystem::path persist_revision(const RevisionResult& r, const std::filesystem::path& dir);

/// Reads every *.revision.jsonl in dir (or a single .jsonl file); the last record
/// per recipe wins.
std::map<std::string, RevisionResult> load_revisions(const std::filesystem::path& path);

}  // namespace souschef::llm
