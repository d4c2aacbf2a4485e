#include "souschef/llm.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace souschef::llm {

using nlohmann::json;

CompletionRequest RequestDefaults::make(prompt::PromptText p) const {
  CompletionRequest r;
  r.prompt = std::move(p);
  r.max_tokens = max_tokens;
  r.temperature = temperature;
  r.stop_sequences = stop_sequences;
  r.attempt_budget = attempt_budget;
  return r;
}

std::string IdentityMockBackend::attempt(const CompletionRequest& request) {
  return render_completion(prompt::original_steps_from_prompt(request.prompt.text));
}

ScriptedMockBackend::ScriptedMockBackend(std::map<std::string, std::string> by_fingerprint)
    : by_fingerprint_(std::move(by_fingerprint)) {}

ScriptedMockBackend ScriptedMockBackend::from_file(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw FormatError("scripted fixture " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw FormatError("scripted fixture must be a JSON object");
  std::map<std::string, std::string> m;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw FormatError("scripted fixture value for " + k + " is not a string");
    m.emplace(k, v.get<std::string>());
  }
  return ScriptedMockBackend(std::move(m));
}

std::string ScriptedMockBackend::attempt(const CompletionRequest& request) {
  const auto fp = request.prompt.fingerprint();
  const auto it = by_fingerprint_.find(fp);
  if (it == by_fingerprint_.end()) throw ConfigError("scripted-mock has no completion for " + fp);
  return it->second;
}

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  HttplibTransport(const std::string& scheme_host_port, std::chrono::seconds timeout)
      : base_(scheme_host_port), timeout_(timeout) {}

  HttpReply post_json(const std::string& path, const std::string& body,
                      const std::string& bearer_token) override {
    // httplib::Client is not safe for concurrent use; one per call.
    httplib::Client client(base_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers headers{{"Authorization", "Bearer " + bearer_token}};
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) throw TransportError("POST " + path + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
  }

 private:
  std::string base_;
  std::chrono::seconds timeout_;
};

// Splits "https://host:port/v1" into ("https://host:port", "/v1").
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("base URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(const std::string& scheme_host_port,
                                                   std::chrono::seconds timeout) {
  return std::make_unique<HttplibTransport>(scheme_host_port, timeout);
}

RemoteBackend::RemoteBackend(RemoteConfig config)
    : RemoteBackend(config, [] {
        const char* key = std::getenv("LLM_API_KEY");
        if (key == nullptr || *key == '\0') throw ConfigError("LLM_API_KEY is not set");
        return std::string(key);
      }(), nullptr) {}

RemoteBackend::RemoteBackend(RemoteConfig config, std::string api_key,
                             std::unique_ptr<HttpTransport> transport)
    : config_(std::move(config)), api_key_(std::move(api_key)), transport_(std::move(transport)) {
  if (api_key_.empty()) throw ConfigError("LLM_API_KEY is not set");
  if (config_.model.empty()) throw ConfigError("remote backend needs a model id");
  auto [host, prefix] = split_base_url(config_.base_url);
  path_prefix_ = std::move(prefix);
  if (!transport_) transport_ = make_http_transport(host, config_.timeout);
}

std::string RemoteBackend::id() const { return "remote:" + config_.model; }

std::string RemoteBackend::attempt(const CompletionRequest& request) {
  json body = {{"model", config_.model},
               {"prompt", request.prompt.text},
               {"max_tokens", request.max_tokens},
               {"temperature", request.temperature}};
  if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;

  const auto reply = transport_->post_json(path_prefix_ + "/completions", body.dump(), api_key_);
  if (reply.status == 429) throw ThrottleError("rate limited (HTTP 429)");
  if (reply.status >= 500) throw TransportError("server error HTTP " + std::to_string(reply.status));
  if (reply.status != 200) {
    throw ConfigError("completion refused with HTTP " + std::to_string(reply.status) + ": " +
                      reply.body.substr(0, 200));
  }
  try {
    const auto j = json::parse(reply.body);
    return j.at("choices").at(0).at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed completion reply: ") + e.what());
  }
}

std::string complete(const CompletionRequest& request, CompletionBackend& backend,
                     const RetryPolicy& retry) {
  if (request.attempt_budget < 1) throw ValidationError({"attempt_budget must be >= 1"});
  if (request.max_tokens < 1) throw ValidationError({"max_tokens must be >= 1"});
  if (request.temperature < 0.0) throw ValidationError({"temperature must be >= 0"});

  auto delay = retry.initial_delay;
  for (std::size_t attempt = 1;; ++attempt) {
    try {
      return backend.attempt(request);
    } catch (const ThrottleError& e) {
      if (attempt >= request.attempt_budget) {
        throw ThrottleError(std::string(e.what()) + " after " + std::to_string(attempt) + " attempts");
      }
    } catch (const TransportError& e) {
      if (attempt >= request.attempt_budget) {
        throw TransportError(std::string(e.what()) + " after " + std::to_string(attempt) + " attempts");
      }
    }
    if (retry.sleep) {
      retry.sleep(delay);
    } else {
      std::this_thread::sleep_for(delay);
    }
    delay = std::min(retry.max_delay, std::chrono::milliseconds(static_cast<long long>(
                                          static_cast<double>(delay.count()) * retry.multiplier)));
  }
}

namespace {

// "<ws><digits>.<space>rest" -> (number, rest)
std::optional<std::pair<unsigned long, std::string>> numbered_line(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  const std::size_t digits_begin = i;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == digits_begin || i - digits_begin > 9) return std::nullopt;
  if (i + 1 >= line.size() || line[i] != '.' || (line[i + 1] != ' ' && line[i + 1] != '\t')) {
    return std::nullopt;
  }
  const auto number = std::stoul(std::string(line.substr(digits_begin, i - digits_begin)));
  return std::make_pair(number, std::string(line.substr(i + 2)));
}

}  // namespace

std::vector<std::string> parse_revision(std::string_view raw) {
  if (is_blank(raw)) throw ParseError("empty completion", std::string(raw));

  struct Pending {
    unsigned long number;
    std::string text;
  };
  std::vector<Pending> steps;
  const auto lines = split_lines(raw);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (trim(line) == prompt::kSeparator) break;
    auto numbered = numbered_line(line);
    // The completion already sits after "1. ": its first line is step 1 unless
    // the model restated the number itself.
    if (i == 0 && !numbered) numbered = std::make_pair(1ul, line);
    if (numbered) {
      if (!steps.empty() && numbered->first <= steps.back().number) {
        throw ParseError("step number " + std::to_string(numbered->first) + " does not follow " +
                             std::to_string(steps.back().number),
                         std::string(raw));
      }
      steps.push_back({numbered->first, numbered->second});
    } else {
      steps.back().text += '\n';
      steps.back().text += line;
    }
  }

  std::vector<std::string> out;
  out.reserve(steps.size());
  for (auto& s : steps) {
    const auto t = trim(s.text);
    if (t.empty()) {
      throw ParseError("step " + std::to_string(s.number) + " is empty", std::string(raw));
    }
    out.emplace_back(t);
  }
  if (out.empty()) throw ParseError("no steps in completion", std::string(raw));
  return out;
}

std::string render_completion(const std::vector<std::string>& steps) {
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) {
      out += '\n';
      out += std::to_string(i + 1);
      out += ". ";
    }
    out += steps[i];
  }
  return out;
}

json to_json(const RevisionResult& r) {
  return json{{"recipe_id", r.recipe_id},
              {"revised_steps", r.revised_steps},
              {"raw_completion", r.raw_completion},
              {"backend_id", r.backend_id},
              {"prompt_fingerprint", r.prompt_fingerprint},
              {"max_tokens", r.max_tokens},
              {"temperature", r.temperature},
              {"created_at", format_timestamp(r.created_at)}};
}

RevisionResult revision_from_json(const json& j) {
  try {
    RevisionResult r;
    r.recipe_id = j.at("recipe_id").get<std::string>();
    r.revised_steps = j.at("revised_steps").get<std::vector<std::string>>();
    r.raw_completion = j.at("raw_completion").get<std::string>();
    r.backend_id = j.at("backend_id").get<std::string>();
    r.prompt_fingerprint = j.at("prompt_fingerprint").get<std::string>();
    r.max_tokens = j.value("max_tokens", std::size_t{0});
    r.temperature = j.value("temperature", 0.0);
    r.created_at = parse_timestamp(j.at("created_at").get<std::string>());
    if (r.revised_steps.empty()) throw FormatError("revised_steps empty");
    for (const auto& s : r.revised_steps) {
      if (is_blank(s)) throw FormatError("blank revised step");
    }
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("revision record: ") + e.what());
  }
}

RevisionResult revise_recipe(const corpus::Recipe& recipe, CompletionBackend& backend,
                             const RequestDefaults& defaults, const RetryPolicy& retry) {
  auto request = defaults.make(prompt::build_revision_prompt(recipe));
  std::string raw = complete(request, backend, retry);
  std::vector<std::string> steps;
  try {
    steps = parse_revision(raw);
  } catch (const ParseError&) {
    raw = complete(request, backend, retry);
    steps = parse_revision(raw);
  }
  RevisionResult r;
  r.recipe_id = recipe.id;
  r.revised_steps = std::move(steps);
  r.raw_completion = std::move(raw);
  r.backend_id = backend.id();
  r.prompt_fingerprint = request.prompt.fingerprint();
  r.max_tokens = request.max_tokens;
  r.temperature = request.temperature;
  r.created_at = now_or_source_date();
  return r;
}

BatchOutcome revise_all(const corpus::RecipeCollection& recipes, CompletionBackend& backend,
                        const RequestDefaults& defaults, std::size_t max_in_flight,
                        const RetryPolicy& retry) {
  BatchOutcome out;
  out.results.resize(recipes.size());
  out.errors.resize(recipes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < recipes.size(); i = next++) {
      try {
        out.results[i] = revise_recipe(recipes[i], backend, defaults, retry);
      } catch (const std::exception& e) {
        out.errors[i] = e.what();
      }
    }
  };
  const std::size_t n_workers = std::clamp<std::size_t>(max_in_flight, 1, std::max<std::size_t>(recipes.size(), 1));
  {
    std::vector<std::jthread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  return out;
}

std::filesystem::path persist_revision(const RevisionResult& r, const std::filesystem::path& dir) {
  auto path = dir / (r.recipe_id + ".revision.jsonl");
  write_file(path, to_json(r).dump() + "\n");
  return path;
}

std::map<std::string, RevisionResult> load_revisions(const std::filesystem::path& path) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      const auto name = entry.path().filename().string();
      if (name.size() > 15 && name.ends_with(".revision.jsonl")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::map<std::string, RevisionResult> out;
  for (const auto& f : files) {
    const auto lines = split_lines(read_file(f));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (is_blank(lines[i])) continue;
      try {
        auto r = revision_from_json(json::parse(lines[i]));
        out.insert_or_assign(r.recipe_id, std::move(r));
      } catch (const std::exception& e) {
        throw FormatError(f.string() + ":" + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  return out;
}

}  // namespace souschef::llm
