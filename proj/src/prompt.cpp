#include "souschef/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <random>

#include "revision_template.hpp"
#include "souschef/error.hpp"
#include "souschef/random.hpp"
#include "souschef/util.hpp"

namespace souschef::prompt {

std::string_view to_string(PromptKind kind) noexcept {
  return kind == PromptKind::kRevision ? "revision" : "direct";
}

std::string PromptText::fingerprint() const { return sha256_hex(text); }

std::string_view revision_instructions() noexcept { return detail::kRevisionInstructions; }

namespace {

std::string one_line(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : trim(s)) {
    if (c == '\n' || c == '\r') {
      pending_space = true;
      continue;
    }
    if (pending_space) {
      if (!out.empty() && out.back() != ' ') out += ' ';
      pending_space = false;
      if (c == ' ') continue;
    }
    out += c;
  }
  return out;
}

void append_separator(std::string& out) {
  out += kSeparator;
  out += '\n';
}

void append_ingredients(std::string& out, const std::vector<std::string>& ingredients) {
  for (const auto& ing : ingredients) {
    out += "* ";
    out += one_line(ing);
    out += '\n';
  }
}

void append_numbered(std::string& out, const std::vector<std::string>& steps) {
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out += std::to_string(i + 1);
    out += ". ";
    out += one_line(steps[i]);
    out += '\n';
  }
}

}  // namespace

PromptText build_revision_prompt(const corpus::Recipe& recipe) {
  if (auto v = corpus::recipe_violations(recipe); !v.empty()) throw ValidationError(std::move(v));

  std::string text(revision_instructions());
  text += '\n';
  append_separator(text);
  text += one_line(recipe.title);
  text += '\n';
  append_separator(text);
  append_ingredients(text, recipe.ingredients);
  append_separator(text);
  text += kOriginalHeading;
  text += '\n';
  append_numbered(text, recipe.steps);
  append_separator(text);
  text += kRevisionSuffix;

  PromptText p;
  p.text = std::move(text);
  p.kind = PromptKind::kRevision;
  p.recipe_id = recipe.id;
  p.config_fingerprint = sha256_hex(std::string(revision_instructions()) + "\nkind=revision\n");
  return p;
}

PromptText build_direct_prompt(std::string_view title,
                               const std::optional<std::vector<std::string>>& ingredients,
                               std::span<const corpus::Recipe> examples) {
  if (is_blank(title)) throw ValidationError({"title blank"});

  std::string text(kDirectInstruction);
  text += "\n\n";
  std::string options = "kind=direct\ningredients=" + std::string(ingredients ? "1" : "0");
  for (const auto& ex : examples) {
    append_separator(text);
    text += one_line(ex.title);
    text += '\n';
    if (ingredients) {
      append_separator(text);
      append_ingredients(text, ex.ingredients);
    }
    append_separator(text);
    text += "Recipe\n";
    append_numbered(text, ex.steps);
    options += "\nexample=" + ex.id;
  }
  append_separator(text);
  text += one_line(title);
  text += '\n';
  if (ingredients) {
    append_separator(text);
    append_ingredients(text, *ingredients);
  }
  append_separator(text);
  text += "Recipe\n1. ";

  PromptText p;
  p.text = std::move(text);
  p.kind = PromptKind::kDirect;
  p.config_fingerprint = sha256_hex(std::string(kDirectInstruction) + "\n" + options);
  return p;
}

PromptText build_direct_prompt(const corpus::Recipe& target, const corpus::RecipeCollection& pool,
                               const DirectPromptConfig& config) {
  const auto examples = sample_few_shot(pool, config.few_shot_count, config.seed, target.id);
  std::optional<std::vector<std::string>> ingredients;
  if (config.include_ingredients) ingredients = target.ingredients;
  auto p = build_direct_prompt(target.title, ingredients, examples);
  p.recipe_id = target.id;
  return p;
}

corpus::RecipeCollection sample_few_shot(const corpus::RecipeCollection& pool, std::size_t k,
                                         std::uint64_t seed, std::string_view exclude_id) {
  if (k == 0) return {};
  // Distinct by id, ordered by id so the draw ignores pool order.
  std::map<std::string_view, const corpus::Recipe*> eligible;
  for (const auto& r : pool) {
    if (r.id != exclude_id) eligible.emplace(r.id, &r);
  }
  if (eligible.size() < k) {
    throw ValidationError({"few-shot pool has " + std::to_string(eligible.size()) +
                           " eligible recipes, need " + std::to_string(k)});
  }
  std::vector<const corpus::Recipe*> order;
  order.reserve(eligible.size());
  for (const auto& [id, r] : eligible) order.push_back(r);
  std::mt19937_64 gen(mix_seed({seed, stable_hash(exclude_id)}));
  seeded_shuffle(std::span<const corpus::Recipe*>(order), gen);

  corpus::RecipeCollection out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(*order[i]);
  return out;
}

std::filesystem::path export_prompt(const PromptText& prompt, const std::filesystem::path& dir) {
  auto path = dir / (prompt.recipe_id + "." + std::string(to_string(prompt.kind)) + ".prompt.txt");
  write_file(path, prompt.text);
  return path;
}

std::vector<std::string> original_steps_from_prompt(std::string_view text) {
  const std::string open = "\n" + std::string(kSeparator) + "\n" + std::string(kOriginalHeading) + "\n";
  const auto start = text.rfind(open);
  if (start == std::string_view::npos) throw FormatError("prompt has no Original Recipe section");
  const auto body_begin = start + open.size();
  const std::string close = "\n" + std::string(kSeparator) + "\n";
  const auto end = text.find(close, body_begin - 1);
  if (end == std::string_view::npos) throw FormatError("Original Recipe section not terminated");

  std::vector<std::string> steps;
  for (const auto& line : split_lines(text.substr(body_begin, end + 1 - body_begin))) {
    const auto dot = line.find(". ");
    if (dot == std::string::npos || dot == 0 ||
        !std::all_of(line.begin(), line.begin() + static_cast<std::ptrdiff_t>(dot),
                     [](unsigned char c) { return std::isdigit(c) != 0; })) {
      throw FormatError("unnumbered line in Original Recipe section: " + line);
    }
    steps.push_back(line.substr(dot + 2));
  }
  return steps;
}

}  // namespace souschef::prompt
