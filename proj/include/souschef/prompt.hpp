#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "souschef/corpus.hpp"

namespace souschef::prompt {

enum class PromptKind { kRevision, kDirect };

std::string_view to_string(PromptKind kind) noexcept;

struct PromptText {
  std::string text;
  PromptKind kind = PromptKind::kRevision;
  std::string recipe_id;
  /// SHA-256 of the fixed template bytes plus the options that shaped this prompt.
  std::string config_fingerprint;

  /// SHA-256 of `text`. Keys scripted completions and revision records.
  std::string fingerprint() const;
};

/// Fixed instruction block of the revision prompt: task statement, the six lettered
/// operations and their six demonstrations. Ends with a newline.
std::string_view revision_instructions() noexcept;

inline constexpr std::string_view kSeparator = "---";
inline constexpr std::string_view kOriginalHeading = "Original Recipe";
inline constexpr std::string_view kRevisedHeading = "Revised Recipe";
/// Every revision prompt ends with this; the completion continues step 1 inline.
inline constexpr std::string_view kRevisionSuffix = "Revised Recipe\n1. ";
inline constexpr std::string_view kDirectInstruction = "Write a recipe for the following dish.";

/// Layout:
///   <instructions>\n---\n<title>\n---\n* <ingredient>...\n---\nOriginal Recipe\n
///   1. <step>...\n---\nRevised Recipe\n1. 
/// Line breaks inside a slot value are folded to single spaces so the fixed
/// separators stay unambiguous.
PromptText build_revision_prompt(const corpus::Recipe& recipe);

struct DirectPromptConfig {
  bool include_ingredients = false;
  std::size_t few_shot_count = 0;
  std::uint64_t seed = 0;
};

/// One-sentence instruction, then each example as title / [ingredients] / numbered
/// steps, then the target title / [ingredients] and an open "Recipe\n1. " anchor.
/// Example ingredients are rendered only when target ingredients are.
PromptText build_direct_prompt(std::string_view title,
                               const std::optional<std::vector<std::string>>& ingredients,
                               std::span<const corpus::Recipe> examples);

/// Convenience: samples `few_shot_count` examples from `pool` (excluding the target)
/// and renders the direct prompt for `target`.
PromptText build_direct_prompt(const corpus::Recipe& target, const corpus::RecipeCollection& pool,
                               const DirectPromptConfig& config);

/// k distinct recipes from pool, none with exclude_id. Deterministic per seed.
corpus::RecipeCollection sample_few_shot(const corpus::RecipeCollection& pool, std::size_t k,
                                         std::uint64_t seed, std::string_view exclude_id);

/// Writes <dir>/<recipe_id>.<kind>.prompt.txt and returns the path.
std::filesystem::path export_prompt(const PromptText& prompt, const std::filesystem::path& dir);

/// Recovers the numbered Original Recipe lines (without numbers) from a revision prompt.
std::vector<std::string> original_steps_from_prompt(std::string_view prompt_text);

}  // namespace souschef::prompt
