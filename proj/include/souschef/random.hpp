#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace souschef {

// std::mt19937_64 output is fixed by the standard; distributions and std::shuffle
// are not. Everything seeded goes through these helpers so sampled sets are
// identical across standard libraries.

/// Folds several 64-bit values into one seed (splitmix64 finalizer per word).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) noexcept;

/// FNV-1a over the bytes; stable string-to-seed conversion.
std::uint64_t stable_hash(std::string_view s) noexcept;

/// Uniform integer in [0, bound), bound > 0, by rejection.
std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound);

template <typename T>
void seeded_shuffle(std::span<T> items, std::mt19937_64& gen) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(gen, i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace souschef
