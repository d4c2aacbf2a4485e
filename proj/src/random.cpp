#include "souschef/random.hpp"

namespace souschef {

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t acc = 0x9E3779B97F4A7C15ull;
  for (std::uint64_t p : parts) {
    std::uint64_t z = acc ^ p;
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    acc = z ^ (z >> 31);
  }
  return acc;
}

std::uint64_t stable_hash(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t bound) {
  // Largest multiple of bound representable; draws above it are rejected.
  const std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % bound);
  std::uint64_t x;
  do {
    x = gen();
  } while (x >= limit);
  return x % bound;
}

}  // namespace souschef
