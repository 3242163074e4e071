#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace rolespace {

using Rng = std::mt19937_64;

/// Mixes a base seed with stream identifiers (splitmix64 finalizer), so that
/// per-slice, per-tree and per-user generators are independent but reproducible.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

/// FNV-1a over the bytes of `text`. Stable across platforms.
std::uint64_t stable_hash(std::string_view text);

/// Uniform integer in [0, n). n must be > 0.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Uniform real in [0, 1).
double uniform01(Rng& rng);

/// Draws an index with probability proportional to `weights` (non-negative, not all zero).
std::size_t sample_discrete(std::span<const double> weights, Rng& rng);

/// Dirichlet draw with the given concentration parameters (all > 0).
std::vector<double> sample_dirichlet(std::span<const double> concentration, Rng& rng);

/// In-place Fisher-Yates shuffle using uniform_index.
template <class T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace rolespace
