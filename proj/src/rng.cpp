#include "rolespace/rng.hpp"

#include <stdexcept>

namespace rolespace {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ (substream * 0xd6e8feb86659fd93ULL));
}

std::uint64_t stable_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  // Rejection sampling keeps the draw unbiased and independent of the standard
  // library's distribution implementation.
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = Rng::max() - (Rng::max() % range);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t sample_discrete(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u < 0.0) return i;
  }
  // rounding fallthrough: last positive weight
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  throw std::invalid_argument("sample_discrete: all weights are zero");
}

std::vector<double> sample_dirichlet(std::span<const double> concentration, Rng& rng) {
  std::vector<double> out(concentration.size());
  double total = 0.0;
  for (std::size_t i = 0; i < concentration.size(); ++i) {
    std::gamma_distribution<double> gamma(concentration[i], 1.0);
    out[i] = gamma(rng);
    total += out[i];
  }
  if (total <= 0.0) {
    // every gamma draw underflowed; fall back to the mean
    double c = 0.0;
    for (double a : concentration) c += a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = concentration[i] / c;
    return out;
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace rolespace
