#pragma once

// Seeded random streams shared by every randomized routine in the library.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the
// standard. The distributions below are written out by hand instead of using
// <random> distributions, whose algorithms are implementation-defined, so that
// a seed reproduces the same trace with any standard library.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace edgecache {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of Monte Carlo realization `r` under `base_seed`:
/// mix64(mix64(base_seed) ^ r). Every realization can be re-run on its own.
constexpr std::uint64_t realization_seed(std::uint64_t base_seed, std::uint64_t r) noexcept {
  return mix64(mix64(base_seed) ^ r);
}

/// Independent sub-stream `k` of a seed (0 = environment, 1 = agent, ...).
inline Rng substream(std::uint64_t seed, std::uint64_t k) {
  return Rng(mix64(seed + 0x632be59bd9b4e019ULL * (k + 1)));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n), unbiased (rejection on the top of the range).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  std::uint64_t x = rng();
  while (x >= limit) {
    x = rng();
  }
  return static_cast<std::size_t>(x % bound);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Fisher-Yates shuffle.
template <class T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

/// Uniformly random permutation of 0..n-1.
inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  shuffle(std::span<std::size_t>(perm), rng);
  return perm;
}

/// Draw from a categorical distribution by inverse CDF. Rounding slack in the
/// tail falls on the last index with positive mass.
inline std::size_t sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

/// Symmetric Dirichlet(1) draw of dimension n (normalized unit exponentials).
inline std::vector<double> dirichlet_uniform(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& x : w) {
    x = -std::log1p(-uniform01(rng));
    total += x;
  }
  for (auto& x : w) x /= total;
  return w;
}

}  // namespace edgecache
