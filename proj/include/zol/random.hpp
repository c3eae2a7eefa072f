#pragma once

#include <cstdint>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

namespace zol {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Per-component seed: the component name hashed together with the global
/// seed. Stable across platforms (no std::hash).
inline std::uint64_t derive_seed(std::uint64_t global, std::string_view component) {
  return splitmix64(global ^ fnv1a(component));
}

inline std::uint64_t derive_seed(std::uint64_t global, std::string_view component,
                                 std::uint64_t index) {
  return splitmix64(derive_seed(global, component) + splitmix64(index));
}

// Uniform integer in [0, n) without the implementation-defined behaviour of
// std::uniform_int_distribution, so sampled batches are identical across
// standard libraries.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  // Lemire's nearly-divisionless method.
  std::uint64_t x = rng();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    std::uint64_t t = (0 - static_cast<std::uint64_t>(n)) % n;
    while (low < t) {
      x = rng();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

/// Draws `count` distinct values from [0, n) in random order. `pool` is
/// scratch space reused across calls (partial Fisher-Yates).
inline void sample_without_replacement(Rng& rng, std::size_t n, std::size_t count,
                                       std::vector<std::size_t>& pool,
                                       std::vector<std::size_t>& out) {
  if (pool.size() != n) {
    pool.resize(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  }
  out.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + uniform_index(rng, n - i);
    std::swap(pool[i], pool[j]);
    out[i] = pool[i];
  }
}

inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                           std::size_t count) {
  std::vector<std::size_t> pool, out;
  sample_without_replacement(rng, n, count, pool, out);
  return out;
}

inline void shuffle(Rng& rng, std::vector<std::size_t>& v) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

}  // namespace zol
