#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include "core/types.hpp"

namespace ents {

// SplitMix64 finalizer; used both as the generator step and as the keyed hash
// that splits streams.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine(std::uint64_t key, std::uint64_t value) noexcept {
  return mix64(key ^ mix64(value + 0x9e3779b97f4a7c15ULL));
}

/// Small counter-style generator satisfying UniformRandomBitGenerator.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) noexcept : state_(state) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

 private:
  std::uint64_t state_;
};

enum class Purpose : std::uint64_t {
  Prior = 1,
  Forecast = 2,
  Observe = 3,
  SparseObserve = 4,
  TruthPrior = 5,
  TruthForecast = 6,
  TruthObserve = 7,
  Perturbation = 8,
  Bootstrap = 9,
};

/// A family of independent member streams addressed by
/// (seed, repeat, step, purpose). Member i's generator depends only on the
/// full key and i, never on evaluation order or thread scheduling.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t repeat, std::uint64_t step, Purpose purpose) noexcept
      : key_(combine(combine(combine(mix64(seed), repeat), step), static_cast<std::uint64_t>(purpose))) {}

  /// Sub-stream for an extra discriminator (e.g. an observation component).
  RandomStream derive(std::uint64_t salt) const noexcept { return RandomStream(combine(key_, salt ^ 0xa5a5a5a5ULL)); }

  SplitMix64 member(Index i) const noexcept { return SplitMix64(combine(key_, static_cast<std::uint64_t>(i))); }

  /// Fills an n x d matrix with independent N(0, 1) draws, member per row.
  RowMatrix standard_normal(Index n, Index d) const {
    RowMatrix out(n, d);
    for (Index i = 0; i < n; ++i) {
      SplitMix64 gen = member(i);
      std::normal_distribution<double> normal;
      for (Index k = 0; k < d; ++k) out(i, k) = normal(gen);
    }
    return out;
  }

 private:
  explicit RandomStream(std::uint64_t key) noexcept : key_(key) {}
  std::uint64_t key_;
};

}  // namespace ents
