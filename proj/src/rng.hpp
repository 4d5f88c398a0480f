#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace boneage {

/// Deterministic, portable generator (splitmix64). Every random choice in
/// the project flows through this class, so a run is fully determined by
/// its seed regardless of platform or standard-library version.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1), 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (cosine branch only; no cached spare,
  /// so the draw count per call is fixed).
  double normal() {
    double u1 = static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;  // (0,1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.28318530717958647692 * u2);
  }

  /// Uniform integer in [0,n). Modulo bias is ~2^-64 and irrelevant here.
  std::uint64_t below(std::uint64_t n) { return next() % n; }

private:
  std::uint64_t state_;
};

/// Derives an independent stream seed from a master seed and a tag path,
/// e.g. derive_seed(seed, {kStreamAugment, epoch, sample_index}).
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> path) {
  Rng mixer(seed);
  std::uint64_t acc = mixer.next();
  for (std::uint64_t part : path) {
    Rng step(acc ^ (part + 0x9e3779b97f4a7c15ULL));
    acc = step.next();
  }
  return acc;
}

// Stream tags for derive_seed.
inline constexpr std::uint64_t kStreamInit = 1;
inline constexpr std::uint64_t kStreamShuffle = 2;
inline constexpr std::uint64_t kStreamAugment = 3;
inline constexpr std::uint64_t kStreamDropout = 4;
inline constexpr std::uint64_t kStreamSplit = 5;
inline constexpr std::uint64_t kStreamImage = 6;
inline constexpr std::uint64_t kStreamFolds = 7;
inline constexpr std::uint64_t kStreamNoise = 8;

/// Fisher-Yates shuffle driven by the explicit generator.
template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace boneage
