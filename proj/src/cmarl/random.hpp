#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace cmarl {

/// Seeded random stream. Owned by exactly one caller; never shared across threads.
///
/// Draws are defined in terms of raw 64-bit engine output so the sequence does not
/// depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer on [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n);

  /// Engine state as text; `restore` of the same text resumes the exact sequence.
  std::string save_state() const;
  void restore_state(const std::string& text);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Draws an index from a probability vector by inverse CDF with one uniform.
/// The last index absorbs any rounding shortfall in the cumulative sum.
std::size_t sample_from_pmf(std::span<const double> pmf, double u);

/// Stateless 64-bit mixer (splitmix64 finalizer). Used for seed-addressed random tables.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent child seed from a parent seed and a stream label.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t label) {
  return mix64(mix64(parent) ^ (label * 0xd1b54a32d192ed03ULL));
}

}  // namespace cmarl
