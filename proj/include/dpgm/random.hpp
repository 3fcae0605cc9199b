#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace dpgm {

// Seedable generator used everywhere randomness is needed. All draws are
// built from the raw 64-bit output of mt19937_64 (whose sequence is fixed by
// the standard) so results do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  // Laplace(0, scale) by inverse CDF.
  double laplace(double scale);

  // Exponential(1).
  double exponential();

  // Index drawn proportionally to non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  // Point drawn uniformly from the simplex of dimension k, i.e.
  // Dirichlet(1, ..., 1).
  std::vector<double> flat_dirichlet(std::size_t k);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Child seed keyed on a parent seed and a sequence of ids. Used to give every
// trial its own stream that depends only on its coordinates.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> ids);

}  // namespace dpgm
