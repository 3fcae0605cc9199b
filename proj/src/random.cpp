#include "dpgm/random.hpp"

#include <cmath>
#include <stdexcept>

namespace dpgm {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: empty range");
  // Rejection to remove modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = engine_();
  } while (r >= limit);
  return r % n;
}

double Rng::laplace(double scale) {
  if (!(scale > 0.0)) throw std::invalid_argument("laplace: scale must be positive");
  double u;
  do {
    u = uniform() - 0.5;
  } while (u == -0.5);
  const double s = u < 0.0 ? -1.0 : (u > 0.0 ? 1.0 : 0.0);
  return scale * s * std::log(1.0 - 2.0 * std::fabs(u));
}

double Rng::exponential() {
  double u;
  do {
    u = uniform();
  } while (u == 0.0);
  return -std::log(u);
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
  double target = uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    target -= weights[i];
    if (target < 0.0) return i;
  }
  // Round-off: return the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return weights.size() - 1;
}

std::vector<double> Rng::flat_dirichlet(std::size_t k) {
  std::vector<double> out(k);
  double total = 0.0;
  for (auto& v : out) {
    v = exponential();
    total += v;
  }
  for (auto& v : out) v /= total;
  return out;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t id : ids) h = mix64(h ^ mix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

}  // namespace dpgm
