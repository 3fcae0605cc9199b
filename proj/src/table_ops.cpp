#include "dpgm/table_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpgm {

bool is_subset(const Scope& small, const Scope& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

Scope scope_intersection(const Scope& a, const Scope& b) {
  Scope out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::vector<std::size_t> projection_map(const Scope& from, const Scope& to,
                                        const DomainSpec& domain) {
  if (!is_subset(to, from)) throw StructuralError("projection_map: target scope not contained in source");
  // Stride of each `from` variable inside the `to` table (0 if absent).
  std::vector<std::size_t> stride(from.size(), 0);
  std::size_t s = 1;
  for (std::size_t k = to.size(); k-- > 0;) {
    auto pos = std::lower_bound(from.begin(), from.end(), to[k]) - from.begin();
    stride[static_cast<std::size_t>(pos)] = s;
    s *= static_cast<std::size_t>(domain.cardinality(to[k]));
  }
  const std::size_t n = scope_size(from, domain);
  std::vector<std::size_t> map(n);
  std::vector<int> digit(from.size(), 0);
  std::size_t target = 0;
  for (std::size_t i = 0; i < n; ++i) {
    map[i] = target;
    // Odometer increment, last variable fastest.
    for (std::size_t k = from.size(); k-- > 0;) {
      const int card = domain.cardinality(from[k]);
      if (++digit[k] < card) {
        target += stride[k];
        break;
      }
      digit[k] = 0;
      target -= stride[k] * static_cast<std::size_t>(card - 1);
    }
  }
  return map;
}

double logsumexp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void marginalize_sum(std::span<const double> src, std::span<const std::size_t> map,
                     std::span<double> dst) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[map[i]] += src[i];
}

void marginalize_logsumexp(std::span<const double> src, std::span<const std::size_t> map,
                           std::span<double> dst) {
  const double ninf = -std::numeric_limits<double>::infinity();
  std::vector<double> mx(dst.size(), ninf);
  for (std::size_t i = 0; i < src.size(); ++i) mx[map[i]] = std::max(mx[map[i]], src[i]);
  std::vector<double> acc(dst.size(), 0.0);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double m = mx[map[i]];
    if (std::isfinite(m)) acc[map[i]] += std::exp(src[i] - m);
  }
  for (std::size_t k = 0; k < dst.size(); ++k)
    dst[k] = std::isfinite(mx[k]) ? mx[k] + std::log(acc[k]) : mx[k];
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

double normalize_log(std::span<double> v) {
  const double z = logsumexp(v);
  for (double& x : v) x = std::exp(x - z);
  return z;
}

}  // namespace dpgm
