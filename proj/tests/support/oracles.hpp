#pragma once

// Brute-force references used by the tests. Everything here works on the
// full joint state space, so it only suits tiny models, and it shares no
// code with the message-passing engines.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "dpgm/model.hpp"
#include "dpgm/random.hpp"

namespace oracle {

using dpgm::DomainSpec;
using dpgm::ModelStructure;
using dpgm::Parameters;

// Every joint assignment, first variable most significant.
inline std::vector<std::vector<int>> joint_states(const DomainSpec& domain) {
  std::vector<std::vector<int>> out;
  std::vector<int> x(domain.num_vars(), 0);
  for (;;) {
    out.push_back(x);
    int v = static_cast<int>(x.size()) - 1;
    while (v >= 0 && ++x[v] == domain.cardinality(v)) {
      x[v] = 0;
      --v;
    }
    if (v < 0) break;
  }
  return out;
}

// Clique-table index computed directly from the row-major definition.
inline std::size_t cell(const ModelStructure& s, std::size_t c, const std::vector<int>& x) {
  std::size_t idx = 0;
  for (int v : s.clique(c)) idx = idx * static_cast<std::size_t>(s.domain().cardinality(v)) + x[v];
  return idx;
}

inline double score(const Parameters& theta, const std::vector<int>& x) {
  const ModelStructure& s = theta.structure();
  double sum = 0.0;
  for (std::size_t c = 0; c < s.num_cliques(); ++c) sum += theta[s.offset(c) + cell(s, c, x)];
  return sum;
}

struct Joint {
  std::vector<std::vector<int>> states;
  std::vector<double> p;
  double log_z = 0.0;
};

inline Joint joint(const Parameters& theta) {
  Joint j;
  j.states = joint_states(theta.structure().domain());
  std::vector<double> s(j.states.size());
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = score(theta, j.states[i]);
    m = std::max(m, s[i]);
  }
  double z = 0.0;
  for (double v : s) z += std::exp(v - m);
  j.log_z = m + std::log(z);
  j.p.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) j.p[i] = std::exp(s[i] - j.log_z);
  return j;
}

inline double log_partition(const Parameters& theta) { return joint(theta).log_z; }

// Flat vector of clique marginals.
inline std::vector<double> marginals(const Parameters& theta) {
  const ModelStructure& s = theta.structure();
  Joint j = joint(theta);
  std::vector<double> mu(s.dimension(), 0.0);
  for (std::size_t i = 0; i < j.states.size(); ++i)
    for (std::size_t c = 0; c < s.num_cliques(); ++c) mu[s.offset(c) + cell(s, c, j.states[i])] += j.p[i];
  return mu;
}

inline double kl(const Parameters& p, const Parameters& q) {
  Joint a = joint(p), b = joint(q);
  double d = 0.0;
  for (std::size_t i = 0; i < a.p.size(); ++i)
    if (a.p[i] > 0) d += a.p[i] * (std::log(a.p[i]) - std::log(b.p[i]));
  return d;
}

inline double entropy(const Parameters& theta) {
  Joint j = joint(theta);
  double h = 0.0;
  for (double v : j.p)
    if (v > 0) h -= v * std::log(v);
  return h;
}

inline Parameters random_theta(const dpgm::StructurePtr& s, dpgm::Rng& rng, double scale = 1.0) {
  Parameters theta(s);
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = scale * (2.0 * rng.uniform() - 1.0);
  return theta;
}

// Order-k chain over T variables of cardinality card.
inline dpgm::StructurePtr chain(int T, int card, int order = 1) {
  std::vector<dpgm::Scope> cliques;
  for (int i = 0; i < T; ++i)
    for (int j = i + 1; j < T && j - i <= order; ++j) cliques.push_back({i, j});
  return dpgm::make_structure(DomainSpec::uniform(static_cast<std::size_t>(T), card), cliques);
}

// Random decomposable structure with up to six variables of two or three
// states: each new variable attaches to a subset of
// an existing clique, which keeps the independence graph chordal.
inline dpgm::StructurePtr random_decomposable(dpgm::Rng& rng) {
  const int T = 2 + static_cast<int>(rng.below(5));
  std::vector<int> cards;
  for (int t = 0; t < T; ++t) cards.push_back(2 + static_cast<int>(rng.below(2)));
  std::vector<dpgm::Scope> cliques{{0}};
  for (int t = 1; t < T; ++t) {
    const dpgm::Scope& host = cliques[rng.below(cliques.size())];
    dpgm::Scope c;
    for (int v : host)
      if (rng.uniform() < 0.6 && c.size() < 2) c.push_back(v);
    if (c.empty()) c.push_back(host.back());
    c.push_back(t);
    cliques.push_back(c);
  }
  cliques.erase(cliques.begin());
  return dpgm::make_structure(DomainSpec{cards}, cliques);
}

// Euclidean projection onto {w >= 0, sum w = total} by trying every support
// set and keeping the one whose KKT threshold is consistent. Exponential in
// the length, fine for d <= 10.
inline std::vector<double> simplex_projection(const std::vector<double>& v, double total) {
  const std::size_t k = v.size();
  for (std::size_t mask = 1; mask < (std::size_t{1} << k); ++mask) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < k; ++i)
      if (mask >> i & 1) {
        sum += v[i];
        ++count;
      }
    double t = (sum - total) / static_cast<double>(count);
    bool ok = true;
    for (std::size_t i = 0; i < k && ok; ++i) {
      bool in = mask >> i & 1;
      if (in && v[i] - t < 0) ok = false;
      if (!in && v[i] - t > 0) ok = false;
    }
    if (!ok) continue;
    std::vector<double> w(k, 0.0);
    for (std::size_t i = 0; i < k; ++i)
      if (mask >> i & 1) w[i] = v[i] - t;
    return w;
  }
  return {};
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace oracle
