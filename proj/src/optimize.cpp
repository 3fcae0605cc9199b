#include "dpgm/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace dpgm {
namespace {

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

// Backtracking from step t along d. On success x, g and value hold the new
// point; returns the accepted step or 0.
double line_search(const Objective& f, std::vector<double>& x, std::vector<double>& g, double& value,
                   const std::vector<double>& d, double t) {
  const double slope = dot(g, d);
  std::vector<double> xn(x.size()), gn(x.size());
  for (int k = 0; k < kMaxBacktracks; ++k) {
    for (std::size_t i = 0; i < x.size(); ++i) xn[i] = x[i] + t * d[i];
    const double vn = f(xn, gn);
    if (std::isfinite(vn) && vn >= value + kArmijo * t * slope) {
      x.swap(xn);
      g.swap(gn);
      value = vn;
      return t;
    }
    t *= 0.5;
  }
  return 0.0;
}

}  // namespace

AscentResult maximize_lbfgs(const Objective& f, std::vector<double> x0, const AscentOptions& opts) {
  AscentResult r;
  r.x = std::move(x0);
  const std::size_t n = r.x.size();
  std::vector<double> g(n);
  r.value = f(r.x, g);
  r.trace.push_back(r.value);
  std::deque<std::vector<double>> S, Y;
  std::deque<double> rho;
  std::vector<double> d(n), x_prev, g_prev;

  for (r.iterations = 0; r.iterations < opts.max_iters; ++r.iterations) {
    r.grad_norm = max_abs(g);
    if (r.grad_norm <= opts.grad_tol) {
      r.converged = true;
      return r;
    }
    // Two-loop recursion on the negated problem; d is an ascent direction.
    std::vector<double> q(g);
    std::vector<double> alpha(S.size());
    for (std::size_t k = S.size(); k-- > 0;) {
      alpha[k] = rho[k] * dot(S[k], q);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * Y[k][i];
    }
    double gamma = 1.0;
    if (!S.empty()) gamma = dot(S.back(), Y.back()) / dot(Y.back(), Y.back());
    for (std::size_t i = 0; i < n; ++i) q[i] *= gamma;
    for (std::size_t k = 0; k < S.size(); ++k) {
      const double beta = rho[k] * dot(Y[k], q);
      for (std::size_t i = 0; i < n; ++i) q[i] += S[k][i] * (alpha[k] - beta);
    }
    d = q;
    double t = 1.0;
    if (S.empty() || dot(g, d) <= 0.0) {
      // Steepest ascent, scaled so the first trial moves by at most 1.
      d = g;
      t = 1.0 / std::max(1.0, max_abs(g));
      S.clear();
      Y.clear();
      rho.clear();
    }
    x_prev = r.x;
    g_prev = g;
    if (line_search(f, r.x, g, r.value, d, t) == 0.0) break;
    r.trace.push_back(r.value);

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = r.x[i] - x_prev[i];
      y[i] = g_prev[i] - g[i];  // gradient difference of the negated objective
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y))) {
      S.push_back(std::move(s));
      Y.push_back(std::move(y));
      rho.push_back(1.0 / sy);
      if (S.size() > static_cast<std::size_t>(opts.memory)) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
  }
  r.grad_norm = max_abs(g);
  r.converged = r.grad_norm <= opts.grad_tol;
  return r;
}

AscentResult maximize_gradient(const Objective& f, std::vector<double> x0, const AscentOptions& opts) {
  AscentResult r;
  r.x = std::move(x0);
  std::vector<double> g(r.x.size());
  r.value = f(r.x, g);
  r.trace.push_back(r.value);
  double t = 1.0;
  for (r.iterations = 0; r.iterations < opts.max_iters; ++r.iterations) {
    r.grad_norm = max_abs(g);
    if (r.grad_norm <= opts.grad_tol) {
      r.converged = true;
      return r;
    }
    const std::vector<double> d = g;
    const double accepted = line_search(f, r.x, g, r.value, d, 2.0 * t);
    if (accepted == 0.0) break;
    t = accepted;
    r.trace.push_back(r.value);
  }
  r.grad_norm = max_abs(g);
  r.converged = r.grad_norm <= opts.grad_tol;
  return r;
}

}  // namespace dpgm
