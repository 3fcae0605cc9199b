#include "dpgm/cgm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpgm {

void NLBPConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("NLBP damping must lie in (0, 1]");
  if (!(tol > 0.0)) throw DomainError("NLBP tolerance must be positive");
  if (max_iters <= 0) throw DomainError("NLBP max_iters must be positive");
  if (smoothing && !(*smoothing >= 0.0)) throw DomainError("NLBP smoothing must be non-negative");
  bp.validate();
}

double NLBPConfig::smoothing_for(double N, double b) const {
  if (smoothing) return *smoothing;
  return std::max(1e-6 * N * b, 1e-5 * N / b);
}

void EMConfig::validate() const {
  nlbp.validate();
  fit.validate();
  if (!(em_tol > 0.0)) throw DomainError("EM tolerance must be positive");
  if (max_em_iters <= 0) throw DomainError("EM max iterations must be positive");
}

namespace {

void check_release(const CliqueTableSet& y, const ModelStructure& st) {
  if (!(y.structure() == st)) throw StructuralError("release and model structures differ");
}

double check_scale(double epsilon, double delta_sens) {
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  if (!(delta_sens > 0.0)) throw DomainError("sensitivity must be positive");
  return noise_scale(epsilon, delta_sens);
}

// Huber-smoothed -|r| / b and its derivative in r.
double smoothed_abs(double r, double tau) {
  const double a = std::fabs(r);
  if (tau > 0.0 && a < tau) return r * r / (2.0 * tau);
  return tau > 0.0 ? a - 0.5 * tau : a;
}

double smoothed_sign(double r, double tau) {
  if (tau > 0.0 && std::fabs(r) < tau) return r / tau;
  return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
}

struct Evaluator {
  const Parameters& theta;
  const CliqueTableSet& y;
  const InferenceEngine& engine;
  double N, b, tau;

  CliqueTableSet counts(const RegionTables& R) const {
    return engine.clique_tables(R, TableRole::counts);
  }

  double objective(const RegionTables& R, const CliqueTableSet& n) const {
    RegionTables p(R);
    for (auto& t : p)
      for (double& x : t) x = std::max(x / N, 0.0);
    const double d = static_cast<double>(n.size());
    double v = inner(theta, n) + N * engine.regions().entropy(p) - d * std::log(2.0 * b);
    for (std::size_t i = 0; i < n.size(); ++i) v -= smoothed_abs(y[i] - n[i], tau) / b;
    return v;
  }

  Parameters tilted(const CliqueTableSet& n, std::vector<double>& tilt) const {
    tilt.assign(n.size(), 0.0);
    Parameters t(theta);
    for (std::size_t i = 0; i < n.size(); ++i) {
      tilt[i] = smoothed_sign(y[i] - n[i], tau) / b;
      t[i] += tilt[i];
    }
    return t;
  }
};

RegionTables uniform_regions(const InferenceEngine& engine, double N) {
  const auto& rg = engine.regions();
  const auto& dom = engine.structure().domain();
  RegionTables R;
  for (const Scope& s : rg.scopes) {
    const std::size_t k = scope_size(s, dom);
    R.emplace_back(k, N / static_cast<double>(k));
  }
  return R;
}

double max_gap(const RegionTables& a, const RegionTables& b) {
  double m = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r)
    for (std::size_t i = 0; i < a[r].size(); ++i) m = std::max(m, std::fabs(a[r][i] - b[r][i]));
  return m;
}

}  // namespace

std::vector<double> noise_gradient(const CliqueTableSet& y, const CliqueTableSet& n, double epsilon,
                                   double delta_sens, double smoothing) {
  const double b = check_scale(epsilon, delta_sens);
  check_release(y, n.structure());
  std::vector<double> g(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) g[i] = smoothed_sign(y[i] - n[i], smoothing) / b;
  return g;
}

double noise_log_likelihood(const CliqueTableSet& y, const CliqueTableSet& n, double b, double smoothing) {
  if (!(b > 0.0)) throw DomainError("noise scale must be positive");
  check_release(y, n.structure());
  double v = -static_cast<double>(n.size()) * std::log(2.0 * b);
  for (std::size_t i = 0; i < n.size(); ++i) v -= smoothed_abs(y[i] - n[i], smoothing) / b;
  return v;
}

double map_objective(const CliqueTableSet& n, const Parameters& theta, const CliqueTableSet& y,
                     double epsilon, double delta_sens, const JunctionTree& tree) {
  const double b = check_scale(epsilon, delta_sens);
  const ModelStructure& st = n.structure();
  check_release(y, st);
  if (!(theta.structure() == st)) throw StructuralError("parameters and counts structures differ");
  if (st.num_cliques() == 0) return -static_cast<double>(n.size()) * std::log(2.0 * b);
  const double N = n.table_total(0);
  if (!(N > 0.0)) throw DomainError("counts must have a positive total");
  for (double x : n.values())
    if (!(x >= -1e-8 * N)) throw DomainError("counts must be non-negative");
  for (std::size_t c = 1; c < st.num_cliques(); ++c)
    if (std::fabs(n.table_total(c) - N) > 1e-8 * N) throw DomainError("count tables have unequal totals");
  if (n.max_inconsistency() > 1e-8 * N) throw DomainError("count tables disagree on shared variables");
  return inner(theta, n) + cgm_entropy(n, tree) + noise_log_likelihood(y, n, b);
}

namespace {

NLBPResult nlbp_fixed_point(const Evaluator& ev, const NLBPConfig& cfg, RegionTables R) {
  const double N = ev.N;
  NLBPResult out{CliqueTableSet(ev.engine.structure_ptr(), TableRole::counts), {}, {}, 0.0, 0.0, false, 0, {}, {}};
  CliqueTableSet n = ev.counts(R);
  double value = ev.objective(R, n);
  double alpha = cfg.alpha;
  RegionTables trial(R);

  for (out.iterations = 0; out.iterations < cfg.max_iters; ++out.iterations) {
    const Parameters tilted = ev.tilted(n, out.tilt);
    Calibration cal = ev.engine.calibrate(tilted);
    for (auto& t : cal.beliefs)
      for (double& x : t) x *= N;
    out.residual = max_gap(cal.beliefs, R) / N;
    out.objective_trace.push_back(value);
    out.residual_trace.push_back(out.residual);
    if (out.residual <= cfg.tol) {
      out.converged = true;
      break;
    }
    // Backtrack on the damping until the objective does not drop.
    bool accepted = false;
    CliqueTableSet n_trial = n;
    double v_trial = value;
    for (double a = alpha; a >= 1e-12; a *= 0.5) {
      for (std::size_t r = 0; r < R.size(); ++r)
        for (std::size_t i = 0; i < R[r].size(); ++i) trial[r][i] = (1.0 - a) * R[r][i] + a * cal.beliefs[r][i];
      n_trial = ev.counts(trial);
      v_trial = ev.objective(trial, n_trial);
      if (v_trial >= value - 1e-12 * std::fabs(value)) {
        alpha = std::min(cfg.alpha, 2.0 * a);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    R.swap(trial);
    n = std::move(n_trial);
    value = v_trial;
  }
  if (out.iterations == cfg.max_iters) ev.tilted(n, out.tilt);
  out.objective = value;
  out.n = std::move(n);
  out.regions = std::move(R);
  return out;
}

struct DualPoint {
  std::vector<double> lambda;
  double value = 0.0;
  std::vector<double> grad;
  RegionTables regions;
};

// Projected Barzilai-Borwein descent with a nonmonotone Armijo test.
NLBPResult nlbp_dual(const Evaluator& ev, const NLBPConfig& cfg, const RegionTables& R0) {
  const double N = ev.N, bound = 1.0 / ev.b, s = ev.tau * ev.b;
  const std::size_t d = ev.theta.size();
  const CliqueTableSet& y = ev.y;

  auto evaluate = [&](std::vector<double> lambda) {
    Parameters t(ev.theta);
    for (std::size_t i = 0; i < d; ++i) t[i] += lambda[i];
    Calibration cal = ev.engine.calibrate(t);
    for (auto& tb : cal.beliefs)
      for (double& x : tb) x *= N;
    const CliqueTableSet n = ev.counts(cal.beliefs);
    DualPoint p{std::move(lambda), N * cal.log_partition, std::vector<double>(d), std::move(cal.beliefs)};
    for (std::size_t i = 0; i < d; ++i) {
      p.value += p.lambda[i] * (0.5 * s * p.lambda[i] - y[i]);
      p.grad[i] = n[i] - y[i] + s * p.lambda[i];
    }
    return p;
  };
  auto projected_gradient = [&](const DualPoint& p) {
    double m = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double g = p.grad[i];
      if (p.lambda[i] >= bound) g = std::max(g, 0.0);
      else if (p.lambda[i] <= -bound) g = std::min(g, 0.0);
      m = std::max(m, std::fabs(g));
    }
    return m / N;
  };

  std::vector<double> tilt;
  ev.tilted(ev.counts(R0), tilt);
  DualPoint cur = evaluate(std::move(tilt));
  NLBPResult out{CliqueTableSet(ev.engine.structure_ptr(), TableRole::counts), {}, {}, 0.0, 0.0, false, 0, {}, {}};
  std::vector<double> recent{cur.value};
  double step = 0.0;
  {
    double gmax = 0.0;
    for (double g : cur.grad) gmax = std::max(gmax, std::fabs(g));
    step = gmax > 0.0 ? bound / gmax : 1.0;
  }
  std::vector<double> dir(d), trial(d);

  for (out.iterations = 0; out.iterations < cfg.max_iters; ++out.iterations) {
    out.residual = projected_gradient(cur);
    out.residual_trace.push_back(out.residual);
    if (out.residual <= cfg.tol) {
      out.converged = true;
      break;
    }
    double slope = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      dir[i] = std::clamp(cur.lambda[i] - step * cur.grad[i], -bound, bound) - cur.lambda[i];
      slope += dir[i] * cur.grad[i];
    }
    if (!(slope < 0.0)) break;
    const double reference = *std::max_element(recent.begin(), recent.end());
    double t = 1.0;
    bool accepted = false;
    DualPoint next;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      for (std::size_t i = 0; i < d; ++i) trial[i] = cur.lambda[i] + t * dir[i];
      next = evaluate(trial);
      if (std::isfinite(next.value) && next.value <= reference + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double dl = next.lambda[i] - cur.lambda[i];
      ss += dl * dl;
      sy += dl * (next.grad[i] - cur.grad[i]);
    }
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-12 * bound, 1e12 * bound) : 1e3 * step;
    cur = std::move(next);
    recent.push_back(cur.value);
    if (recent.size() > 10) recent.erase(recent.begin());
  }

  out.n = ev.counts(cur.regions);
  out.objective = ev.objective(cur.regions, out.n);
  out.objective_trace.push_back(out.objective);
  out.tilt = std::move(cur.lambda);
  out.regions = std::move(cur.regions);
  return out;
}

}  // namespace

NLBPResult nlbp(const Parameters& theta, const PrivateRelease& release, double N, const NLBPConfig& cfg,
                const InferenceEngine& engine, const RegionTables* init) {
  cfg.validate();
  if (!(N > 0.0)) throw DomainError("NLBP: N must be positive");
  const ModelStructure& st = engine.structure();
  check_release(release.y, st);
  if (!(theta.structure() == st)) throw StructuralError("NLBP: parameters and engine structures differ");
  const double b = check_scale(release.epsilon, release.sensitivity);
  const Evaluator ev{theta, release.y, engine, N, b, cfg.smoothing_for(N, b)};
  RegionTables R = init ? *init : uniform_regions(engine, N);
  if (R.size() != engine.regions().scopes.size()) throw StructuralError("NLBP: warm start has the wrong regions");
  return cfg.solver == NLBPSolver::fixed_point ? nlbp_fixed_point(ev, cfg, std::move(R)) : nlbp_dual(ev, cfg, R);
}

double nlbp_kkt_residual(const Parameters& theta, const PrivateRelease& release, double N,
                         const NLBPResult& result, const InferenceEngine& engine, double kink) {
  const double b = check_scale(release.epsilon, release.sensitivity);
  if (result.tilt.size() != theta.size()) throw DomainError("NLBP result carries no tilt");
  Parameters tilted(theta);
  for (std::size_t i = 0; i < tilted.size(); ++i) tilted[i] += result.tilt[i];
  const BPResult bp = engine.run(tilted);
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    worst = std::max(worst, std::fabs(N * bp.marginals[i] - result.n[i]) / N);
    const double r = release.y[i] - result.n[i];
    const double s = b * result.tilt[i];
    const double dist = std::fabs(r) <= kink ? std::max(std::fabs(s) - 1.0, 0.0)
                                             : std::fabs(s - (r > 0.0 ? 1.0 : -1.0));
    worst = std::max(worst, dist);
  }
  return worst;
}

EMResult em_fit(const PrivateRelease& release, double N, const InferenceEngine& engine, const EMConfig& cfg,
                const ParameterTying* tying) {
  cfg.validate();
  const StructurePtr& sp = engine.structure_ptr();
  check_release(release.y, *sp);
  Parameters theta(sp);
  RegionTables regions;
  EMResult out{{theta, 0.0, 0.0, false, 0, {}}, CliqueTableSet(sp, TableRole::counts), {}};
  bool estep_failed = false;
  FitOptions opts;
  opts.total = N;
  opts.tying = tying;

  bool em_converged = false;
  for (int t = 0; t < cfg.max_em_iters; ++t) {
    NLBPResult e = nlbp(theta, release, N, cfg.nlbp, engine, regions.empty() ? nullptr : &regions);
    if (!e.converged) estep_failed = true;
    opts.warm_start = &theta;
    FitResult m = fit_mle(e.n, engine, cfg.fit, opts);
    double change = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) change = std::max(change, std::fabs(m.theta_hat[i] - theta[i]));
    out.trace.push_back({e.objective, e.residual, e.iterations, e.converged, change});
    theta = m.theta_hat;
    regions = std::move(e.regions);
    out.expected_counts = std::move(e.n);
    out.fit = std::move(m);
    out.fit.iterations = t + 1;
    if (change <= cfg.em_tol) {
      em_converged = true;
      break;
    }
  }
  out.fit.converged = em_converged;
  out.fit.warnings.clear();
  if (!out.fit.converged) out.fit.warnings.push_back("EM stopped after max_em_iters without meeting em_tol");
  if (estep_failed) out.fit.warnings.push_back("an E-step stopped before NLBP converged");
  return out;
}

}  // namespace dpgm
