#include "dpgm/naive.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "dpgm/optimize.hpp"

namespace dpgm {

void FitConfig::validate() const {
  if (!(lambda >= 0.0)) throw DomainError("lambda must be non-negative");
  if (!(grad_tol > 0.0)) throw DomainError("grad_tol must be positive");
  if (max_iters <= 0) throw DomainError("max_iters must be positive");
}

ParameterTying ParameterTying::none(const ModelStructure& structure) {
  ParameterTying t;
  for (std::size_t c = 0; c < structure.num_cliques(); ++c) t.group_of.push_back(static_cast<int>(c));
  return t;
}

int ParameterTying::num_groups() const {
  return group_of.empty() ? 0 : *std::max_element(group_of.begin(), group_of.end()) + 1;
}

void ParameterTying::validate(const ModelStructure& structure) const {
  if (group_of.size() != structure.num_cliques()) throw StructuralError("tying must assign every clique to a group");
  std::vector<long> size(static_cast<std::size_t>(num_groups()), -1);
  for (std::size_t c = 0; c < group_of.size(); ++c) {
    const int g = group_of[c];
    if (g < 0) throw StructuralError("negative tying group");
    auto& s = size[static_cast<std::size_t>(g)];
    const auto ts = static_cast<long>(structure.table_size(c));
    if (s >= 0 && s != ts) throw StructuralError("tied cliques must have equal table sizes");
    s = ts;
  }
  for (long s : size)
    if (s < 0) throw StructuralError("tying groups must be numbered contiguously");
}

std::size_t ParameterTying::free_dimension(const ModelStructure& structure) const {
  std::vector<std::size_t> size(static_cast<std::size_t>(num_groups()), 0);
  for (std::size_t c = 0; c < group_of.size(); ++c) size[static_cast<std::size_t>(group_of[c])] = structure.table_size(c);
  std::size_t d = 0;
  for (auto s : size) d += s;
  return d;
}

namespace {

std::vector<std::size_t> group_offsets(const ParameterTying& tying, const ModelStructure& structure) {
  std::vector<std::size_t> size(static_cast<std::size_t>(tying.num_groups()), 0);
  for (std::size_t c = 0; c < tying.group_of.size(); ++c) size[static_cast<std::size_t>(tying.group_of[c])] = structure.table_size(c);
  std::vector<std::size_t> off(size.size() + 1, 0);
  for (std::size_t g = 0; g < size.size(); ++g) off[g + 1] = off[g] + size[g];
  return off;
}

}  // namespace

Parameters ParameterTying::expand(const StructurePtr& structure, std::span<const double> free) const {
  const auto off = group_offsets(*this, *structure);
  Parameters theta(structure);
  for (std::size_t c = 0; c < structure->num_cliques(); ++c) {
    auto blk = theta.block(c);
    const std::size_t o = off[static_cast<std::size_t>(group_of[c])];
    for (std::size_t i = 0; i < blk.size(); ++i) blk[i] = free[o + i];
  }
  return theta;
}

std::vector<double> project_to_simplex(std::span<const double> v, double total) {
  if (!(total > 0.0)) throw DomainError("simplex total must be positive");
  for (double x : v)
    if (!std::isfinite(x)) throw DomainError("cannot project a non-finite vector");
  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0, tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumulative += u[j];
    const double t = (cumulative - total) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  std::vector<double> w(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::max(v[i] - tau, 0.0);
  return w;
}

CliqueTableSet project_release(const PrivateRelease& release, double N) {
  if (!(N > 0.0)) throw DomainError("project_release: N must be positive");
  const ModelStructure& st = release.y.structure();
  CliqueTableSet out(release.y.structure_ptr(), TableRole::pseudo_marginal);
  for (std::size_t c = 0; c < st.num_cliques(); ++c) {
    std::vector<double> scaled(release.y.block(c).begin(), release.y.block(c).end());
    for (double& x : scaled) x /= N;
    const auto w = project_to_simplex(scaled, 1.0);
    std::copy(w.begin(), w.end(), out.block(c).begin());
  }
  return out;
}

FitResult fit_mle(const CliqueTableSet& stats, const InferenceEngine& engine, const FitConfig& cfg,
                  const FitOptions& options) {
  cfg.validate();
  const StructurePtr& sp = stats.structure_ptr();
  const ModelStructure& st = *sp;
  if (!(st == engine.structure())) throw StructuralError("fit_mle: statistics and engine structures differ");
  const double N = options.total ? *options.total : (st.num_cliques() ? stats.table_total(0) : 0.0);
  if (!(N > 0.0)) throw DomainError("fit_mle: total N must be positive");

  const ParameterTying tying = options.tying ? *options.tying : ParameterTying::none(st);
  tying.validate(st);
  const auto off = group_offsets(tying, st);
  const std::size_t dim = off.back();

  // Per-record statistics folded onto the free parameters.
  std::vector<double> target(dim, 0.0);
  for (std::size_t c = 0; c < st.num_cliques(); ++c) {
    const auto blk = stats.block(c);
    const std::size_t o = off[static_cast<std::size_t>(tying.group_of[c])];
    for (std::size_t i = 0; i < blk.size(); ++i) target[o + i] += blk[i] / N;
  }

  bool bp_failed = false;
  const Objective objective = [&](std::span<const double> x, std::span<double> grad) {
    const Parameters theta = tying.expand(sp, x);
    const BPResult r = engine.run(theta);
    if (!r.converged) bp_failed = true;
    double value = -r.log_partition;
    for (std::size_t i = 0; i < dim; ++i) {
      value += x[i] * (target[i] - cfg.lambda * x[i]);
      grad[i] = target[i] - 2.0 * cfg.lambda * x[i];
    }
    for (std::size_t c = 0; c < st.num_cliques(); ++c) {
      const auto mu = r.marginals.block(c);
      const std::size_t o = off[static_cast<std::size_t>(tying.group_of[c])];
      for (std::size_t i = 0; i < mu.size(); ++i) grad[o + i] -= mu[i];
    }
    return value;
  };

  std::vector<double> x0(dim, 0.0);
  if (options.warm_start) {
    // Read each group's block from its first clique.
    std::vector<bool> done(static_cast<std::size_t>(tying.num_groups()), false);
    for (std::size_t c = 0; c < st.num_cliques(); ++c) {
      const auto g = static_cast<std::size_t>(tying.group_of[c]);
      if (done[g]) continue;
      done[g] = true;
      const auto blk = options.warm_start->block(c);
      std::copy(blk.begin(), blk.end(), x0.begin() + static_cast<long>(off[g]));
    }
  }

  AscentOptions ao;
  ao.grad_tol = cfg.grad_tol;
  ao.max_iters = cfg.max_iters;
  const AscentResult a = cfg.optimizer == Optimizer::quasi_newton ? maximize_lbfgs(objective, x0, ao)
                                                                  : maximize_gradient(objective, x0, ao);
  FitResult out{tying.expand(sp, a.x), N * a.value, a.grad_norm, a.converged, a.iterations, {}};
  if (!a.converged) out.warnings.push_back("optimizer stopped before reaching grad_tol");
  if (bp_failed) out.warnings.push_back("loopy BP did not converge during fitting");
  return out;
}

}  // namespace dpgm
