#include "dpgm/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <thread>

#include "dpgm/likelihood.hpp"
#include "dpgm/privacy.hpp"
#include "dpgm/sampling.hpp"

namespace dpgm {

const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::chain: return "chain";
    case ModelKind::er: return "er";
    case ModelKind::time_homogeneous: return "time-homogeneous-chain";
  }
  return "?";
}

const char* to_string(Metric metric) {
  switch (metric) {
    case Metric::kl: return "kl";
    case Metric::marginal_mse: return "marginal_mse";
    case Metric::holdout_ll: return "holdout_ll";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "chain" || s == "chain-order-k") return ModelKind::chain;
  if (s == "er") return ModelKind::er;
  if (s == "time-homogeneous-chain" || s == "time-homogeneous") return ModelKind::time_homogeneous;
  throw DomainError("unknown model kind '" + s + "'");
}

Metric metric_from_string(const std::string& s) {
  if (s == "kl") return Metric::kl;
  if (s == "marginal_mse" || s == "mse") return Metric::marginal_mse;
  if (s == "holdout_ll" || s == "holdout-ll") return Metric::holdout_ll;
  throw DomainError("unknown metric '" + s + "'");
}

bool is_estimator(const std::string& name) {
  return name == "naive" || name == "naive-projected" || name == "cgm" || name == "nonprivate" || name == "random";
}

void ExperimentSpec::validate() const {
  if (T < 2) throw DomainError("spec: T must be at least 2");
  if (cardinality < 2) throw DomainError("spec: cardinality must be at least 2");
  if (model_kind == ModelKind::chain && order < 1) throw DomainError("spec: chain order must be positive");
  if (model_kind == ModelKind::er && !(er_edge_prob > 0.0 && er_edge_prob <= 1.0))
    throw DomainError("spec: er_edge_prob must lie in (0, 1]");
  if (N_grid.empty() || epsilon_grid.empty()) throw DomainError("spec: grids must be non-empty");
  for (double N : N_grid)
    if (!(N >= 1.0) || N != std::floor(N)) throw DomainError("spec: N values must be positive integers");
  for (double e : epsilon_grid)
    if (!(e > 0.0)) throw DomainError("spec: epsilon values must be positive");
  if (num_populations < 1 || num_replicates < 1) throw DomainError("spec: need at least one population and replicate");
  if (estimators.empty()) throw DomainError("spec: no estimators");
  for (const auto& e : estimators)
    if (!is_estimator(e)) throw DomainError("spec: unknown estimator '" + e + "'");
  if (!(lambda >= 0.0)) throw DomainError("spec: lambda must be non-negative");
  if (!(holdout_size >= 1.0)) throw DomainError("spec: holdout_size must be positive");
  if (threads < 1) throw DomainError("spec: threads must be positive");
  em.validate();
  bp.validate();
  if (model_kind == ModelKind::time_homogeneous) mobility.validate();
}

namespace {

template <class T>
void read_field(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw DomainError(where + " must be an object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw DomainError(where + ": unknown field '" + item.key() + "'");
  }
}

}  // namespace

ExperimentSpec ExperimentSpec::from_json(const Json& j) {
  ExperimentSpec s;
  try {
    check_keys(j,
               {"name", "model_kind", "T", "cardinality", "order", "er_edge_prob", "triangulation", "N_grid",
                "epsilon_grid", "num_populations", "num_replicates", "master_seed", "estimators", "metric", "lambda",
                "holdout_size", "em", "bp", "mobility", "threads"},
               "spec");
    read_field(j, "name", s.name);
    if (j.contains("model_kind")) s.model_kind = model_kind_from_string(j.at("model_kind").get<std::string>());
    read_field(j, "T", s.T);
    read_field(j, "cardinality", s.cardinality);
    read_field(j, "order", s.order);
    read_field(j, "er_edge_prob", s.er_edge_prob);
    read_field(j, "triangulation", s.triangulation);
    read_field(j, "N_grid", s.N_grid);
    read_field(j, "epsilon_grid", s.epsilon_grid);
    read_field(j, "num_populations", s.num_populations);
    read_field(j, "num_replicates", s.num_replicates);
    read_field(j, "master_seed", s.master_seed);
    read_field(j, "estimators", s.estimators);
    if (j.contains("metric")) s.metric = metric_from_string(j.at("metric").get<std::string>());
    read_field(j, "lambda", s.lambda);
    read_field(j, "holdout_size", s.holdout_size);
    read_field(j, "threads", s.threads);
    if (j.contains("em")) {
      const Json& e = j.at("em");
      check_keys(e, {"max_iters", "tol", "lambda", "alpha", "nlbp_tol", "nlbp_max_iters", "solver", "smoothing"},
                 "spec.em");
      read_field(e, "max_iters", s.em.max_em_iters);
      read_field(e, "tol", s.em.em_tol);
      read_field(e, "lambda", s.em.fit.lambda);
      read_field(e, "alpha", s.em.nlbp.alpha);
      read_field(e, "nlbp_tol", s.em.nlbp.tol);
      read_field(e, "nlbp_max_iters", s.em.nlbp.max_iters);
      if (e.contains("smoothing")) s.em.nlbp.smoothing = e.at("smoothing").get<double>();
      if (e.contains("solver")) {
        const auto name = e.at("solver").get<std::string>();
        if (name == "dual") s.em.nlbp.solver = NLBPSolver::dual;
        else if (name == "fixed-point") s.em.nlbp.solver = NLBPSolver::fixed_point;
        else throw DomainError("spec.em: unknown solver '" + name + "'");
      }
    }
    if (j.contains("bp")) {
      const Json& b = j.at("bp");
      check_keys(b, {"damping", "tol", "max_iters"}, "spec.bp");
      read_field(b, "damping", s.bp.damping);
      read_field(b, "tol", s.bp.tol);
      read_field(b, "max_iters", s.bp.max_iters);
      s.em.nlbp.bp = s.bp;
    }
    if (j.contains("mobility")) {
      const Json& m = j.at("mobility");
      check_keys(m, {"num_locations", "days_per_user", "initial_presence", "arrive", "leave", "stay"}, "spec.mobility");
      read_field(m, "num_locations", s.mobility.num_locations);
      read_field(m, "days_per_user", s.mobility.days_per_user);
      read_field(m, "initial_presence", s.mobility.initial_presence);
      read_field(m, "arrive", s.mobility.arrive);
      read_field(m, "leave", s.mobility.leave);
      read_field(m, "stay", s.mobility.stay);
    }
  } catch (const Json::exception& e) {
    throw DomainError(std::string("spec: ") + e.what());
  }
  s.validate();
  return s;
}

Json ExperimentSpec::to_json() const {
  Json j;
  j["name"] = name;
  j["model_kind"] = dpgm::to_string(model_kind);
  j["T"] = T;
  j["cardinality"] = cardinality;
  j["order"] = order;
  j["er_edge_prob"] = er_edge_prob;
  j["triangulation"] = triangulation;
  j["N_grid"] = N_grid;
  j["epsilon_grid"] = epsilon_grid;
  j["num_populations"] = num_populations;
  j["num_replicates"] = num_replicates;
  j["master_seed"] = master_seed;
  j["estimators"] = estimators;
  j["metric"] = dpgm::to_string(metric);
  j["lambda"] = lambda;
  j["holdout_size"] = holdout_size;
  j["em"] = {{"max_iters", em.max_em_iters},
             {"tol", em.em_tol},
             {"lambda", em.fit.lambda},
             {"alpha", em.nlbp.alpha},
             {"nlbp_tol", em.nlbp.tol},
             {"nlbp_max_iters", em.nlbp.max_iters},
             {"solver", em.nlbp.solver == NLBPSolver::dual ? "dual" : "fixed-point"}};
  if (em.nlbp.smoothing) j["em"]["smoothing"] = *em.nlbp.smoothing;
  j["bp"] = {{"damping", bp.damping}, {"tol", bp.tol}, {"max_iters", bp.max_iters}};
  if (model_kind == ModelKind::time_homogeneous)
    j["mobility"] = {{"num_locations", mobility.num_locations},
                     {"days_per_user", mobility.days_per_user},
                     {"initial_presence", mobility.initial_presence},
                     {"arrive", mobility.arrive},
                     {"leave", mobility.leave},
                     {"stay", mobility.stay}};
  j["threads"] = threads;
  return j;
}

namespace {

bool connected(int T, const std::vector<Scope>& edges) {
  std::vector<int> parent(static_cast<std::size_t>(T));
  for (int i = 0; i < T; ++i) parent[static_cast<std::size_t>(i)] = i;
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  int parts = T;
  for (const auto& e : edges) {
    const int a = find(e[0]), b = find(e[1]);
    if (a != b) {
      parent[static_cast<std::size_t>(a)] = b;
      --parts;
    }
  }
  return parts == 1;
}

}  // namespace

StructurePtr gen_structure(ModelKind kind, int T, int cardinality, int order, double edge_prob, Rng& rng) {
  if (T < 2) throw DomainError("gen_structure: T must be at least 2");
  std::vector<Scope> edges;
  switch (kind) {
    case ModelKind::chain:
      if (order < 1) throw DomainError("gen_structure: order must be positive");
      for (int i = 0; i < T; ++i)
        for (int j = i + 1; j < T && j - i <= order; ++j) edges.push_back({i, j});
      break;
    case ModelKind::er:
      if (!(edge_prob > 0.0 && edge_prob <= 1.0)) throw DomainError("gen_structure: edge probability out of range");
      do {
        edges.clear();
        for (int i = 0; i < T; ++i)
          for (int j = i + 1; j < T; ++j)
            if (rng.uniform() < edge_prob) edges.push_back({i, j});
      } while (!connected(T, edges));
      break;
    case ModelKind::time_homogeneous:
      return time_homogeneous_structure(T, cardinality);
  }
  return make_structure(DomainSpec::uniform(static_cast<std::size_t>(T), cardinality), std::move(edges));
}

Parameters gen_potentials(const StructurePtr& structure, Rng& rng) {
  Parameters theta(structure);
  for (std::size_t c = 0; c < structure->num_cliques(); ++c) {
    auto blk = theta.block(c);
    const auto p = rng.flat_dirichlet(blk.size());
    // A zero draw has probability ~2^-53; keep the log finite regardless.
    for (std::size_t i = 0; i < blk.size(); ++i) blk[i] = std::log(std::max(p[i], 1e-300));
  }
  return theta;
}

std::size_t GridResult::failures() const {
  return static_cast<std::size_t>(std::count_if(trials.begin(), trials.end(), [](const TrialResult& t) { return t.status != "ok"; }));
}

Model true_model(const ExperimentSpec& spec) {
  Rng rng(derive_seed(spec.master_seed, {0}));
  StructurePtr st = gen_structure(spec.model_kind, spec.T, spec.cardinality, spec.order, spec.er_edge_prob, rng);
  Parameters theta = gen_potentials(st, rng);
  return {st, std::move(theta)};
}

std::optional<JunctionTree> exact_tree(const ExperimentSpec& spec, const ModelStructure& structure) {
  if (!spec.triangulation.empty()) return junction_tree_from_cliques(structure, spec.triangulation);
  return build_junction_tree(structure);
}

FitResult fit_estimator(const std::string& estimator, const CliqueTableSet& stats, const PrivateRelease& release,
                        double N, const InferenceEngine& engine, const ExperimentSpec& spec, std::uint64_t seed,
                        const ParameterTying* tying) {
  FitConfig fc;
  fc.lambda = spec.lambda;
  FitOptions opts;
  opts.tying = tying;
  if (estimator == "nonprivate") {
    opts.total = N;
    return fit_mle(stats, engine, fc, opts);
  }
  if (estimator == "naive") {
    opts.total = N;
    return fit_mle(release.y, engine, fc, opts);
  }
  if (estimator == "naive-projected") {
    opts.total = 1.0;
    return fit_mle(project_release(release, N), engine, fc, opts);
  }
  if (estimator == "cgm") return em_fit(release, N, engine, spec.em, tying).fit;
  if (estimator == "random") {
    Rng rng(seed);
    const Parameters theta_r = gen_potentials(engine.structure_ptr(), rng);
    BPResult r = engine.run(theta_r);
    opts.total = 1.0;
    return fit_mle(r.marginals, engine, fc, opts);
  }
  throw DomainError("unknown estimator '" + estimator + "'");
}

namespace {

double metric_value(Metric metric, const Parameters* theta_true, const BPResult* true_marginals,
                    const Parameters& fitted, const InferenceEngine& engine, const Dataset* holdout) {
  switch (metric) {
    case Metric::kl: return kl_divergence(*theta_true, fitted, engine);
    case Metric::marginal_mse: {
      const BPResult r = engine.run(fitted);
      double s = 0.0;
      for (std::size_t i = 0; i < fitted.size(); ++i) {
        const double d = r.marginals[i] - true_marginals->marginals[i];
        s += d * d;
      }
      return s / static_cast<double>(fitted.size());
    }
    case Metric::holdout_ll: return mean_log_likelihood(*holdout, fitted, engine.run(fitted).log_partition);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Runs f(i) for i in [0, n) on `threads` workers.
template <class F>
void parallel_for(std::size_t n, int threads, F f) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  for (auto& th : pool) th.join();
}

struct Population {
  CliqueTableSet stats;
  Dataset holdout{0};
};

struct Unit {
  std::size_t n_idx, e_idx;
  int pop, rep;
};

void run_unit(const ExperimentSpec& spec, const Unit& u, const Parameters* theta_true, const BPResult* true_marginals,
              const Population& population, const InferenceEngine& engine, const ParameterTying* tying,
              std::vector<TrialResult>& out) {
  const double N = spec.N_grid[u.n_idx];
  const double eps = spec.epsilon_grid[u.e_idx];
  const std::uint64_t noise_seed = derive_seed(spec.master_seed, {2, u.n_idx, u.e_idx, static_cast<std::uint64_t>(u.pop),
                                                                  static_cast<std::uint64_t>(u.rep)});
  const PrivateRelease release = perturb(population.stats, PrivacyBudget(eps), noise_seed);
  for (std::size_t k = 0; k < spec.estimators.size(); ++k) {
    TrialResult r{N, eps, u.pop, u.rep, spec.estimators[k]};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const std::uint64_t seed = derive_seed(spec.master_seed, {3, u.n_idx, u.e_idx, static_cast<std::uint64_t>(u.pop),
                                                                static_cast<std::uint64_t>(u.rep), k});
      const FitResult fit = fit_estimator(r.estimator, population.stats, release, N, engine, spec, seed, tying);
      r.converged = fit.converged;
      r.value = metric_value(spec.metric, theta_true, true_marginals, fit.theta_hat, engine, &population.holdout);
      if (!std::isfinite(r.value)) throw std::runtime_error("metric is not finite");
    } catch (const std::exception& e) {
      r.value = std::numeric_limits<double>::quiet_NaN();
      r.converged = false;
      r.status = e.what();
    }
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
}

}  // namespace

GridResult run_grid(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.model_kind == ModelKind::time_homogeneous) return mobility_experiment(spec);
  const Model truth = true_model(spec);
  const std::optional<JunctionTree> tree = exact_tree(spec, *truth.structure);
  if (!tree)
    throw DomainError("spec: sampling from a non-decomposable structure needs a triangulation in the spec");
  const auto engine = make_engine(truth.structure, tree, spec.bp);
  const BPResult true_marginals = engine->run(truth.theta);

  // Populations are shared by every epsilon and replicate at the same N.
  std::vector<std::vector<Population>> pops(spec.N_grid.size());
  for (std::size_t n = 0; n < spec.N_grid.size(); ++n) {
    for (int p = 0; p < spec.num_populations; ++p) {
      Rng rng(derive_seed(spec.master_seed, {1, n, static_cast<std::uint64_t>(p)}));
      const Dataset data = sample(truth.theta, static_cast<std::size_t>(spec.N_grid[n]), *tree, rng);
      Population pop{sufficient_statistics(data, truth.structure)};
      if (spec.metric == Metric::holdout_ll) {
        Rng hr(derive_seed(spec.master_seed, {4, n, static_cast<std::uint64_t>(p)}));
        pop.holdout = sample(truth.theta, static_cast<std::size_t>(spec.holdout_size), *tree, hr);
      }
      pops[n].push_back(std::move(pop));
    }
  }

  std::vector<Unit> units;
  for (std::size_t n = 0; n < spec.N_grid.size(); ++n)
    for (std::size_t e = 0; e < spec.epsilon_grid.size(); ++e)
      for (int p = 0; p < spec.num_populations; ++p)
        for (int r = 0; r < spec.num_replicates; ++r) units.push_back({n, e, p, r});

  std::vector<std::vector<TrialResult>> results(units.size());
  parallel_for(units.size(), spec.threads, [&](std::size_t i) {
    const Unit& u = units[i];
    run_unit(spec, u, &truth.theta, &true_marginals, pops[u.n_idx][static_cast<std::size_t>(u.pop)], *engine, nullptr,
             results[i]);
  });
  GridResult out{spec, {}};
  for (auto& r : results)
    for (auto& t : r) out.trials.push_back(std::move(t));
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("slope needs at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

MseResult marginal_mse_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const Model truth = true_model(spec);
  const std::optional<JunctionTree> tree = exact_tree(spec, *truth.structure);
  if (!tree) throw DomainError("marginal_mse_experiment needs a decomposable or triangulated structure");
  const CliqueTableSet mu = sum_product_exact(truth.theta, *tree).marginals;
  const std::size_t num_cliques = truth.structure->num_cliques();
  const int trials = spec.num_populations * spec.num_replicates;
  const JunctionTreeSampler sampler(truth.theta, *tree);

  MseResult out;
  std::vector<std::vector<double>> mse_by_eps(spec.epsilon_grid.size());
  for (std::size_t n = 0; n < spec.N_grid.size(); ++n) {
    const double N = spec.N_grid[n];
    // per_trial[e][t]: cell-averaged squared error of trial t at epsilon e.
    std::vector<std::vector<double>> per_trial(spec.epsilon_grid.size(), std::vector<double>(static_cast<std::size_t>(trials)));
    parallel_for(static_cast<std::size_t>(trials), spec.threads, [&](std::size_t t) {
      Rng rng(derive_seed(spec.master_seed, {5, n, t}));
      const CliqueTableSet stats = sufficient_statistics(sampler.sample(static_cast<std::size_t>(N), rng), truth.structure);
      for (std::size_t e = 0; e < spec.epsilon_grid.size(); ++e) {
        const PrivateRelease rel = perturb(stats, PrivacyBudget(spec.epsilon_grid[e]), derive_seed(spec.master_seed, {6, n, e, t}));
        double s = 0.0;
        for (std::size_t i = 0; i < mu.size(); ++i) {
          const double d = rel.y[i] / N - mu[i];
          s += d * d;
        }
        per_trial[e][t] = s / static_cast<double>(mu.size());
      }
    });
    for (std::size_t e = 0; e < spec.epsilon_grid.size(); ++e) {
      const auto& v = per_trial[e];
      double mean = 0.0, var = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      for (double x : v) var += (x - mean) * (x - mean);
      var /= std::max<double>(1.0, static_cast<double>(v.size()) - 1.0);
      double predicted = 0.0;
      for (std::size_t i = 0; i < mu.size(); ++i) predicted += predicted_mse(mu[i], N, num_cliques, spec.epsilon_grid[e]);
      predicted /= static_cast<double>(mu.size());
      out.rows.push_back({N, spec.epsilon_grid[e], mean, std::sqrt(var / static_cast<double>(v.size())), predicted});
      mse_by_eps[e].push_back(mean);
    }
  }
  if (spec.N_grid.size() >= 2)
    for (std::size_t e = 0; e < spec.epsilon_grid.size(); ++e)
      out.slopes.emplace_back(spec.epsilon_grid[e], loglog_slope(spec.N_grid, mse_by_eps[e]));
  std::sort(out.rows.begin(), out.rows.end(), [](const MseRow& a, const MseRow& b) {
    return a.epsilon != b.epsilon ? a.epsilon < b.epsilon : a.N < b.N;
  });
  return out;
}

std::vector<SweepRow> lambda_sweep(const ExperimentSpec& spec, const std::vector<double>& lambdas) {
  spec.validate();
  if (lambdas.empty()) throw DomainError("lambda_sweep: empty grid");
  const Model truth = true_model(spec);
  const std::optional<JunctionTree> tree = exact_tree(spec, *truth.structure);
  if (!tree) throw DomainError("lambda_sweep needs a decomposable or triangulated structure");
  const auto engine = make_engine(truth.structure, tree, spec.bp);
  const double N = spec.N_grid.front(), eps = spec.epsilon_grid.front();
  const int trials = spec.num_populations * spec.num_replicates;

  // kl[l][0 = noisy, 1 = true][trial]
  std::vector<std::array<std::vector<double>, 2>> kl(lambdas.size());
  for (auto& k : kl) k = {std::vector<double>(static_cast<std::size_t>(trials)), std::vector<double>(static_cast<std::size_t>(trials))};
  std::vector<CliqueTableSet> stats;
  for (int p = 0; p < spec.num_populations; ++p) {
    Rng rng(derive_seed(spec.master_seed, {1, 0, static_cast<std::uint64_t>(p)}));
    stats.push_back(sufficient_statistics(sample(truth.theta, static_cast<std::size_t>(N), *tree, rng), truth.structure));
  }
  parallel_for(static_cast<std::size_t>(trials), spec.threads, [&](std::size_t t) {
    const std::size_t p = t / static_cast<std::size_t>(spec.num_replicates), r = t % static_cast<std::size_t>(spec.num_replicates);
    const PrivateRelease rel = perturb(stats[p], PrivacyBudget(eps), derive_seed(spec.master_seed, {2, 0, 0, p, r}));
    const CliqueTableSet projected = project_release(rel, N);
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      FitConfig fc;
      fc.lambda = lambdas[l];
      FitOptions unit_total;
      unit_total.total = 1.0;
      kl[l][0][t] = kl_divergence(truth.theta, fit_mle(projected, *engine, fc, unit_total).theta_hat, *engine);
      FitOptions counts_total;
      counts_total.total = N;
      kl[l][1][t] = kl_divergence(truth.theta, fit_mle(stats[p], *engine, fc, counts_total).theta_hat, *engine);
    }
  });
  std::vector<SweepRow> rows;
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t l = 0; l < lambdas.size(); ++l) rows.push_back({lambdas[l], c == 0 ? "noisy" : "true", median(kl[l][c])});
  return rows;
}

std::vector<ScatterRow> scatter_dump(const Parameters& theta_true,
                                     const std::vector<std::pair<std::string, Parameters>>& fits,
                                     const InferenceEngine& engine) {
  const CliqueTableSet mu = engine.run(theta_true).marginals;
  const ModelStructure& st = theta_true.structure();
  std::vector<ScatterRow> rows;
  for (const auto& [name, theta] : fits) {
    const CliqueTableSet fitted = engine.run(theta).marginals;
    for (std::size_t c = 0; c < st.num_cliques(); ++c) {
      if (st.clique(c).size() != 2) continue;
      for (std::size_t k = 0; k < st.table_size(c); ++k)
        rows.push_back({name, st.clique_key(c), k, mu.block(c)[k], fitted.block(c)[k]});
    }
  }
  return rows;
}

GridResult mobility_experiment(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.metric != Metric::holdout_ll) throw DomainError("mobility experiments report holdout_ll only");
  GridResult out{spec, {}};
  struct Prepared {
    StructurePtr structure;
    std::unique_ptr<InferenceEngine> engine;
    ParameterTying tying;
    Population population;
    double N;
  };

  for (std::size_t n = 0; n < spec.N_grid.size(); ++n) {
    std::vector<Prepared> prepared;
    for (int p = 0; p < spec.num_populations; ++p) {
      MobilityConfig mc = spec.mobility;
      mc.num_users = static_cast<int>(spec.N_grid[n]);
      mc.seed = derive_seed(spec.master_seed, {7, n, static_cast<std::uint64_t>(p)});
      const MobilityChain chain = planted_chain(mc);
      const MobilityData md = mobility_ingest(generate_mobility(mc, chain), mc.num_locations);

      // Hold out a quarter of the users.
      std::vector<int> order(md.user_ids.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      Rng rng(derive_seed(spec.master_seed, {8, n, static_cast<std::uint64_t>(p)}));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
      std::vector<bool> is_test(order.size(), false);
      for (std::size_t i = 0; i < order.size() / 4; ++i) is_test[static_cast<std::size_t>(order[i])] = true;
      Dataset train(static_cast<std::size_t>(md.segment_length)), test(static_cast<std::size_t>(md.segment_length));
      for (std::size_t i = 0; i < md.data.size(); ++i)
        (is_test[static_cast<std::size_t>(md.individual[i])] ? test : train).add(md.data.record(i), md.data.weight(i));

      StructurePtr st = time_homogeneous_structure(md.segment_length, mc.num_locations + 1);
      auto engine = make_engine(st, std::nullopt, spec.bp);
      ParameterTying tying = time_homogeneous_tying(*st);
      Population pop{sufficient_statistics(train, st), std::move(test)};
      prepared.push_back({st, std::move(engine), std::move(tying), std::move(pop), train.total_weight()});
    }

    std::vector<Unit> units;
    for (std::size_t e = 0; e < spec.epsilon_grid.size(); ++e)
      for (int p = 0; p < spec.num_populations; ++p)
        for (int r = 0; r < spec.num_replicates; ++r) units.push_back({n, e, p, r});
    std::vector<std::vector<TrialResult>> results(units.size());
    parallel_for(units.size(), spec.threads, [&](std::size_t i) {
      const Unit& u = units[i];
      const Prepared& pr = prepared[static_cast<std::size_t>(u.pop)];
      ExperimentSpec local = spec;
      local.N_grid[u.n_idx] = pr.N;
      run_unit(local, u, nullptr, nullptr, pr.population, *pr.engine, &pr.tying, results[i]);
      for (auto& t : results[i]) t.N = spec.N_grid[n];
    });
    for (auto& r : results)
      for (auto& t : r) out.trials.push_back(std::move(t));
  }
  return out;
}

namespace {

std::string csv_safe(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ';';
  return s;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

void write_trials_csv(const std::filesystem::path& path, const GridResult& result) {
  auto out = open_out(path);
  const ExperimentSpec& s = result.spec;
  out << "experiment,model,T,cardinality,N,epsilon,population,replicate,estimator,metric,value,converged,status\n";
  for (const auto& t : result.trials)
    out << csv_safe(s.name) << ',' << to_string(s.model_kind) << ',' << s.T << ',' << s.cardinality << ','
        << format_double(t.N) << ',' << format_double(t.epsilon) << ',' << t.population << ',' << t.replicate << ','
        << t.estimator << ',' << to_string(s.metric) << ',' << format_double(t.value) << ',' << (t.converged ? 1 : 0)
        << ',' << csv_safe(t.status) << '\n';
}

void write_timing_csv(const std::filesystem::path& path, const GridResult& result) {
  auto out = open_out(path);
  out << "N,epsilon,population,replicate,estimator,wall_time\n";
  for (const auto& t : result.trials)
    out << format_double(t.N) << ',' << format_double(t.epsilon) << ',' << t.population << ',' << t.replicate << ','
        << t.estimator << ',' << format_double(t.wall_time) << '\n';
}

void write_mse_csv(const std::filesystem::path& path, const MseResult& result) {
  auto out = open_out(path);
  out << "quantity,N,epsilon,value,std_error,predicted\n";
  for (const auto& r : result.rows)
    out << "mse," << format_double(r.N) << ',' << format_double(r.epsilon) << ',' << format_double(r.mse) << ','
        << format_double(r.std_error) << ',' << format_double(r.predicted) << '\n';
  for (const auto& [eps, slope] : result.slopes)
    out << "slope,," << format_double(eps) << ',' << format_double(slope) << ",,\n";
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  auto out = open_out(path);
  out << "lambda,curve,median_kl\n";
  for (const auto& r : rows) out << format_double(r.lambda) << ',' << r.curve << ',' << format_double(r.median_kl) << '\n';
}

void write_scatter_csv(const std::filesystem::path& path, const std::vector<ScatterRow>& rows) {
  auto out = open_out(path);
  out << "estimator,edge,config,true_mu,fitted_mu\n";
  for (const auto& r : rows)
    out << r.estimator << ',' << r.edge << ',' << r.config << ',' << format_double(r.true_mu) << ','
        << format_double(r.fitted_mu) << '\n';
}

}  // namespace dpgm
