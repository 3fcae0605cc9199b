#include <gtest/gtest.h>

#include <cmath>

#include "dpgm/cgm.hpp"
#include "dpgm/likelihood.hpp"
#include "dpgm/sampling.hpp"
#include "map_oracle.hpp"

using namespace dpgm;

namespace {

struct Instance {
  StructurePtr s;
  JunctionTree jt;
  Parameters theta;
  CliqueTableSet n;
  PrivateRelease release;
  double N;
};

Instance make_instance(std::uint64_t seed, int T, int card, double N, double eps) {
  Rng rng(seed);
  auto s = oracle::chain(T, card);
  JunctionTree jt = *build_junction_tree(*s);
  Parameters theta = oracle::random_theta(s, rng);
  CliqueTableSet n = sufficient_statistics(sample(oracle::random_theta(s, rng), static_cast<std::size_t>(N), jt, rng), s);
  PrivateRelease rel = perturb(n, PrivacyBudget(eps), rng.next_u64());
  return {s, jt, theta, n, rel, N};
}

CliqueTableSet scaled_marginals(const Parameters& theta, double N) {
  std::vector<double> mu = oracle::marginals(theta);
  for (double& v : mu) v *= N;
  return CliqueTableSet(theta.structure_ptr(), mu, TableRole::counts);
}

}  // namespace

TEST(NoiseGradient, SignOverScale) {
  auto s = make_structure(DomainSpec::uniform(1, 2), {{0}});
  CliqueTableSet y(s, {7, 1}, TableRole::noisy), n(s, {5, 4}, TableRole::counts);
  // b = 1 / 0.5 = 2
  EXPECT_EQ(noise_gradient(y, n, 0.5, 1.0), (std::vector<double>{0.5, -0.5}));
  CliqueTableSet same(s, {7, 1}, TableRole::counts);
  EXPECT_EQ(noise_gradient(y, same, 0.5, 1.0), (std::vector<double>{0.0, 0.0}));
}

TEST(NoiseGradient, ConstantMagnitudeOffTheKink) {
  Rng rng(1);
  auto s = oracle::chain(3, 3);
  CliqueTableSet y(s, TableRole::noisy), n(s, TableRole::counts);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = 10 * rng.uniform();
    n[i] = 10 * rng.uniform();
  }
  for (double g : noise_gradient(y, n, 0.3, 2.0)) EXPECT_NEAR(std::fabs(g), 0.15, 1e-15);
}

TEST(NoiseGradient, SmoothingIsLinearInsideTheRamp) {
  auto s = make_structure(DomainSpec::uniform(1, 2), {{0}});
  CliqueTableSet y(s, {1.0, 0.0}, TableRole::noisy), n(s, {0.5, 3.0}, TableRole::counts);
  auto g = noise_gradient(y, n, 1.0, 1.0, 2.0);
  EXPECT_NEAR(g[0], 0.25, 1e-15);
  EXPECT_NEAR(g[1], -1.0, 1e-15);
}

TEST(MapObjective, MatchesTermByTermReimplementation) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Instance I = make_instance(seed, 3, 3, 60, 0.7);
    oracle::MapProblem P{I.s, I.theta.raw(), I.release.y.raw(), I.release.noise_scale, I.N};
    // Any joint distribution gives a point of M_N.
    Rng rng(seed + 100);
    Parameters q = oracle::random_theta(I.s, rng);
    oracle::Joint j = oracle::joint(q);
    std::vector<double> n_oracle;
    const double ref = oracle::map_value(P, j.states, j.p, nullptr, &n_oracle);
    CliqueTableSet nq(I.s, n_oracle, TableRole::counts);
    EXPECT_NEAR(map_objective(nq, I.theta, I.release.y, 0.7, I.release.sensitivity, I.jt), ref, 1e-9 * std::fabs(ref));
  }
}

TEST(MapObjective, ConcaveAlongSegments) {
  Rng rng(7);
  Instance I = make_instance(7, 4, 3, 100, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    CliqueTableSet a = scaled_marginals(oracle::random_theta(I.s, rng, 2.0), I.N);
    CliqueTableSet b = scaled_marginals(oracle::random_theta(I.s, rng, 2.0), I.N);
    CliqueTableSet mid(I.s, TableRole::counts);
    for (std::size_t i = 0; i < mid.size(); ++i) mid[i] = 0.5 * (a[i] + b[i]);
    auto f = [&](const CliqueTableSet& n) { return map_objective(n, I.theta, I.release.y, 0.5, 3.0, I.jt); };
    EXPECT_GE(f(mid), 0.5 * (f(a) + f(b)) - 1e-9);
  }
}

TEST(MapObjective, RejectsPointsOutsideThePolytope) {
  Instance I = make_instance(8, 3, 2, 20, 1.0);
  CliqueTableSet bad = I.n;
  bad[0] += 1.0;
  EXPECT_THROW(map_objective(bad, I.theta, I.release.y, 1.0, 2.0, I.jt), DomainError);
  CliqueTableSet negative = I.n;
  negative[0] = -1.0;
  negative[1] += 1.0;
  EXPECT_THROW(map_objective(negative, I.theta, I.release.y, 1.0, 2.0, I.jt), DomainError);
}

TEST(Nlbp, MatchesIndependentSolver) {
  for (std::uint64_t seed = 11; seed <= 13; ++seed) {
    Instance I = make_instance(seed, 3, 3, 50, 0.8);
    auto engine = make_engine(I.s);
    NLBPResult r = nlbp(I.theta, I.release, I.N, {}, *engine);
    ASSERT_TRUE(r.converged);
    const double v = map_objective(r.n, I.theta, I.release.y, 0.8, I.release.sensitivity, I.jt);
    const auto sol = oracle::solve_map({I.s, I.theta.raw(), I.release.y.raw(), I.release.noise_scale, I.N}, 20000);
    EXPECT_LE(std::fabs(v - sol.value), 1e-3 * std::fabs(sol.value));
  }
}

TEST(Nlbp, OutputIsInThePolytope) {
  Instance I = make_instance(21, 5, 3, 200, 0.3);
  auto engine = make_engine(I.s);
  for (NLBPSolver solver : {NLBPSolver::dual, NLBPSolver::fixed_point}) {
    NLBPConfig cfg;
    cfg.solver = solver;
    NLBPResult r = nlbp(I.theta, I.release, I.N, cfg, *engine);
    EXPECT_LE(r.n.max_inconsistency(), 1e-6 * I.N);
    for (std::size_t c = 0; c < I.s->num_cliques(); ++c) EXPECT_NEAR(r.n.table_total(c), I.N, 1e-8 * I.N);
    for (double v : r.n.values()) EXPECT_GE(v, 0.0);
  }
}

TEST(Nlbp, KktResidualAtConvergence) {
  for (std::uint64_t seed = 31; seed <= 35; ++seed) {
    Instance I = make_instance(seed, 4, 3, 500, 0.5);
    auto engine = make_engine(I.s);
    NLBPConfig cfg;
    NLBPResult r = nlbp(I.theta, I.release, I.N, cfg, *engine);
    ASSERT_TRUE(r.converged);
    const double kink = 2 * cfg.smoothing_for(I.N, I.release.noise_scale);
    EXPECT_LE(nlbp_kkt_residual(I.theta, I.release, I.N, r, *engine, kink), 1e-4);
  }
}

TEST(Nlbp, SolversReachTheSameFixedPoint) {
  // The damped loop's own residual max |n' - n| stalls well above tol on
  // the steep ramp of the smoothed kink, but its iterate still lands on the
  // maximizer.
  Instance I = make_instance(41, 4, 2, 100, 1.0);
  auto engine = make_engine(I.s);
  NLBPConfig fp;
  fp.solver = NLBPSolver::fixed_point;
  fp.max_iters = 200000;
  NLBPConfig dual;
  dual.tol = 1e-9;
  NLBPResult a = nlbp(I.theta, I.release, I.N, fp, *engine);
  NLBPResult b = nlbp(I.theta, I.release, I.N, dual, *engine);
  ASSERT_TRUE(b.converged);
  EXPECT_LE(oracle::max_abs_diff(a.n.values(), b.n.values()), 1e-4 * I.N);
  EXPECT_NEAR(a.objective, b.objective, 1e-8 * std::fabs(b.objective));
}

TEST(Nlbp, DampedIterationNeverLowersTheObjective) {
  Instance I = make_instance(51, 4, 3, 200, 0.2);
  auto engine = make_engine(I.s);
  for (double alpha : {0.25, 0.5}) {
    NLBPConfig cfg;
    cfg.solver = NLBPSolver::fixed_point;
    cfg.alpha = alpha;
    cfg.max_iters = 300;
    NLBPResult r = nlbp(I.theta, I.release, I.N, cfg, *engine);
    ASSERT_GE(r.objective_trace.size(), 2u);
    for (std::size_t k = 1; k < r.objective_trace.size(); ++k)
      EXPECT_GE(r.objective_trace[k], r.objective_trace[k - 1] - 1e-9 * std::fabs(r.objective_trace[k - 1]));
  }
}

TEST(Nlbp, HugeEpsilonReturnsConsistentRelease) {
  Instance I = make_instance(61, 4, 3, 300, 1.0);
  auto engine = make_engine(I.s);
  PrivateRelease exact = perturb(I.n, PrivacyBudget(1e6), 1);
  NLBPResult r = nlbp(I.theta, exact, I.N, {}, *engine);
  // The smoothing ramp keeps a quadratic pull of strength 1e5 / N toward y.
  EXPECT_LE(oracle::max_abs_diff(r.n.values(), I.n.values()), 1e-4 * I.N);
}

TEST(Nlbp, WarmStartReachesTheSamePoint) {
  Instance I = make_instance(71, 4, 3, 300, 0.5);
  auto engine = make_engine(I.s);
  NLBPResult cold = nlbp(I.theta, I.release, I.N, {}, *engine);
  Parameters shifted = I.theta;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] *= 0.9;
  NLBPResult other = nlbp(shifted, I.release, I.N, {}, *engine);
  NLBPResult warm = nlbp(I.theta, I.release, I.N, {}, *engine, &other.regions);
  EXPECT_LE(oracle::max_abs_diff(cold.n.values(), warm.n.values()), 1e-3);
}

TEST(Nlbp, RejectsBadConfig) {
  NLBPConfig cfg;
  cfg.alpha = 0.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg.alpha = 0.5;
  cfg.smoothing = -1.0;
  EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(Em, NoiselessLimitMatchesNonPrivateFit) {
  Instance I = make_instance(81, 4, 3, 500, 1.0);
  auto engine = make_engine(I.s);
  PrivateRelease rel = perturb(I.n, PrivacyBudget(1e6), 5);
  EMResult em = em_fit(rel, I.N, *engine, {});
  FitResult mle = fit_mle(I.n, *engine, FitConfig{1e-6});
  EXPECT_LE(kl_divergence(mle.theta_hat, em.fit.theta_hat, *engine), 1e-4);
}

TEST(Em, DeterministicGivenTheRelease) {
  Instance I = make_instance(82, 4, 3, 300, 0.3);
  auto engine = make_engine(I.s);
  EMResult a = em_fit(I.release, I.N, *engine, {});
  EMResult b = em_fit(I.release, I.N, *engine, {});
  EXPECT_EQ(a.fit.theta_hat.raw(), b.fit.theta_hat.raw());
}

TEST(Em, CoordinateAscentNeverDecreases) {
  // With n_t the E-step point and theta_t the parameters it was computed
  // at, J_t = estep_objective - N A(theta_t) - N lambda ||theta_t||^2 is
  // the joint surrogate after each E-step; it cannot drop.
  Instance I = make_instance(83, 4, 3, 400, 0.2);
  auto engine = make_engine(I.s);
  EMConfig cfg;
  cfg.nlbp.tol = 1e-9;
  std::vector<double> J;
  Parameters theta(I.s);
  for (int t = 1; t <= 8; ++t) {
    cfg.max_em_iters = t;
    EMResult r = em_fit(I.release, I.N, *engine, cfg);
    double sq = 0.0;
    for (double v : theta.values()) sq += v * v;
    J.push_back(r.trace.back().estep_objective - I.N * log_partition(theta, I.jt) - I.N * cfg.fit.lambda * sq);
    theta = r.fit.theta_hat;
  }
  for (std::size_t k = 1; k < J.size(); ++k) EXPECT_GE(J[k], J[k - 1] - 1e-6 * I.N);
}

TEST(Em, ReportsNonConvergence) {
  Instance I = make_instance(84, 4, 3, 300, 0.1);
  auto engine = make_engine(I.s);
  EMConfig cfg;
  cfg.max_em_iters = 2;
  cfg.em_tol = 1e-12;
  EMResult r = em_fit(I.release, I.N, *engine, cfg);
  EXPECT_FALSE(r.fit.converged);
  EXPECT_EQ(r.fit.iterations, 2);
  EXPECT_FALSE(r.fit.warnings.empty());
}
