#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "dpgm/experiments.hpp"
#include "oracles.hpp"

using namespace dpgm;

namespace {

bool connected(const ModelStructure& s) {
  std::vector<int> label(s.num_vars());
  for (std::size_t v = 0; v < label.size(); ++v) label[v] = static_cast<int>(v);
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto [u, v] : s.graph_edges()) {
      const int m = std::min(label[u], label[v]);
      if (label[u] != m || label[v] != m) {
        label[u] = label[v] = m;
        changed = true;
      }
    }
  }
  return std::all_of(label.begin(), label.end(), [](int l) { return l == 0; });
}

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.T = 4;
  spec.cardinality = 3;
  spec.N_grid = {200};
  spec.epsilon_grid = {0.5};
  spec.num_populations = 2;
  spec.num_replicates = 2;
  spec.master_seed = 77;
  spec.estimators = {"naive", "naive-projected", "cgm", "nonprivate"};
  return spec;
}

}  // namespace

TEST(GenStructure, ChainEdgeCounts) {
  Rng rng(1);
  EXPECT_EQ(gen_structure(ModelKind::chain, 4, 2, 1, 0.0, rng)->num_cliques(), 3u);
  EXPECT_EQ(gen_structure(ModelKind::chain, 10, 2, 3, 0.0, rng)->num_cliques(), 24u);
}

TEST(GenStructure, ErdosRenyiIsConnected) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    auto s = gen_structure(ModelKind::er, 8, 2, 1, 0.2, rng);
    EXPECT_TRUE(connected(*s));
    for (const Scope& c : s->cliques()) EXPECT_EQ(c.size(), 2u);
  }
}

TEST(GenPotentials, DirichletTables) {
  Rng rng(3);
  auto s = oracle::chain(3, 3);
  Parameters theta = gen_potentials(s, rng);
  for (std::size_t c = 0; c < s->num_cliques(); ++c) {
    double z = 0.0;
    for (double v : theta.block(c)) z += std::exp(v);
    EXPECT_NEAR(z, 1.0, 1e-12);
  }
  Rng a(4), b(4);
  EXPECT_EQ(gen_potentials(s, a).raw(), gen_potentials(s, b).raw());
}

TEST(GenPotentials, CellMeansMatchFlatDirichlet) {
  Rng rng(5);
  auto s = make_structure(DomainSpec::uniform(2, 3), {{0, 1}});
  const int M = 10000;
  std::vector<double> sum(9, 0.0);
  for (int k = 0; k < M; ++k) {
    Parameters theta = gen_potentials(s, rng);
    for (std::size_t i = 0; i < 9; ++i) sum[i] += std::exp(theta[i]);
  }
  // Dirichlet(1) on 9 cells: mean 1/9, variance (1/9)(8/9)/10.
  const double se = std::sqrt((1.0 / 9) * (8.0 / 9) / 10 / M);
  for (double v : sum) EXPECT_NEAR(v / M, 1.0 / 9, 3 * se);
}

TEST(Spec, JsonRoundTripAndUnknownKeys) {
  ExperimentSpec spec = small_spec();
  spec.em.nlbp.solver = NLBPSolver::fixed_point;
  ExperimentSpec back = ExperimentSpec::from_json(spec.to_json());
  EXPECT_EQ(back.to_json().dump(), spec.to_json().dump());
  Json j = spec.to_json();
  j["typo"] = 1;
  EXPECT_THROW(ExperimentSpec::from_json(j), DomainError);
  Json bad = spec.to_json();
  bad["estimators"] = Json::array({"psgd"});
  EXPECT_THROW(ExperimentSpec::from_json(bad), DomainError);
}

TEST(RunGrid, ReproducibleAndNested) {
  ExperimentSpec spec = small_spec();
  GridResult a = run_grid(spec);
  spec.threads = 3;
  GridResult b = run_grid(spec);
  ASSERT_EQ(a.trials.size(), 2u * 2u * 4u);
  ASSERT_EQ(a.trials.size(), b.trials.size());
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    EXPECT_EQ(a.trials[i].value, b.trials[i].value);
    EXPECT_EQ(a.trials[i].estimator, b.trials[i].estimator);
  }
  EXPECT_EQ(a.failures(), 0u);
  // The non-private estimator sees only the population, so replicates of a
  // population agree while populations differ.
  std::map<int, std::set<double>> nonprivate;
  for (const auto& t : a.trials)
    if (t.estimator == "nonprivate") nonprivate[t.population].insert(t.value);
  ASSERT_EQ(nonprivate.size(), 2u);
  EXPECT_EQ(nonprivate[0].size(), 1u);
  EXPECT_EQ(nonprivate[1].size(), 1u);
  EXPECT_NE(*nonprivate[0].begin(), *nonprivate[1].begin());
}

TEST(RunGrid, NonPrivateImprovesWithN) {
  ExperimentSpec spec = small_spec();
  spec.N_grid = {100, 1000, 10000};
  spec.estimators = {"nonprivate"};
  spec.num_populations = 3;
  spec.num_replicates = 1;
  GridResult r = run_grid(spec);
  std::map<double, std::vector<double>> by_n;
  for (const auto& t : r.trials) by_n[t.N].push_back(t.value);
  EXPECT_GT(median(by_n[100]), median(by_n[1000]));
  EXPECT_GT(median(by_n[1000]), median(by_n[10000]));
}

TEST(RunGrid, ErWithoutTriangulationIsRejected) {
  ExperimentSpec spec = small_spec();
  spec.model_kind = ModelKind::er;
  spec.T = 6;
  spec.er_edge_prob = 0.6;
  spec.master_seed = 12;
  Model m = true_model(spec);
  if (!build_junction_tree(*m.structure)) {
    EXPECT_THROW(run_grid(spec), DomainError);
  }
}

TEST(Slope, RecoversPowerLaw) {
  std::vector<double> x{10, 100, 1000}, y;
  for (double v : x) y.push_back(3.0 / (v * v));
  EXPECT_NEAR(loglog_slope(x, y), -2.0, 1e-12);
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
}

TEST(Scatter, RowCountIsCellsPerEstimator) {
  Rng rng(6);
  auto s = oracle::chain(4, 3);
  auto engine = make_engine(s);
  Parameters truth = gen_potentials(s, rng);
  auto rows = scatter_dump(truth, {{"a", truth}, {"b", gen_potentials(s, rng)}}, *engine);
  EXPECT_EQ(rows.size(), 2u * 3u * 9u);
  for (const auto& r : rows) {
    if (r.estimator == "a") {
      EXPECT_NEAR(r.true_mu, r.fitted_mu, 1e-12);
    }
  }
}
