#include <gtest/gtest.h>

#include <cmath>

#include "dpgm/privacy.hpp"
#include "dpgm/sampling.hpp"
#include "oracles.hpp"

using namespace dpgm;

TEST(Sensitivity, NumberOfCliques) {
  EXPECT_EQ(sensitivity(*make_structure(DomainSpec::uniform(2, 2), {{0, 1}})), 1.0);
  EXPECT_EQ(sensitivity(*oracle::chain(10, 2, 3)), 24.0);
  EXPECT_EQ(sensitivity(*oracle::chain(10, 2, 3), 0.5), 12.0);
  EXPECT_THROW(sensitivity(*oracle::chain(3, 2), 0.0), DomainError);
}

TEST(Sensitivity, NeighborsDifferByExactlyC) {
  Rng rng(1);
  for (auto s : {oracle::chain(5, 3), oracle::chain(6, 2, 3)}) {
    const double c = static_cast<double>(s->num_cliques());
    Dataset base = sample(oracle::random_theta(s, rng), 200, *build_junction_tree(*s), rng);
    const std::vector<double> n0 = sufficient_statistics(base, s).raw();
    for (int pair = 0; pair < 100; ++pair) {
      std::vector<int> extra(s->num_vars());
      for (std::size_t v = 0; v < extra.size(); ++v) extra[v] = static_cast<int>(rng.below(s->domain().cardinality(v)));
      Dataset neighbor = base;
      neighbor.add(extra);
      const std::vector<double> n1 = sufficient_statistics(neighbor, s).raw();
      double l1 = 0.0;
      for (std::size_t i = 0; i < n0.size(); ++i) l1 += std::fabs(n1[i] - n0[i]);
      EXPECT_EQ(l1, c);
    }
  }
}

TEST(Laplace, MomentsAndDeterminism) {
  Rng rng(2);
  const int M = 1000000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < M; ++i) {
    const double z = laplace_sample(1.0, rng);
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / M, 0.0, 0.005);
  EXPECT_NEAR(sq / M, 2.0, 0.02);
  Rng a(9), b(9);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(laplace_sample(3.0, a), laplace_sample(3.0, b));
}

TEST(Perturb, HugeEpsilonLeavesCountsAlone) {
  auto s = oracle::chain(3, 2);
  CliqueTableSet n(s, {1, 2, 3, 4, 3, 2, 3, 2}, TableRole::counts);
  PrivateRelease r = perturb(n, PrivacyBudget(1e15), 4);
  for (std::size_t i = 0; i < n.size(); ++i) EXPECT_NEAR(r.y[i], n[i], 1e-12);
  EXPECT_EQ(r.y.role(), TableRole::noisy);
}

TEST(Perturb, ReplaysFromSeed) {
  auto s = oracle::chain(3, 2);
  CliqueTableSet n(s, {1, 2, 3, 4, 3, 2, 3, 2}, TableRole::counts);
  EXPECT_EQ(perturb(n, PrivacyBudget(0.5), 17).y.raw(), perturb(n, PrivacyBudget(0.5), 17).y.raw());
  EXPECT_NE(perturb(n, PrivacyBudget(0.5), 17).y.raw(), perturb(n, PrivacyBudget(0.5), 18).y.raw());
}

TEST(Perturb, UnbiasedWithLaplaceVariance) {
  auto s = make_structure(DomainSpec::uniform(2, 2), {{0, 1}});
  CliqueTableSet n(s, {5, 0, 2, 3}, TableRole::counts);
  const int R = 10000;
  std::vector<double> sum(4, 0.0), sq(4, 0.0);
  for (int r = 0; r < R; ++r) {
    PrivateRelease rel = perturb(n, PrivacyBudget(1.0), derive_seed(5, {static_cast<std::uint64_t>(r)}));
    for (std::size_t i = 0; i < 4; ++i) {
      const double z = rel.y[i] - n[i];
      sum[i] += z;
      sq[i] += z * z;
    }
  }
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(sum[i] / R, 0.0, 3 * std::sqrt(2.0 / R));
    // Var of z^2 for Laplace(1) is 24 - 4 = 20.
    EXPECT_NEAR(sq[i] / R, 2.0, 3 * std::sqrt(20.0 / R));
  }
}

TEST(Perturb, RejectsNonPositiveEpsilon) {
  EXPECT_THROW(PrivacyBudget(0.0), DomainError);
  EXPECT_THROW(PrivacyBudget(-1.0), DomainError);
}

TEST(PredictedMse, PluggedValues) {
  EXPECT_NEAR(predicted_mse(0.5, 100, 1, 1.0), 0.0027, 1e-15);
  EXPECT_EQ(predicted_mse(0.0, 100, 3, INFINITY), 0.0);
  EXPECT_EQ(predicted_mse(1.0, 100, 3, INFINITY), 0.0);
}

TEST(PredictedMse, CrossoverWhereTermsAreEqual) {
  const double N = 2.0 * 81 / (0.01 * 0.25);
  EXPECT_NEAR(N, 64800.0, 1e-9);
  const double sampling = predicted_mse(0.5, N, 9, INFINITY);
  EXPECT_NEAR(predicted_mse(0.5, N, 9, 0.1), 2 * sampling, 1e-15);
}

TEST(WeightCap, FlagsHeavyRecords) {
  Dataset d(1);
  d.add(std::vector<int>{0}, 0.5);
  EXPECT_NO_THROW(check_weight_cap(d, 0.5));
  EXPECT_THROW(check_weight_cap(d, 0.25), DomainError);
}
