#include <gtest/gtest.h>

#include <cmath>

#include "dpgm/model.hpp"
#include "oracles.hpp"

using namespace dpgm;

TEST(ConfigIndex, RowMajorOverClique) {
  DomainSpec d = DomainSpec::uniform(3, 3);
  Scope c{0, 1};
  EXPECT_EQ(config_index(c, d, std::vector<int>{0, 0}), 0u);
  EXPECT_EQ(config_index(c, d, std::vector<int>{2, 2}), 8u);
  EXPECT_EQ(config_index(c, d, std::vector<int>{1, 2}), 5u);
}

TEST(ConfigIndex, RoundTripsMixedCardinalities) {
  DomainSpec d{{2, 3, 4}};
  Scope c{0, 1, 2};
  for (std::size_t i = 0; i < scope_size(c, d); ++i) EXPECT_EQ(config_index(c, d, config_assignment(c, d, i)), i);
}

TEST(ConfigIndex, RejectsOutOfRange) {
  DomainSpec d = DomainSpec::uniform(2, 2);
  EXPECT_THROW(config_index({0, 1}, d, std::vector<int>{0, 2}), DomainError);
  EXPECT_THROW(config_index({0, 1}, d, std::vector<int>{0}), DomainError);
}

TEST(Structure, RejectsBadCliques) {
  DomainSpec d = DomainSpec::uniform(3, 2);
  EXPECT_ANY_THROW(make_structure(d, {{1, 0}}));
  EXPECT_ANY_THROW(make_structure(d, {{0, 0}}));
  EXPECT_ANY_THROW(make_structure(d, {{0, 3}}));
  EXPECT_ANY_THROW(make_structure(d, {{}}));
}

TEST(Structure, OffsetsAndKeys) {
  auto s = make_structure(DomainSpec{{2, 3, 4}}, {{0, 1}, {1, 2}});
  EXPECT_EQ(s->offset(1), 6u);
  EXPECT_EQ(s->dimension(), 18u);
  EXPECT_EQ(s->clique_key(1), "1-2");
}

TEST(SufficientStatistics, CountsRecords) {
  auto s = make_structure(DomainSpec::uniform(2, 2), {{0, 1}});
  Dataset data(2);
  data.add(std::vector<int>{0, 0});
  data.add(std::vector<int>{0, 1});
  CliqueTableSet n = sufficient_statistics(data, s);
  EXPECT_EQ(n.raw(), (std::vector<double>{1, 1, 0, 0}));
}

TEST(SufficientStatistics, EmptyDatasetIsZero) {
  auto s = oracle::chain(3, 2);
  CliqueTableSet n = sufficient_statistics(Dataset(3), s);
  for (double v : n.values()) EXPECT_EQ(v, 0.0);
}

TEST(SufficientStatistics, WeightedRecordSpreadsItsWeight) {
  auto s = make_structure(DomainSpec::uniform(3, 2), {{0}, {0, 1}, {1, 2}});
  Dataset data(3);
  data.add(std::vector<int>{1, 0, 1}, 1.0 / 3.0);
  CliqueTableSet n = sufficient_statistics(data, s);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(n.table_total(c), 1.0 / 3.0);
}

TEST(LogDensity, UniformModel) {
  auto s = make_structure(DomainSpec::uniform(2, 2), {{0, 1}});
  Parameters theta(s);
  for (auto& x : oracle::joint_states(s->domain())) EXPECT_NEAR(log_density(x, theta, std::log(4.0)), -std::log(4.0), 1e-15);
}

TEST(LogDensity, NormalizedPotentials) {
  auto s = make_structure(DomainSpec::uniform(2, 2), {{0, 1}});
  Parameters theta(s, {std::log(1.0), std::log(2.0), std::log(3.0), std::log(4.0)});
  auto states = oracle::joint_states(s->domain());
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(std::exp(log_density(states[i], theta, std::log(10.0))), 0.1 * (i + 1), 1e-12);
}

TEST(Tables, ConsistencyDetectsDisagreement) {
  auto s = oracle::chain(3, 2);
  CliqueTableSet n(s, {1, 1, 1, 1, 1, 1, 1, 1}, TableRole::counts);
  EXPECT_NEAR(n.max_inconsistency(), 0.0, 1e-15);
  EXPECT_NO_THROW(n.validate());
  n[4] = 2;
  n[6] = 0;
  EXPECT_GT(n.max_inconsistency(), 0.5);
  EXPECT_THROW(n.validate(), DomainError);
}

TEST(Tables, RoleNamesRoundTrip) {
  for (TableRole r : {TableRole::counts, TableRole::noisy, TableRole::pseudo_marginal, TableRole::marginal})
    EXPECT_EQ(table_role_from_string(to_string(r)), r);
}

TEST(Parameters, RejectNonFinite) {
  auto s = oracle::chain(2, 2);
  Parameters theta(s);
  theta[1] = std::nan("");
  EXPECT_THROW(theta.validate(), DomainError);
}
