#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dpgm/mobility.hpp"
#include "dpgm/naive.hpp"
#include "oracles.hpp"

using namespace dpgm;

namespace {

MobilityEvent at(const std::string& user, int day, int minute, int loc) { return {user, day, minute, loc}; }

}  // namespace

TEST(Ingest, LatestEventInASlotWins) {
  std::vector<MobilityEvent> ev{at("a", 0, 3, 1), at("a", 0, 8, 2), at("a", 0, 12, 1)};
  MobilityData d = mobility_ingest(ev, 3);
  ASSERT_EQ(d.data.size(), 1u);
  auto r = d.data.record(0);
  EXPECT_EQ(r[0], 2);
  EXPECT_EQ(r[1], 1);
  for (std::size_t k = 2; k < 6; ++k) EXPECT_EQ(r[k], 0);
  EXPECT_EQ(d.segment_length, 6);
}

TEST(Ingest, WeightIsOneOverNonEmptySegments) {
  // User b is seen in hours 0, 5 and 5 of two different days: K = 3.
  std::vector<MobilityEvent> ev{at("b", 0, 10, 1), at("b", 0, 300, 2), at("b", 1, 310, 2), at("c", 0, 600, 1)};
  MobilityData d = mobility_ingest(ev, 2);
  EXPECT_EQ(d.user_ids, (std::vector<std::string>{"b", "c"}));
  ASSERT_EQ(d.data.size(), 4u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(d.data.weight(i), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(d.data.weight(3), 1.0);
  EXPECT_EQ(d.contributing_individuals, 2u);
}

TEST(Ingest, AllNullUserContributesNothing) {
  std::vector<MobilityEvent> ev{at("z", 0, 10, 0), at("z", 0, 500, 0), at("y", 0, 20, 1)};
  MobilityData d = mobility_ingest(ev, 2);
  EXPECT_EQ(d.contributing_individuals, 1u);
  ASSERT_EQ(d.data.size(), 1u);
  EXPECT_EQ(d.user_ids[static_cast<std::size_t>(d.individual[0])], "y");
}

TEST(Ingest, RejectsOutOfRangeEvents) {
  EXPECT_THROW(mobility_ingest({at("a", 0, 1440, 1)}, 2), DomainError);
  EXPECT_THROW(mobility_ingest({at("a", 0, 10, 3)}, 2), DomainError);
  EXPECT_THROW(mobility_ingest({at("a", 0, 10, 1)}, 2, 7), DomainError);
}

TEST(Ingest, TableMassEqualsContributingUsers) {
  MobilityConfig cfg;
  cfg.num_users = 300;
  cfg.days_per_user = 2;
  cfg.num_locations = 5;
  cfg.seed = 4;
  MobilityData d = mobility_ingest(generate_mobility(cfg, planted_chain(cfg)), cfg.num_locations);
  auto s = time_homogeneous_structure(d.segment_length, cfg.num_locations + 1);
  CliqueTableSet n = sufficient_statistics(d.data, s);
  for (std::size_t c = 0; c < s->num_cliques(); ++c)
    EXPECT_NEAR(n.table_total(c), static_cast<double>(d.contributing_individuals), 1e-9);
  EXPECT_LE(max_individual_contribution(d, s), 1.0 + 1e-12);
  EXPECT_NEAR(max_individual_contribution(d, s), 1.0, 1e-12);
}

TEST(Generator, DeterministicAndWellFormed) {
  MobilityConfig cfg;
  cfg.num_users = 50;
  cfg.seed = 8;
  MobilityChain chain = planted_chain(cfg);
  for (int from = 0; from < chain.states(); ++from) {
    double row = 0.0;
    for (int to = 0; to < chain.states(); ++to) row += chain(from, to);
    EXPECT_NEAR(row, 1.0, 1e-12);
  }
  auto a = generate_mobility(cfg, chain);
  auto b = generate_mobility(cfg, chain);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].user_id, b[i].user_id);
    EXPECT_EQ(a[i].timestamp, b[i].timestamp);
    EXPECT_EQ(a[i].location_id, b[i].location_id);
    EXPECT_GE(a[i].location_id, 1);
  }
}

TEST(Generator, EventCsvRoundTripSkipsMalformedRows) {
  MobilityConfig cfg;
  cfg.num_users = 20;
  auto events = generate_mobility(cfg, planted_chain(cfg));
  auto path = std::filesystem::temp_directory_path() / "dpgm_events.csv";
  write_events_csv(path, events);
  {
    std::ofstream out(path, std::ios::app);
    out << "u9,0,abc,1\nu9,0,2000,1\nu9,0,5,99\nu9,0\n";
  }
  EventLog log = read_events_csv(path, cfg.num_locations);
  EXPECT_EQ(log.malformed_rows, 4u);
  ASSERT_EQ(log.events.size(), events.size());
  EXPECT_EQ(log.events.back().location_id, events.back().location_id);
}

TEST(TimeHomogeneous, TiedFitRecoversPlantedChain) {
  MobilityConfig cfg;
  cfg.num_locations = 4;
  cfg.initial_presence = 0.5;
  cfg.seed = 3;
  MobilityChain chain = planted_chain(cfg);
  const int T = 6;
  auto s = time_homogeneous_structure(T, chain.states());
  Rng rng(5);
  Dataset d(T);
  std::vector<int> x(T);
  for (int u = 0; u < 100000; ++u) {
    x[0] = static_cast<int>(rng.categorical(chain.initial));
    for (int t = 1; t < T; ++t) {
      std::span<const double> row(chain.transition.data() + x[t - 1] * chain.states(), static_cast<std::size_t>(chain.states()));
      x[t] = static_cast<int>(rng.categorical(row));
    }
    d.add(x);
  }
  auto engine = make_engine(s);
  ParameterTying tying = time_homogeneous_tying(*s);
  FitOptions opts;
  opts.tying = &tying;
  FitResult fit = fit_mle(sufficient_statistics(d, s), *engine, FitConfig{1e-8}, opts);
  std::vector<double> mu = oracle::marginals(fit.theta_hat);
  const std::size_t off = s->offset(1);
  const auto S = static_cast<std::size_t>(chain.states());
  for (int from = 0; from < chain.states(); ++from) {
    double z = 0.0, tv = 0.0;
    for (std::size_t to = 0; to < S; ++to) z += mu[off + static_cast<std::size_t>(from) * S + to];
    for (std::size_t to = 0; to < S; ++to)
      tv += std::fabs(mu[off + static_cast<std::size_t>(from) * S + to] / z - chain(from, static_cast<int>(to)));
    EXPECT_LE(0.5 * tv, 0.02) << "row " << from;
  }
}
