#pragma once

#include <cstdint>

#include "dpgm/model.hpp"
#include "dpgm/random.hpp"

namespace dpgm {

struct PrivacyBudget {
  double epsilon;

  explicit PrivacyBudget(double eps);
};

// Noisy clique tables together with everything needed to audit or replay
// the release.
struct PrivateRelease {
  CliqueTableSet y;
  double epsilon;
  double sensitivity;
  double noise_scale;  // sensitivity / epsilon
  std::uint64_t seed;
};

// L1 sensitivity of the clique tables when each record contributes at most
// `per_record_weight_cap` to every table: |C| * cap.
double sensitivity(const ModelStructure& structure, double per_record_weight_cap = 1.0);

double laplace_sample(double scale, Rng& rng);

// y = n + Laplace(sensitivity / epsilon) on every cell, including cells no
// record can reach. Draws come from a generator seeded with `seed` in
// flat-vector order, so the release replays exactly.
PrivateRelease perturb(const CliqueTableSet& n, const PrivacyBudget& budget, std::uint64_t seed,
                       double per_record_weight_cap = 1.0);

// Mean squared error of y_C(i_C) / N as an estimate of mu_C(i_C):
// mu (1 - mu) / N + 2 |C|^2 / (N^2 eps^2).
double predicted_mse(double mu, double N, std::size_t num_cliques, double epsilon);

// Throws DomainError if any record weighs more than the cap assumed by
// `sensitivity`.
void check_weight_cap(const Dataset& data, double per_record_weight_cap);

}  // namespace dpgm
