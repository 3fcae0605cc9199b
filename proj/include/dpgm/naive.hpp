#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dpgm/inference.hpp"
#include "dpgm/model.hpp"
#include "dpgm/privacy.hpp"

namespace dpgm {

enum class Optimizer { gradient_ascent, quasi_newton };

struct FitConfig {
  // Weight of the L2 penalty on the per-record log-likelihood, i.e. the
  // fitted objective is <theta, n> - N A(theta) - N lambda ||theta||^2.
  double lambda = 1e-3;
  Optimizer optimizer = Optimizer::quasi_newton;
  // Bound on max_i |n_i / N - mu_i - 2 lambda theta_i| at convergence.
  double grad_tol = 1e-6;
  int max_iters = 1000;

  void validate() const;
};

struct FitResult {
  Parameters theta_hat;
  double final_objective = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> warnings;
};

// Cliques in the same group share one parameter block (time-homogeneous
// chains). Grouped cliques must have identical table sizes.
struct ParameterTying {
  std::vector<int> group_of;

  static ParameterTying none(const ModelStructure& structure);
  int num_groups() const;
  void validate(const ModelStructure& structure) const;
  // Full parameter vector from one block per group.
  Parameters expand(const StructurePtr& structure, std::span<const double> free) const;
  std::size_t free_dimension(const ModelStructure& structure) const;
};

struct FitOptions {
  std::optional<double> total;         // N; defaults to the first table's total
  const Parameters* warm_start = nullptr;
  const ParameterTying* tying = nullptr;
};

// Euclidean projection of v onto {w >= 0, sum w = total}.
std::vector<double> project_to_simplex(std::span<const double> v, double total = 1.0);

// Each clique table of y / N projected onto the probability simplex on its
// own. Tables are not made consistent with each other.
CliqueTableSet project_release(const PrivateRelease& release, double N);

// Maximizes <theta, stats> - N A(theta) - N lambda ||theta||^2 from zeros (or
// the warm start). Engines other than the junction tree make this a Bethe
// approximation.
FitResult fit_mle(const CliqueTableSet& stats, const InferenceEngine& engine, const FitConfig& cfg,
                  const FitOptions& options = {});

}  // namespace dpgm
