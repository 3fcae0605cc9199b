#pragma once

// Approximate MAP inference over latent clique counts given a noisy release,
// and EM learning built on it.

#include <optional>
#include <vector>

#include "dpgm/inference.hpp"
#include "dpgm/model.hpp"
#include "dpgm/naive.hpp"
#include "dpgm/privacy.hpp"

namespace dpgm {

// How the NLBP fixed point is reached. `fixed_point` is the plain damped
// iteration. `dual` runs projected Barzilai-Borwein steps on
//   min_{|lambda| <= 1/b}  N A(theta + lambda) - <lambda, y> + (tau b / 2) ||lambda||^2
// whose stationary points are exactly the fixed points of the damped
// iteration with tilt lambda.
enum class NLBPSolver { fixed_point, dual };

struct NLBPConfig {
  NLBPSolver solver = NLBPSolver::dual;
  double alpha = 0.5;       // damping (fixed_point only)
  // fixed_point: on max |n' - n| / N, n' the BP output at n.
  // dual: on the max projected gradient divided by N.
  double tol = 1e-6;
  int max_iters = 20000;
  // Half-width (in counts) of the linear ramp that replaces the sign of the
  // Laplace kink. Unset means max(1e-6 N b, 1e-5 N / b).
  std::optional<double> smoothing;
  BPConfig bp;

  void validate() const;
  double smoothing_for(double N, double b) const;
};

struct NLBPResult {
  CliqueTableSet n;             // counts role, real valued, in M_N
  RegionTables regions;         // region counts behind n
  std::vector<double> tilt;     // gradient of the noise term at the last iterate
  double objective = 0.0;       // smoothed objective at n
  double residual = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> objective_trace;
  std::vector<double> residual_trace;
};

// Laplace noise scale b = sensitivity / epsilon.
inline double noise_scale(double epsilon, double delta_sens) { return delta_sens / epsilon; }

// d/dn log p(y | n) = sign(y - n) / b with 0 at y = n. With smoothing > 0 the
// sign is replaced by (y - n) / smoothing inside |y - n| < smoothing.
std::vector<double> noise_gradient(const CliqueTableSet& y, const CliqueTableSet& n, double epsilon,
                                   double delta_sens, double smoothing = 0.0);

// log p(y | n) = -sum |y - n| / b - d log(2b), or its smoothed counterpart.
double noise_log_likelihood(const CliqueTableSet& y, const CliqueTableSet& n, double b,
                            double smoothing = 0.0);

// <theta, n> + H(n) + log p(y | n) for n in M_N. Throws DomainError when n
// is negative, has unequal totals or inconsistent overlaps beyond 1e-8
// (relative to N).
double map_objective(const CliqueTableSet& n, const Parameters& theta, const CliqueTableSet& y,
                     double epsilon, double delta_sens, const JunctionTree& tree);

// Non-linear belief propagation: repeat
//   theta' = theta + grad_n log p(y | n);  n' = N * BP(theta');  n = (1 - a) n + a n'
// with the damping a halved whenever a step would lower the objective, or
// the equivalent dual solve (see NLBPSolver). `init` warm-starts from region
// counts of an earlier call; otherwise n starts from uniform tables.
NLBPResult nlbp(const Parameters& theta, const PrivateRelease& release, double N,
                const NLBPConfig& cfg, const InferenceEngine& engine,
                const RegionTables* init = nullptr);

// Stationarity check for an NLBP fixed point: the larger of
//   max |N mu(theta + tilt) - n| / N
// and, per cell, b times the distance from tilt to the subdifferential of
// -|y - n| / b, where cells within `kink` counts of y count as at the kink.
double nlbp_kkt_residual(const Parameters& theta, const PrivateRelease& release, double N,
                         const NLBPResult& result, const InferenceEngine& engine, double kink);

struct EMConfig {
  NLBPConfig nlbp;
  FitConfig fit{1e-6};
  double em_tol = 1e-4;  // on max |theta_{t+1} - theta_t|
  int max_em_iters = 50;

  void validate() const;
};

struct EMIteration {
  double estep_objective;
  double estep_residual;
  int estep_iterations;
  bool estep_converged;
  double theta_change;
};

struct EMResult {
  FitResult fit;
  CliqueTableSet expected_counts;
  std::vector<EMIteration> trace;
};

// EM over latent counts: n_t = nlbp(theta_t, y); theta_{t+1} = fit_mle(n_t)
// warm-started at theta_t. N is treated as public.
EMResult em_fit(const PrivateRelease& release, double N, const InferenceEngine& engine,
                const EMConfig& cfg, const ParameterTying* tying = nullptr);

}  // namespace dpgm
