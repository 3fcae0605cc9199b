#pragma once

#include "dpgm/inference.hpp"
#include "dpgm/model.hpp"

namespace dpgm {

// A(theta) by one junction-tree calibration.
double log_partition(const Parameters& theta, const JunctionTree& tree);

// Clique marginals mu = E[n] / N. Loopy engines flag the result as
// approximate and report convergence through the BPResult fields.
BPResult model_marginals(const Parameters& theta, const InferenceEngine& engine);

// f(n, theta) = <theta, n> - N A(theta), N taken from the first table.
double log_likelihood(const CliqueTableSet& n, const Parameters& theta, double log_partition);
double log_likelihood(const CliqueTableSet& n, const Parameters& theta, const InferenceEngine& engine);

// Gradient of f with respect to theta: n - N mu(theta).
std::vector<double> log_likelihood_gradient(const CliqueTableSet& n, const Parameters& theta,
                                            const InferenceEngine& engine);

// D(p || q) = <theta_p - theta_q, mu_p> - A(theta_p) + A(theta_q).
// Throws StructuralError unless `engine` is exact.
double kl_divergence(const Parameters& theta_p, const Parameters& theta_q,
                     const InferenceEngine& engine);

// Weighted mean log-density of the records under theta.
double mean_log_likelihood(const Dataset& data, const Parameters& theta, double log_partition);

}  // namespace dpgm
