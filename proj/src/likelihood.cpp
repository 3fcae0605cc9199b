#include "dpgm/likelihood.hpp"

namespace dpgm {

double log_partition(const Parameters& theta, const JunctionTree& tree) {
  return JunctionTreeEngine(theta.structure_ptr(), tree).calibrate(theta).log_partition;
}

BPResult model_marginals(const Parameters& theta, const InferenceEngine& engine) {
  return engine.run(theta);
}

double log_likelihood(const CliqueTableSet& n, const Parameters& theta, double log_partition) {
  if (n.structure().num_cliques() == 0) return 0.0;
  const double N = n.table_total(0);
  return inner(theta, n) - N * log_partition;
}

double log_likelihood(const CliqueTableSet& n, const Parameters& theta, const InferenceEngine& engine) {
  return log_likelihood(n, theta, engine.calibrate(theta).log_partition);
}

std::vector<double> log_likelihood_gradient(const CliqueTableSet& n, const Parameters& theta,
                                            const InferenceEngine& engine) {
  const double N = n.structure().num_cliques() == 0 ? 0.0 : n.table_total(0);
  const BPResult r = engine.run(theta);
  std::vector<double> g(n.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = n[i] - N * r.marginals[i];
  return g;
}

double kl_divergence(const Parameters& theta_p, const Parameters& theta_q,
                     const InferenceEngine& engine) {
  if (!engine.exact()) throw StructuralError("kl_divergence requires an exact inference engine");
  const BPResult p = engine.run(theta_p);
  const double a_q = engine.calibrate(theta_q).log_partition;
  double s = 0.0;
  for (std::size_t i = 0; i < theta_p.size(); ++i) s += (theta_p[i] - theta_q[i]) * p.marginals[i];
  const double kl = s - p.log_partition + a_q;
  // Clamp round-off below zero.
  return kl < 0.0 && kl > -1e-12 ? 0.0 : kl;
}

double mean_log_likelihood(const Dataset& data, const Parameters& theta, double log_partition) {
  const double total = data.total_weight();
  if (data.size() == 0 || !(total > 0.0)) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i)
    s += data.weight(i) * log_density(data.record(i), theta, log_partition);
  return s / total;
}

}  // namespace dpgm
