#include "dpgm/privacy.hpp"

#include <cmath>
#include <limits>

namespace dpgm {

PrivacyBudget::PrivacyBudget(double eps) : epsilon(eps) {
  if (!(eps > 0.0)) throw DomainError("epsilon must be positive");
}

double sensitivity(const ModelStructure& structure, double per_record_weight_cap) {
  if (!(per_record_weight_cap > 0.0)) throw DomainError("weight cap must be positive");
  return static_cast<double>(structure.num_cliques()) * per_record_weight_cap;
}

double laplace_sample(double scale, Rng& rng) { return rng.laplace(scale); }

PrivateRelease perturb(const CliqueTableSet& n, const PrivacyBudget& budget, std::uint64_t seed,
                       double per_record_weight_cap) {
  if (n.role() != TableRole::counts) throw DomainError("perturb expects count tables");
  const double delta = sensitivity(n.structure(), per_record_weight_cap);
  const double scale = delta / budget.epsilon;
  CliqueTableSet y(n.structure_ptr(), n.raw(), TableRole::noisy);
  Rng rng(seed);
  if (scale > 0.0 && std::isfinite(budget.epsilon))
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += rng.laplace(scale);
  return PrivateRelease{std::move(y), budget.epsilon, delta, scale, seed};
}

double predicted_mse(double mu, double N, std::size_t num_cliques, double epsilon) {
  if (!(mu >= 0.0 && mu <= 1.0)) throw DomainError("predicted_mse: mu must lie in [0, 1]");
  if (!(N > 0.0)) throw DomainError("predicted_mse: N must be positive");
  const double c = static_cast<double>(num_cliques);
  const double noise = std::isinf(epsilon) ? 0.0 : 2.0 * c * c / (N * N * epsilon * epsilon);
  return mu * (1.0 - mu) / N + noise;
}

void check_weight_cap(const Dataset& data, double per_record_weight_cap) {
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.weight(i) > per_record_weight_cap * (1.0 + 1e-12))
      throw DomainError("record weight exceeds the per-record contribution cap");
}

}  // namespace dpgm
