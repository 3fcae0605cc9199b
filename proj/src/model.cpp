#include "dpgm/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dpgm/table_ops.hpp"

namespace dpgm {

DomainSpec DomainSpec::uniform(std::size_t num_vars, int cardinality) {
  DomainSpec d{std::vector<int>(num_vars, cardinality)};
  d.validate();
  return d;
}

void DomainSpec::validate() const {
  if (cardinalities.empty()) throw DomainError("domain must have at least one variable");
  for (int c : cardinalities)
    if (c < 2) throw DomainError("every cardinality must be at least 2");
}

std::size_t scope_size(const Scope& scope, const DomainSpec& domain) {
  std::size_t n = 1;
  for (int v : scope) n *= static_cast<std::size_t>(domain.cardinality(v));
  return n;
}

std::size_t config_index(const Scope& scope, const DomainSpec& domain,
                         std::span<const int> assignment) {
  if (assignment.size() != scope.size())
    throw DomainError("config_index: assignment length does not match clique");
  std::size_t idx = 0;
  for (std::size_t k = 0; k < scope.size(); ++k) {
    const int card = domain.cardinality(scope[k]);
    const int a = assignment[k];
    if (a < 0 || a >= card) throw DomainError("config_index: state out of range");
    idx = idx * static_cast<std::size_t>(card) + static_cast<std::size_t>(a);
  }
  return idx;
}

std::vector<int> config_assignment(const Scope& scope, const DomainSpec& domain,
                                   std::size_t index) {
  if (index >= scope_size(scope, domain)) throw DomainError("config_assignment: index out of range");
  std::vector<int> out(scope.size());
  for (std::size_t k = scope.size(); k-- > 0;) {
    const auto card = static_cast<std::size_t>(domain.cardinality(scope[k]));
    out[k] = static_cast<int>(index % card);
    index /= card;
  }
  return out;
}

ModelStructure::ModelStructure(DomainSpec domain, std::vector<Scope> cliques)
    : domain_(std::move(domain)), cliques_(std::move(cliques)) {
  domain_.validate();
  const int T = static_cast<int>(domain_.num_vars());
  std::set<Scope> seen;
  offsets_.push_back(0);
  for (const Scope& c : cliques_) {
    if (c.empty()) throw StructuralError("clique must be non-empty");
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (c[k] < 0 || c[k] >= T) throw StructuralError("clique variable out of range");
      if (k > 0 && c[k] <= c[k - 1]) throw StructuralError("clique must be sorted and duplicate-free");
    }
    if (!seen.insert(c).second) throw StructuralError("duplicate clique");
    sizes_.push_back(scope_size(c, domain_));
    offsets_.push_back(offsets_.back() + sizes_.back());
  }
}

std::size_t ModelStructure::record_index(std::size_t c, std::span<const int> record) const {
  const Scope& scope = cliques_[c];
  std::size_t idx = 0;
  for (int v : scope) {
    const int card = domain_.cardinalities[static_cast<std::size_t>(v)];
    idx = idx * static_cast<std::size_t>(card) + static_cast<std::size_t>(record[static_cast<std::size_t>(v)]);
  }
  return idx;
}

std::vector<std::pair<int, int>> ModelStructure::graph_edges() const {
  std::set<std::pair<int, int>> edges;
  for (const Scope& c : cliques_)
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = i + 1; j < c.size(); ++j) edges.emplace(c[i], c[j]);
  return {edges.begin(), edges.end()};
}

std::string ModelStructure::clique_key(std::size_t c) const {
  std::string key;
  for (int v : cliques_.at(c)) {
    if (!key.empty()) key += '-';
    key += std::to_string(v);
  }
  return key;
}

StructurePtr make_structure(DomainSpec domain, std::vector<Scope> cliques) {
  return std::make_shared<const ModelStructure>(std::move(domain), std::move(cliques));
}

CliqueVector::CliqueVector(StructurePtr structure)
    : structure_(std::move(structure)), values_(structure_->dimension(), 0.0) {}

CliqueVector::CliqueVector(StructurePtr structure, std::vector<double> values)
    : structure_(std::move(structure)), values_(std::move(values)) {
  if (values_.size() != structure_->dimension())
    throw DomainError("vector length does not match structure dimension");
}

std::span<const double> CliqueVector::block(std::size_t c) const {
  return std::span<const double>(values_).subspan(structure_->offset(c), structure_->table_size(c));
}

std::span<double> CliqueVector::block(std::size_t c) {
  return std::span<double>(values_).subspan(structure_->offset(c), structure_->table_size(c));
}

void Parameters::validate() const {
  for (double v : values_)
    if (!std::isfinite(v)) throw DomainError("parameters must be finite");
}

const char* to_string(TableRole role) {
  switch (role) {
    case TableRole::counts: return "counts";
    case TableRole::noisy: return "noisy";
    case TableRole::pseudo_marginal: return "pseudo-marginal";
    case TableRole::marginal: return "marginal";
  }
  return "unknown";
}

TableRole table_role_from_string(const std::string& name) {
  if (name == "counts") return TableRole::counts;
  if (name == "noisy") return TableRole::noisy;
  if (name == "pseudo-marginal") return TableRole::pseudo_marginal;
  if (name == "marginal") return TableRole::marginal;
  throw DomainError("unknown table role: " + name);
}

CliqueTableSet::CliqueTableSet(StructurePtr structure, TableRole role)
    : CliqueVector(std::move(structure)), role_(role) {}

CliqueTableSet::CliqueTableSet(StructurePtr structure, std::vector<double> values, TableRole role)
    : CliqueVector(std::move(structure), std::move(values)), role_(role) {}

double CliqueTableSet::table_total(std::size_t c) const {
  double s = 0.0;
  for (double v : block(c)) s += v;
  return s;
}

double CliqueTableSet::max_inconsistency() const {
  const ModelStructure& st = *structure_;
  const DomainSpec& dom = st.domain();
  double worst = 0.0;
  for (std::size_t a = 0; a < st.num_cliques(); ++a) {
    for (std::size_t b = a + 1; b < st.num_cliques(); ++b) {
      Scope shared = scope_intersection(st.clique(a), st.clique(b));
      if (shared.empty()) continue;
      const std::size_t k = scope_size(shared, dom);
      std::vector<double> ma(k, 0.0), mb(k, 0.0);
      marginalize_sum(block(a), projection_map(st.clique(a), shared, dom), ma);
      marginalize_sum(block(b), projection_map(st.clique(b), shared, dom), mb);
      for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, std::fabs(ma[i] - mb[i]));
    }
  }
  return worst;
}

void CliqueTableSet::validate(double tol) const {
  if (role_ == TableRole::noisy || role_ == TableRole::pseudo_marginal) return;
  const ModelStructure& st = *structure_;
  if (st.num_cliques() == 0) return;
  const double expected = role_ == TableRole::marginal ? 1.0 : table_total(0);
  const double scale = std::max(1.0, std::fabs(expected));
  for (double v : values_)
    if (!(v >= -tol * scale)) throw DomainError("table entries must be non-negative");
  for (std::size_t c = 0; c < st.num_cliques(); ++c)
    if (std::fabs(table_total(c) - expected) > tol * scale)
      throw DomainError("clique tables do not share a common total");
  if (max_inconsistency() > tol * scale)
    throw DomainError("clique tables disagree on shared variables");
}

double Dataset::total_weight() const {
  if (weights_.empty()) return static_cast<double>(size());
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

void Dataset::add(std::span<const int> record, double weight) {
  if (record.size() != num_vars_) throw DomainError("record length does not match dataset");
  if (!(weight >= 0.0) || !std::isfinite(weight)) throw DomainError("record weight must be finite and non-negative");
  if (weight != 1.0 || !weights_.empty()) {
    weights_.resize(size(), 1.0);
    weights_.push_back(weight);
  }
  values_.insert(values_.end(), record.begin(), record.end());
}

void Dataset::validate(const DomainSpec& domain) const {
  if (domain.num_vars() != num_vars_) throw DomainError("dataset width does not match domain");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const int v = values_[i];
    if (v < 0 || v >= domain.cardinalities[i % num_vars_]) throw DomainError("attribute value out of range");
  }
}

CliqueTableSet sufficient_statistics(const Dataset& data, const StructurePtr& structure) {
  data.validate(structure->domain());
  CliqueTableSet n(structure, TableRole::counts);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.record(i);
    const double w = data.weight(i);
    for (std::size_t c = 0; c < structure->num_cliques(); ++c)
      n[structure->offset(c) + structure->record_index(c, x)] += w;
  }
  return n;
}

double log_potential(std::span<const int> x, const Parameters& theta) {
  const ModelStructure& st = theta.structure();
  double s = 0.0;
  for (std::size_t c = 0; c < st.num_cliques(); ++c) s += theta[st.offset(c) + st.record_index(c, x)];
  return s;
}

double log_density(std::span<const int> x, const Parameters& theta, double log_partition) {
  return log_potential(x, theta) - log_partition;
}

double inner(const CliqueVector& a, const CliqueVector& b) {
  if (a.size() != b.size()) throw DomainError("inner: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace dpgm
