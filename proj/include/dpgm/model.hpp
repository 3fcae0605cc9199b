#pragma once

// Discrete log-linear models: domains, clique structures, parameter vectors,
// clique contingency tables and record datasets.
//
// Indexing convention. Variables are numbered 0..T-1. A clique is a sorted,
// duplicate-free list of variable indices. The configuration of a clique is
// flattened row-major with the first (smallest) variable most significant.
// Flat parameter and table vectors concatenate the clique blocks in clique
// order, so block c starts at ModelStructure::offset(c).

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpgm {

struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct StructuralError : std::logic_error {
  using std::logic_error::logic_error;
};

using Scope = std::vector<int>;

struct DomainSpec {
  std::vector<int> cardinalities;

  static DomainSpec uniform(std::size_t num_vars, int cardinality);

  std::size_t num_vars() const { return cardinalities.size(); }
  int cardinality(int var) const { return cardinalities.at(static_cast<std::size_t>(var)); }
  void validate() const;
  bool operator==(const DomainSpec&) const = default;
};

// Number of joint configurations of a scope.
std::size_t scope_size(const Scope& scope, const DomainSpec& domain);

// Row-major index of an assignment to the variables of `scope`.
std::size_t config_index(const Scope& scope, const DomainSpec& domain,
                         std::span<const int> assignment);

// Inverse of config_index.
std::vector<int> config_assignment(const Scope& scope, const DomainSpec& domain,
                                   std::size_t index);

class ModelStructure {
 public:
  ModelStructure(DomainSpec domain, std::vector<Scope> cliques);

  const DomainSpec& domain() const { return domain_; }
  std::size_t num_vars() const { return domain_.num_vars(); }
  std::size_t num_cliques() const { return cliques_.size(); }
  const std::vector<Scope>& cliques() const { return cliques_; }
  const Scope& clique(std::size_t c) const { return cliques_.at(c); }

  std::size_t table_size(std::size_t c) const { return sizes_.at(c); }
  std::size_t offset(std::size_t c) const { return offsets_.at(c); }
  // Total length d of a parameter vector.
  std::size_t dimension() const { return offsets_.back(); }

  // Index into clique c's table of the configuration a full record takes.
  std::size_t record_index(std::size_t c, std::span<const int> record) const;

  // Edges of the independence graph, each (u, v) with u < v, sorted.
  std::vector<std::pair<int, int>> graph_edges() const;

  // "0-1-2" style key used by the file formats.
  std::string clique_key(std::size_t c) const;

  bool operator==(const ModelStructure& other) const {
    return domain_ == other.domain_ && cliques_ == other.cliques_;
  }

 private:
  DomainSpec domain_;
  std::vector<Scope> cliques_;
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
};

using StructurePtr = std::shared_ptr<const ModelStructure>;

StructurePtr make_structure(DomainSpec domain, std::vector<Scope> cliques);

// A flat real vector laid out by clique blocks.
class CliqueVector {
 public:
  explicit CliqueVector(StructurePtr structure);
  CliqueVector(StructurePtr structure, std::vector<double> values);

  const ModelStructure& structure() const { return *structure_; }
  const StructurePtr& structure_ptr() const { return structure_; }

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::vector<double>& raw() { return values_; }
  const std::vector<double>& raw() const { return values_; }

  std::span<const double> block(std::size_t c) const;
  std::span<double> block(std::size_t c);

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

 protected:
  StructurePtr structure_;
  std::vector<double> values_;
};

// Log-potentials theta, one block per clique.
class Parameters : public CliqueVector {
 public:
  using CliqueVector::CliqueVector;
  // Throws DomainError on non-finite entries.
  void validate() const;
};

enum class TableRole { counts, noisy, pseudo_marginal, marginal };

const char* to_string(TableRole role);
TableRole table_role_from_string(const std::string& name);

// Per-clique tables: counts n, noisy release y, pseudo-marginals or model
// marginals depending on role.
class CliqueTableSet : public CliqueVector {
 public:
  CliqueTableSet(StructurePtr structure, TableRole role);
  CliqueTableSet(StructurePtr structure, std::vector<double> values, TableRole role);

  TableRole role() const { return role_; }
  void set_role(TableRole role) { role_ = role; }

  double table_total(std::size_t c) const;

  // Largest disagreement between two cliques' tables marginalized onto their
  // shared variables.
  double max_inconsistency() const;

  // Checks the invariants of the counts and marginal roles: non-negativity,
  // a common total (1 for marginals) and overlap consistency, all to `tol`.
  // Noisy and pseudo-marginal roles carry no constraints.
  void validate(double tol = 1e-8) const;

 private:
  TableRole role_;
};

// Records of attribute values with optional per-record weights.
class Dataset {
 public:
  explicit Dataset(std::size_t num_vars) : num_vars_(num_vars) {}

  std::size_t num_vars() const { return num_vars_; }
  std::size_t size() const { return num_vars_ == 0 ? 0 : values_.size() / num_vars_; }
  bool weighted() const { return !weights_.empty(); }

  std::span<const int> record(std::size_t i) const {
    return {values_.data() + i * num_vars_, num_vars_};
  }
  double weight(std::size_t i) const { return weights_.empty() ? 1.0 : weights_[i]; }
  double total_weight() const;

  void add(std::span<const int> record, double weight = 1.0);
  void reserve(std::size_t n) { values_.reserve(n * num_vars_); }

  // Throws DomainError if a value falls outside its cardinality.
  void validate(const DomainSpec& domain) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t num_vars_;
  std::vector<int> values_;
  std::vector<double> weights_;
};

// n_C(i_C) = sum_i w_i 1{x_C = i_C}.
CliqueTableSet sufficient_statistics(const Dataset& data, const StructurePtr& structure);

// Unnormalized log-density sum_C theta_C(x_C).
double log_potential(std::span<const int> x, const Parameters& theta);

// sum_C theta_C(x_C) - A(theta), with A supplied by the caller.
double log_density(std::span<const int> x, const Parameters& theta, double log_partition);

// <theta, n> over the flat vectors.
double inner(const CliqueVector& a, const CliqueVector& b);

}  // namespace dpgm
