#pragma once

// Message-passing engines.
//
// Both engines describe their beliefs through a region graph: a list of
// scopes with counting numbers c_r such that the entropy functional is
// sum_r c_r H(b_r). For a junction tree the regions are the tree cliques
// (c = 1) and one separator per tree edge (c = -1), which makes the
// functional exact. For loopy BP they are the model cliques (c = 1) and the
// single variables (c = 1 - degree), i.e. the Bethe entropy.

#include <memory>
#include <optional>
#include <vector>

#include "dpgm/junction_tree.hpp"
#include "dpgm/model.hpp"

namespace dpgm {

struct BPConfig {
  double damping = 1.0;  // weight on the freshly computed message, in (0, 1]
  double tol = 1e-10;    // max absolute change of any log message
  int max_iters = 2000;

  void validate() const;
};

struct BPResult {
  CliqueTableSet marginals;
  // Exact A(theta) for the junction-tree engine, negative Bethe free energy
  // for loopy BP.
  double log_partition = 0.0;
  bool exact = true;
  bool converged = true;
  double residual = 0.0;
  int iterations = 0;
};

using RegionTables = std::vector<std::vector<double>>;

struct RegionGraph {
  std::vector<Scope> scopes;
  std::vector<double> counting;
  // For each model clique: the region holding it and the projection from
  // that region's configurations onto the clique's.
  std::vector<int> clique_home;
  std::vector<std::vector<std::size_t>> clique_maps;

  // sum_r c_r H(b_r) for normalized region tables.
  double entropy(const RegionTables& beliefs) const;
};

struct Calibration {
  RegionTables beliefs;  // normalized
  double log_partition = 0.0;
  bool converged = true;
  double residual = 0.0;
  int iterations = 0;
};

class InferenceEngine {
 public:
  explicit InferenceEngine(StructurePtr structure) : structure_(std::move(structure)) {}
  virtual ~InferenceEngine() = default;

  virtual bool exact() const = 0;
  virtual Calibration calibrate(const Parameters& theta) const = 0;

  const ModelStructure& structure() const { return *structure_; }
  const StructurePtr& structure_ptr() const { return structure_; }
  const RegionGraph& regions() const { return regions_; }

  // Model-clique tables obtained by summing region tables, scaled by `scale`.
  CliqueTableSet clique_tables(const RegionTables& tables, TableRole role, double scale = 1.0) const;

  BPResult run(const Parameters& theta) const;

 protected:
  void check_parameters(const Parameters& theta) const;

  StructurePtr structure_;
  RegionGraph regions_;
};

class JunctionTreeEngine final : public InferenceEngine {
 public:
  JunctionTreeEngine(StructurePtr structure, JunctionTree tree);

  bool exact() const override { return true; }
  Calibration calibrate(const Parameters& theta) const override;
  const JunctionTree& tree() const { return tree_; }

 private:
  JunctionTree tree_;
  std::vector<int> bfs_order_;
  std::vector<int> parent_;
  std::vector<int> parent_edge_;
  // Tree clique -> separator with its parent.
  std::vector<std::vector<std::size_t>> up_maps_;
  std::vector<std::vector<std::size_t>> parent_maps_;
  // Edge -> projection of its first endpoint onto the separator.
  std::vector<std::vector<std::size_t>> edge_maps_;
  std::vector<std::size_t> sep_sizes_;
  // Model clique -> broadcast map from its home tree clique.
  std::vector<std::vector<std::size_t>> potential_maps_;
};

class LoopyEngine final : public InferenceEngine {
 public:
  LoopyEngine(StructurePtr structure, BPConfig config);

  bool exact() const override { return false; }
  Calibration calibrate(const Parameters& theta) const override;
  const BPConfig& config() const { return config_; }

 private:
  BPConfig config_;
  // var_maps_[f][k]: factor f's configuration -> state of its k-th variable.
  std::vector<std::vector<std::vector<std::size_t>>> var_maps_;
  // factors_of_[v]: (factor, position of v in that factor).
  std::vector<std::vector<std::pair<int, int>>> factors_of_;
};

// Exact engine when a junction tree is supplied or the structure is
// decomposable, loopy BP otherwise.
std::unique_ptr<InferenceEngine> make_engine(const StructurePtr& structure,
                                             const std::optional<JunctionTree>& tree = std::nullopt,
                                             const BPConfig& bp = {});

// Two-pass calibration on a junction tree.
BPResult sum_product_exact(const Parameters& theta, const JunctionTree& tree);

// Damped synchronous sum-product on the clique factor graph.
BPResult loopy_bp(const Parameters& theta, const BPConfig& config);

// H(n) = N (sum_C H_C - sum_S nu(S) H_S) with H_A the entropy of n_A / N.
// Every tree clique must be one of the model cliques (or be contained in
// one) so that its table is determined by n.
double cgm_entropy(const CliqueTableSet& n, const JunctionTree& tree);

}  // namespace dpgm
