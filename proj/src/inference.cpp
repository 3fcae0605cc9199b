#include "dpgm/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dpgm/table_ops.hpp"

namespace dpgm {

void BPConfig::validate() const {
  if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("BP damping must lie in (0, 1]");
  if (!(tol > 0.0)) throw DomainError("BP tolerance must be positive");
  if (max_iters <= 0) throw DomainError("BP max_iters must be positive");
}

double RegionGraph::entropy(const RegionTables& beliefs) const {
  double h = 0.0;
  for (std::size_t r = 0; r < scopes.size(); ++r)
    if (counting[r] != 0.0) h += counting[r] * dpgm::entropy(beliefs[r]);
  return h;
}

CliqueTableSet InferenceEngine::clique_tables(const RegionTables& tables, TableRole role,
                                              double scale) const {
  CliqueTableSet out(structure_, role);
  for (std::size_t c = 0; c < structure_->num_cliques(); ++c) {
    const auto& src = tables[static_cast<std::size_t>(regions_.clique_home[c])];
    marginalize_sum(src, regions_.clique_maps[c], out.block(c));
    if (scale != 1.0)
      for (double& v : out.block(c)) v *= scale;
  }
  return out;
}

void InferenceEngine::check_parameters(const Parameters& theta) const {
  if (!(theta.structure() == *structure_))
    throw StructuralError("parameters do not belong to the engine's structure");
}

BPResult InferenceEngine::run(const Parameters& theta) const {
  Calibration cal = calibrate(theta);
  BPResult r{clique_tables(cal.beliefs, TableRole::marginal), cal.log_partition, exact(),
             cal.converged, cal.residual, cal.iterations};
  return r;
}

// ---------------------------------------------------------------------------
// Junction tree

JunctionTreeEngine::JunctionTreeEngine(StructurePtr structure, JunctionTree tree)
    : InferenceEngine(std::move(structure)), tree_(std::move(tree)) {
  tree_.validate(*structure_);
  const DomainSpec& dom = structure_->domain();
  const std::size_t m = tree_.tree_cliques.size();

  // Root at clique 0, breadth first.
  parent_.assign(m, -1);
  parent_edge_.assign(m, -1);
  std::vector<bool> seen(m, false);
  bfs_order_.push_back(0);
  seen[0] = true;
  for (std::size_t head = 0; head < bfs_order_.size(); ++head) {
    const int u = bfs_order_[head];
    for (std::size_t e = 0; e < tree_.edges.size(); ++e) {
      auto [a, b] = tree_.edges[e];
      int w = a == u ? b : (b == u ? a : -1);
      if (w < 0 || seen[static_cast<std::size_t>(w)]) continue;
      seen[static_cast<std::size_t>(w)] = true;
      parent_[static_cast<std::size_t>(w)] = u;
      parent_edge_[static_cast<std::size_t>(w)] = static_cast<int>(e);
      bfs_order_.push_back(w);
    }
  }
  up_maps_.resize(m);
  parent_maps_.resize(m);
  sep_sizes_.assign(m, 1);
  for (std::size_t i = 1; i < bfs_order_.size(); ++i) {
    const auto v = static_cast<std::size_t>(bfs_order_[i]);
    const Scope& sep = tree_.edge_separators[static_cast<std::size_t>(parent_edge_[v])];
    up_maps_[v] = projection_map(tree_.tree_cliques[v], sep, dom);
    parent_maps_[v] = projection_map(tree_.tree_cliques[static_cast<std::size_t>(parent_[v])], sep, dom);
    sep_sizes_[v] = scope_size(sep, dom);
  }

  regions_.scopes = tree_.tree_cliques;
  regions_.counting.assign(m, 1.0);
  for (const Scope& s : tree_.edge_separators) {
    regions_.scopes.push_back(s);
    regions_.counting.push_back(-1.0);
  }
  for (const Scope& c : structure_->cliques()) {
    const int home = tree_.home_of(c);
    regions_.clique_home.push_back(home);
    regions_.clique_maps.push_back(projection_map(tree_.tree_cliques[static_cast<std::size_t>(home)], c, dom));
  }
  potential_maps_ = regions_.clique_maps;
  for (std::size_t e = 0; e < tree_.edges.size(); ++e)
    edge_maps_.push_back(projection_map(tree_.tree_cliques[static_cast<std::size_t>(tree_.edges[e].first)],
                                        tree_.edge_separators[e], dom));
}

Calibration JunctionTreeEngine::calibrate(const Parameters& theta) const {
  check_parameters(theta);
  const DomainSpec& dom = structure_->domain();
  const std::size_t m = tree_.tree_cliques.size();

  RegionTables psi(m);
  for (std::size_t i = 0; i < m; ++i) psi[i].assign(scope_size(tree_.tree_cliques[i], dom), 0.0);
  for (std::size_t c = 0; c < structure_->num_cliques(); ++c) {
    auto& tab = psi[static_cast<std::size_t>(regions_.clique_home[c])];
    const auto blk = theta.block(c);
    const auto& map = potential_maps_[c];
    for (std::size_t k = 0; k < tab.size(); ++k) tab[k] += blk[map[k]];
  }

  // Collect: upward[v] is the message from v to its parent.
  RegionTables belief = psi;
  RegionTables upward(m);
  for (std::size_t i = bfs_order_.size(); i-- > 1;) {
    const auto v = static_cast<std::size_t>(bfs_order_[i]);
    upward[v].assign(sep_sizes_[v], 0.0);
    marginalize_logsumexp(belief[v], up_maps_[v], upward[v]);
    auto& pb = belief[static_cast<std::size_t>(parent_[v])];
    const auto& pmap = parent_maps_[v];
    for (std::size_t k = 0; k < pb.size(); ++k) pb[k] += upward[v][pmap[k]];
  }
  const double log_z = logsumexp(belief[0]);

  // Distribute: the parent's calibrated belief minus v's own upward message,
  // summed onto the separator, is the downward message.
  for (std::size_t i = 1; i < bfs_order_.size(); ++i) {
    const auto v = static_cast<std::size_t>(bfs_order_[i]);
    const auto p = static_cast<std::size_t>(parent_[v]);
    const auto& pmap = parent_maps_[v];
    std::vector<double> down(sep_sizes_[v], 0.0);
    marginalize_logsumexp(belief[p], pmap, down);
    for (std::size_t k = 0; k < down.size(); ++k) down[k] -= upward[v][k];
    for (std::size_t k = 0; k < belief[v].size(); ++k) belief[v][k] += down[up_maps_[v][k]];
  }

  Calibration out;
  out.log_partition = log_z;
  out.beliefs.resize(regions_.scopes.size());
  for (std::size_t i = 0; i < m; ++i) {
    out.beliefs[i] = belief[i];
    normalize_log(out.beliefs[i]);
  }
  for (std::size_t e = 0; e < tree_.edges.size(); ++e) {
    const auto a = static_cast<std::size_t>(tree_.edges[e].first);
    auto& sep = out.beliefs[m + e];
    sep.assign(scope_size(tree_.edge_separators[e], dom), 0.0);
    marginalize_sum(out.beliefs[a], edge_maps_[e], sep);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loopy BP

LoopyEngine::LoopyEngine(StructurePtr structure, BPConfig config)
    : InferenceEngine(std::move(structure)), config_(config) {
  config_.validate();
  const DomainSpec& dom = structure_->domain();
  const std::size_t F = structure_->num_cliques();
  const std::size_t V = structure_->num_vars();
  factors_of_.resize(V);
  var_maps_.resize(F);
  for (std::size_t f = 0; f < F; ++f) {
    const Scope& sc = structure_->clique(f);
    for (std::size_t k = 0; k < sc.size(); ++k) {
      factors_of_[static_cast<std::size_t>(sc[k])].emplace_back(static_cast<int>(f), static_cast<int>(k));
      var_maps_[f].push_back(projection_map(sc, Scope{sc[k]}, dom));
    }
  }
  regions_.scopes = structure_->cliques();
  regions_.counting.assign(F, 1.0);
  for (std::size_t v = 0; v < V; ++v) {
    regions_.scopes.push_back(Scope{static_cast<int>(v)});
    regions_.counting.push_back(1.0 - static_cast<double>(factors_of_[v].size()));
  }
  for (std::size_t f = 0; f < F; ++f) {
    regions_.clique_home.push_back(static_cast<int>(f));
    std::vector<std::size_t> id(structure_->table_size(f));
    std::iota(id.begin(), id.end(), std::size_t{0});
    regions_.clique_maps.push_back(std::move(id));
  }
}

Calibration LoopyEngine::calibrate(const Parameters& theta) const {
  check_parameters(theta);
  const DomainSpec& dom = structure_->domain();
  const std::size_t F = structure_->num_cliques();
  const std::size_t V = structure_->num_vars();

  // f2v[f][k]: log message from factor f to its k-th variable (normalized).
  std::vector<std::vector<std::vector<double>>> f2v(F);
  for (std::size_t f = 0; f < F; ++f)
    for (int v : structure_->clique(f))
      f2v[f].emplace_back(static_cast<std::size_t>(dom.cardinality(v)), -std::log(static_cast<double>(dom.cardinality(v))));

  auto var_to_factor = [&](std::size_t f, std::size_t k) {
    const int v = structure_->clique(f)[k];
    std::vector<double> msg(static_cast<std::size_t>(dom.cardinality(v)), 0.0);
    for (auto [g, pos] : factors_of_[static_cast<std::size_t>(v)]) {
      if (static_cast<std::size_t>(g) == f) continue;
      const auto& in = f2v[static_cast<std::size_t>(g)][static_cast<std::size_t>(pos)];
      for (std::size_t s = 0; s < msg.size(); ++s) msg[s] += in[s];
    }
    const double z = logsumexp(msg);
    for (double& x : msg) x -= z;
    return msg;
  };

  Calibration out;
  out.converged = false;
  std::vector<std::vector<std::vector<double>>> v2f(F);
  const double d = config_.damping;
  for (int it = 1; it <= config_.max_iters; ++it) {
    for (std::size_t f = 0; f < F; ++f) {
      v2f[f].clear();
      for (std::size_t k = 0; k < structure_->clique(f).size(); ++k) v2f[f].push_back(var_to_factor(f, k));
    }
    double residual = 0.0;
    for (std::size_t f = 0; f < F; ++f) {
      const auto blk = theta.block(f);
      std::vector<double> tmp(blk.begin(), blk.end());
      for (std::size_t k = 0; k < v2f[f].size(); ++k)
        for (std::size_t i = 0; i < tmp.size(); ++i) tmp[i] += v2f[f][k][var_maps_[f][k][i]];
      for (std::size_t k = 0; k < v2f[f].size(); ++k) {
        std::vector<double> cavity(tmp);
        for (std::size_t i = 0; i < tmp.size(); ++i) cavity[i] -= v2f[f][k][var_maps_[f][k][i]];
        std::vector<double> fresh(f2v[f][k].size());
        marginalize_logsumexp(cavity, var_maps_[f][k], fresh);
        const double z = logsumexp(fresh);
        auto& old = f2v[f][k];
        for (std::size_t s = 0; s < fresh.size(); ++s) fresh[s] = (1.0 - d) * old[s] + d * (fresh[s] - z);
        const double z2 = logsumexp(fresh);
        for (std::size_t s = 0; s < fresh.size(); ++s) {
          fresh[s] -= z2;
          residual = std::max(residual, std::fabs(fresh[s] - old[s]));
        }
        old = std::move(fresh);
      }
    }
    out.iterations = it;
    out.residual = residual;
    if (residual <= config_.tol) {
      out.converged = true;
      break;
    }
  }

  out.beliefs.resize(F + V);
  double energy = 0.0;
  for (std::size_t f = 0; f < F; ++f) {
    const auto blk = theta.block(f);
    std::vector<double> b(blk.begin(), blk.end());
    for (std::size_t k = 0; k < structure_->clique(f).size(); ++k) {
      auto msg = var_to_factor(f, k);
      for (std::size_t i = 0; i < b.size(); ++i) b[i] += msg[var_maps_[f][k][i]];
    }
    normalize_log(b);
    for (std::size_t i = 0; i < b.size(); ++i) energy += b[i] * blk[i];
    out.beliefs[f] = std::move(b);
  }
  for (std::size_t v = 0; v < V; ++v) {
    std::vector<double> b(static_cast<std::size_t>(dom.cardinality(static_cast<int>(v))), 0.0);
    for (auto [g, pos] : factors_of_[v]) {
      const auto& in = f2v[static_cast<std::size_t>(g)][static_cast<std::size_t>(pos)];
      for (std::size_t s = 0; s < b.size(); ++s) b[s] += in[s];
    }
    normalize_log(b);
    out.beliefs[F + v] = std::move(b);
  }
  out.log_partition = energy + regions_.entropy(out.beliefs);
  return out;
}

// ---------------------------------------------------------------------------

std::unique_ptr<InferenceEngine> make_engine(const StructurePtr& structure,
                                             const std::optional<JunctionTree>& tree,
                                             const BPConfig& bp) {
  if (tree) return std::make_unique<JunctionTreeEngine>(structure, *tree);
  if (auto jt = build_junction_tree(*structure)) return std::make_unique<JunctionTreeEngine>(structure, std::move(*jt));
  return std::make_unique<LoopyEngine>(structure, bp);
}

BPResult sum_product_exact(const Parameters& theta, const JunctionTree& tree) {
  return JunctionTreeEngine(theta.structure_ptr(), tree).run(theta);
}

BPResult loopy_bp(const Parameters& theta, const BPConfig& config) {
  return LoopyEngine(theta.structure_ptr(), config).run(theta);
}

double cgm_entropy(const CliqueTableSet& n, const JunctionTree& tree) {
  const ModelStructure& st = n.structure();
  const DomainSpec& dom = st.domain();
  tree.validate(st);
  if (st.num_cliques() == 0) return 0.0;
  const double N = n.table_total(0);
  if (!(N > 0.0)) throw DomainError("cgm_entropy: tables must have a positive total");

  auto table_for = [&](const Scope& scope) {
    for (std::size_t c = 0; c < st.num_cliques(); ++c) {
      if (!is_subset(scope, st.clique(c))) continue;
      std::vector<double> t(scope_size(scope, dom), 0.0);
      marginalize_sum(n.block(c), projection_map(st.clique(c), scope, dom), t);
      for (double& v : t) v /= N;
      return t;
    }
    throw StructuralError("cgm_entropy: tree clique not determined by the model cliques");
  };

  double h = 0.0;
  for (const Scope& c : tree.tree_cliques) h += entropy(table_for(c));
  for (std::size_t s = 0; s < tree.separators.size(); ++s)
    h -= tree.multiplicity[s] * entropy(table_for(tree.separators[s]));
  return N * h;
}

}  // namespace dpgm
