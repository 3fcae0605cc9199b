#include "dpgm/junction_tree.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

#include "dpgm/table_ops.hpp"

namespace dpgm {
namespace {

using Adjacency = std::vector<std::vector<bool>>;

Adjacency adjacency(const ModelStructure& s) {
  const std::size_t T = s.num_vars();
  Adjacency adj(T, std::vector<bool>(T, false));
  for (auto [u, v] : s.graph_edges()) adj[u][v] = adj[v][u] = true;
  return adj;
}

// Maximum cardinality search; ties go to the smallest vertex.
std::vector<int> mcs_order(const Adjacency& adj) {
  const std::size_t T = adj.size();
  std::vector<int> weight(T, 0), order;
  std::vector<bool> done(T, false);
  for (std::size_t step = 0; step < T; ++step) {
    int best = -1;
    for (std::size_t v = 0; v < T; ++v)
      if (!done[v] && (best < 0 || weight[v] > weight[static_cast<std::size_t>(best)])) best = static_cast<int>(v);
    done[static_cast<std::size_t>(best)] = true;
    order.push_back(best);
    for (std::size_t v = 0; v < T; ++v)
      if (!done[v] && adj[static_cast<std::size_t>(best)][v]) ++weight[v];
  }
  return order;
}

// Kruskal on separator size, deterministic tie-breaking by edge index.
void connect(JunctionTree& jt) {
  const std::size_t m = jt.tree_cliques.size();
  struct Cand {
    std::size_t weight;
    int a, b;
  };
  std::vector<Cand> cands;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b)
      cands.push_back({scope_intersection(jt.tree_cliques[a], jt.tree_cliques[b]).size(),
                       static_cast<int>(a), static_cast<int>(b)});
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Cand& x, const Cand& y) { return x.weight > y.weight; });
  std::vector<int> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    return x;
  };
  for (const Cand& c : cands) {
    int ra = find(c.a), rb = find(c.b);
    if (ra == rb) continue;
    parent[static_cast<std::size_t>(ra)] = rb;
    jt.edges.emplace_back(c.a, c.b);
    jt.edge_separators.push_back(scope_intersection(jt.tree_cliques[static_cast<std::size_t>(c.a)], jt.tree_cliques[static_cast<std::size_t>(c.b)]));
  }
  std::map<Scope, int> mult;
  for (const Scope& s : jt.edge_separators) ++mult[s];
  for (const auto& [s, k] : mult) {
    jt.separators.push_back(s);
    jt.multiplicity.push_back(k);
  }
}

}  // namespace

bool JunctionTree::has_running_intersection(std::size_t num_vars) const {
  const std::size_t m = tree_cliques.size();
  for (std::size_t v = 0; v < num_vars; ++v) {
    std::vector<bool> holds(m);
    std::size_t count = 0, start = m;
    for (std::size_t i = 0; i < m; ++i) {
      holds[i] = std::binary_search(tree_cliques[i].begin(), tree_cliques[i].end(), static_cast<int>(v));
      if (holds[i]) {
        ++count;
        if (start == m) start = i;
      }
    }
    if (count <= 1) continue;
    // Flood fill through edges whose endpoints both contain v.
    std::vector<bool> seen(m, false);
    std::vector<std::size_t> stack{start};
    seen[start] = true;
    std::size_t reached = 1;
    while (!stack.empty()) {
      std::size_t u = stack.back();
      stack.pop_back();
      for (auto [a, b] : edges) {
        std::size_t w;
        if (static_cast<std::size_t>(a) == u) w = static_cast<std::size_t>(b);
        else if (static_cast<std::size_t>(b) == u) w = static_cast<std::size_t>(a);
        else continue;
        if (holds[w] && !seen[w]) {
          seen[w] = true;
          ++reached;
          stack.push_back(w);
        }
      }
    }
    if (reached != count) return false;
  }
  return true;
}

void JunctionTree::validate(const ModelStructure& structure) const {
  const std::size_t m = tree_cliques.size();
  if (m == 0) throw StructuralError("junction tree has no cliques");
  if (edges.size() != m - 1 || edge_separators.size() != edges.size())
    throw StructuralError("junction tree must have exactly one edge fewer than cliques");
  int total = std::accumulate(multiplicity.begin(), multiplicity.end(), 0);
  if (static_cast<std::size_t>(total) != m - 1) throw StructuralError("separator multiplicities do not sum to |cliques| - 1");
  for (const Scope& c : tree_cliques)
    for (int v : c)
      if (v < 0 || static_cast<std::size_t>(v) >= structure.num_vars())
        throw StructuralError("junction tree clique variable out of range");
  // Connected: m - 1 edges plus connectivity means a tree.
  std::vector<int> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
    return x;
  };
  for (auto [a, b] : edges) {
    int ra = find(a), rb = find(b);
    if (ra == rb) throw StructuralError("junction tree edges contain a cycle");
    parent[static_cast<std::size_t>(ra)] = rb;
  }
  if (!has_running_intersection(structure.num_vars()))
    throw StructuralError("junction tree violates running intersection");
  for (const Scope& c : structure.cliques())
    if (home_of(c) < 0) throw StructuralError("model clique not covered by any tree clique");
  std::vector<bool> covered(structure.num_vars(), false);
  for (const Scope& c : tree_cliques)
    for (int v : c) covered[static_cast<std::size_t>(v)] = true;
  if (std::find(covered.begin(), covered.end(), false) != covered.end())
    throw StructuralError("junction tree does not cover every variable");
}

int JunctionTree::home_of(const Scope& scope) const {
  for (std::size_t i = 0; i < tree_cliques.size(); ++i)
    if (is_subset(scope, tree_cliques[i])) return static_cast<int>(i);
  return -1;
}

std::optional<JunctionTree> build_junction_tree(const ModelStructure& structure) {
  const Adjacency adj = adjacency(structure);
  const std::vector<int> order = mcs_order(adj);
  const std::size_t T = order.size();
  std::vector<std::size_t> rank(T);
  for (std::size_t i = 0; i < T; ++i) rank[static_cast<std::size_t>(order[i])] = i;

  // Reverse MCS order is a perfect elimination order iff the graph is
  // chordal: every vertex's earlier-visited neighbours must be pairwise
  // adjacent. Those neighbourhoods (plus the vertex) are the candidate cliques.
  std::vector<Scope> candidates;
  for (std::size_t i = 0; i < T; ++i) {
    const int v = order[i];
    Scope c{v};
    for (std::size_t u = 0; u < T; ++u)
      if (adj[static_cast<std::size_t>(v)][u] && rank[u] < i) c.push_back(static_cast<int>(u));
    for (std::size_t a = 1; a < c.size(); ++a)
      for (std::size_t b = a + 1; b < c.size(); ++b)
        if (!adj[static_cast<std::size_t>(c[a])][static_cast<std::size_t>(c[b])]) return std::nullopt;
    std::sort(c.begin(), c.end());
    candidates.push_back(std::move(c));
  }
  std::set<Scope> maximal;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < candidates.size() && !dominated; ++j)
      if (i != j && candidates[j].size() > candidates[i].size() && is_subset(candidates[i], candidates[j]))
        dominated = true;
    if (!dominated) maximal.insert(candidates[i]);
  }
  JunctionTree jt;
  jt.tree_cliques.assign(maximal.begin(), maximal.end());
  connect(jt);
  jt.validate(structure);
  return jt;
}

JunctionTree junction_tree_from_cliques(const ModelStructure& structure,
                                        std::vector<Scope> tree_cliques) {
  for (Scope& c : tree_cliques) {
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
  }
  JunctionTree jt;
  jt.tree_cliques = std::move(tree_cliques);
  connect(jt);
  jt.validate(structure);
  return jt;
}

}  // namespace dpgm
