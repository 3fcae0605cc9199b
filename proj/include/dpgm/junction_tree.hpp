#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpgm/model.hpp"

namespace dpgm {

// Tree over cliques with the running-intersection property. Separators are
// stored per edge and also grouped into distinct sets with multiplicity nu(S).
struct JunctionTree {
  std::vector<Scope> tree_cliques;
  std::vector<std::pair<int, int>> edges;
  std::vector<Scope> edge_separators;
  std::vector<Scope> separators;
  std::vector<int> multiplicity;

  // Every variable's containing cliques form a connected subtree.
  bool has_running_intersection(std::size_t num_vars) const;

  // Throws StructuralError unless this is a spanning tree with running
  // intersection in which every clique of `structure` fits in a tree clique.
  void validate(const ModelStructure& structure) const;

  // Index of the first tree clique containing `scope`, or -1.
  int home_of(const Scope& scope) const;
};

// Junction tree of the independence graph's maximal cliques when that graph
// is chordal; std::nullopt otherwise. No fill-in edges are ever added, so a
// non-decomposable structure must go to loopy BP or come with an explicit
// triangulation (junction_tree_from_cliques).
std::optional<JunctionTree> build_junction_tree(const ModelStructure& structure);

// Junction tree over caller-supplied cliques (e.g. a hand triangulation).
// Connects them by a maximum-weight spanning tree on separator size and
// validates the result against `structure`.
JunctionTree junction_tree_from_cliques(const ModelStructure& structure,
                                        std::vector<Scope> tree_cliques);

}  // namespace dpgm
