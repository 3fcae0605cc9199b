#include "dpgm/sampling.hpp"

#include <algorithm>

namespace dpgm {

JunctionTreeSampler::JunctionTreeSampler(const Parameters& theta, const JunctionTree& tree)
    : domain_(theta.structure().domain()) {
  const JunctionTreeEngine engine(theta.structure_ptr(), tree);
  const Calibration cal = engine.calibrate(theta);
  const std::size_t m = tree.tree_cliques.size();

  std::vector<int> order{0};
  std::vector<int> parent_edge(m, -1);
  std::vector<bool> seen(m, false);
  seen[0] = true;
  for (std::size_t head = 0; head < order.size(); ++head) {
    const int u = order[head];
    for (std::size_t e = 0; e < tree.edges.size(); ++e) {
      auto [a, b] = tree.edges[e];
      const int w = a == u ? b : (b == u ? a : -1);
      if (w < 0 || seen[static_cast<std::size_t>(w)]) continue;
      seen[static_cast<std::size_t>(w)] = true;
      parent_edge[static_cast<std::size_t>(w)] = static_cast<int>(e);
      order.push_back(w);
    }
  }

  for (int idx : order) {
    const auto i = static_cast<std::size_t>(idx);
    Node node;
    node.scope = tree.tree_cliques[i];
    if (parent_edge[i] >= 0) node.separator = tree.edge_separators[static_cast<std::size_t>(parent_edge[i])];
    for (std::size_t k = 0; k < node.scope.size(); ++k) {
      if (std::binary_search(node.separator.begin(), node.separator.end(), node.scope[k])) {
        node.separator_positions.push_back(static_cast<int>(k));
      } else {
        node.free_positions.push_back(static_cast<int>(k));
        node.free_cards.push_back(domain_.cardinality(node.scope[k]));
        node.free_size *= static_cast<std::size_t>(node.free_cards.back());
      }
    }
    const std::size_t sep_size = scope_size(node.separator, domain_);
    node.cdf.assign(sep_size * node.free_size, 0.0);
    const auto& belief = cal.beliefs[i];
    for (std::size_t k = 0; k < belief.size(); ++k) {
      const std::vector<int> a = config_assignment(node.scope, domain_, k);
      std::size_t s = 0, r = 0;
      for (int p : node.separator_positions)
        s = s * static_cast<std::size_t>(domain_.cardinality(node.scope[static_cast<std::size_t>(p)])) + static_cast<std::size_t>(a[static_cast<std::size_t>(p)]);
      for (int p : node.free_positions)
        r = r * static_cast<std::size_t>(domain_.cardinality(node.scope[static_cast<std::size_t>(p)])) + static_cast<std::size_t>(a[static_cast<std::size_t>(p)]);
      node.cdf[s * node.free_size + r] = belief[k];
    }
    for (std::size_t s = 0; s < sep_size; ++s) {
      const auto row = std::span<double>(node.cdf).subspan(s * node.free_size, node.free_size);
      double total = 0.0;
      for (double v : row) total += v;
      double acc = 0.0;
      for (double& v : row) {
        acc += total > 0.0 ? v / total : 1.0 / static_cast<double>(row.size());
        v = acc;
      }
      row.back() = 1.0;
    }
    nodes_.push_back(std::move(node));
  }
}

void JunctionTreeSampler::draw(Rng& rng, std::span<int> out) const {
  for (const Node& node : nodes_) {
    std::size_t s = 0;
    for (int p : node.separator_positions) {
      const int v = node.scope[static_cast<std::size_t>(p)];
      s = s * static_cast<std::size_t>(domain_.cardinality(v)) + static_cast<std::size_t>(out[static_cast<std::size_t>(v)]);
    }
    const auto row = std::span<const double>(node.cdf).subspan(s * node.free_size, node.free_size);
    const double u = rng.uniform();
    auto r = static_cast<std::size_t>(std::upper_bound(row.begin(), row.end(), u) - row.begin());
    if (r >= node.free_size) r = node.free_size - 1;
    for (std::size_t k = node.free_positions.size(); k-- > 0;) {
      const auto card = static_cast<std::size_t>(node.free_cards[k]);
      out[static_cast<std::size_t>(node.scope[static_cast<std::size_t>(node.free_positions[k])])] = static_cast<int>(r % card);
      r /= card;
    }
  }
}

Dataset JunctionTreeSampler::sample(std::size_t count, Rng& rng) const {
  Dataset data(domain_.num_vars());
  data.reserve(count);
  std::vector<int> x(domain_.num_vars(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    draw(rng, x);
    data.add(x);
  }
  return data;
}

Dataset sample(const Parameters& theta, std::size_t count, const JunctionTree& tree, Rng& rng) {
  return JunctionTreeSampler(theta, tree).sample(count, rng);
}

}  // namespace dpgm
