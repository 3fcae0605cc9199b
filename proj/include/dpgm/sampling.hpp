#pragma once

#include <vector>

#include "dpgm/inference.hpp"
#include "dpgm/model.hpp"
#include "dpgm/random.hpp"

namespace dpgm {

// Exact ancestral sampler over a calibrated junction tree: the root clique is
// drawn from its marginal, then each child clique's remaining variables are
// drawn conditioned on the separator it shares with its parent.
class JunctionTreeSampler {
 public:
  JunctionTreeSampler(const Parameters& theta, const JunctionTree& tree);

  void draw(Rng& rng, std::span<int> out) const;
  Dataset sample(std::size_t count, Rng& rng) const;

 private:
  struct Node {
    Scope scope;
    Scope separator;
    std::vector<int> separator_positions;  // positions of separator vars in scope
    std::vector<int> free_positions;       // positions of the remaining vars
    std::vector<int> free_cards;
    std::size_t free_size = 1;
    // cdf[s * free_size + r]: cumulative conditional distribution of the
    // remaining vars (row-major index r) given separator configuration s.
    std::vector<double> cdf;
  };

  DomainSpec domain_;
  std::vector<Node> nodes_;  // in sampling order, root first
};

Dataset sample(const Parameters& theta, std::size_t count, const JunctionTree& tree, Rng& rng);

}  // namespace dpgm
