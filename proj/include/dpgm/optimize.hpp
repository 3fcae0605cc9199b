#pragma once

#include <functional>
#include <span>
#include <vector>

namespace dpgm {

// Objective to maximize. Returns the value at x and writes the gradient.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

struct AscentOptions {
  double grad_tol = 1e-6;  // stop once the gradient's max-abs entry is below this
  int max_iters = 500;
  int memory = 10;         // L-BFGS history length
};

struct AscentResult {
  std::vector<double> x;
  double value = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  // Objective after every accepted step, starting with the initial point.
  std::vector<double> trace;
};

AscentResult maximize_lbfgs(const Objective& f, std::vector<double> x0, const AscentOptions& opts);
AscentResult maximize_gradient(const Objective& f, std::vector<double> x0, const AscentOptions& opts);

}  // namespace dpgm
