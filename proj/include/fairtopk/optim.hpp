#pragma once

#include <functional>
#include <vector>

namespace fairtopk {

struct OptimResult {
    std::vector<double> x;
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

using Objective = std::function<double(const std::vector<double>&)>;
using Gradient =
    std::function<void(const std::vector<double>&, std::vector<double>&)>;

// Gradient descent with backtracking line search (Armijo). Stops when the
// euclidean gradient norm drops below `tolerance` or after `max_iters`
// steps.
OptimResult minimize_gd(const Objective& f, const Gradient& grad,
                        std::vector<double> x0, double tolerance,
                        int max_iters);

// Proximal gradient for f(x) = g(x) + lambda * sum_i in mask |x_i|, with g
// smooth. `l1_mask[i]` marks coordinates the l1 term applies to (the
// intercept stays unpenalized). Convergence is measured on the proximal
// gradient mapping.
OptimResult minimize_proximal(const Objective& smooth, const Gradient& grad,
                              std::vector<double> x0, double l1_strength,
                              const std::vector<char>& l1_mask,
                              double tolerance, int max_iters);

}  // namespace fairtopk
