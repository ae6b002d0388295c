#include "fairtopk/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fairtopk {

namespace {

double norm(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double soft_threshold(double x, double t)
{
    if (x > t) return x - t;
    if (x < -t) return x + t;
    return 0.0;
}

}  // namespace

OptimResult minimize_gd(const Objective& f, const Gradient& grad,
                        std::vector<double> x0, double tolerance, int max_iters)
{
    OptimResult result;
    result.x = std::move(x0);
    std::vector<double> g(result.x.size());
    std::vector<double> trial(result.x.size());
    double fx = f(result.x);
    double step = 1.0;
    for (int iter = 0; iter < max_iters; ++iter) {
        grad(result.x, g);
        const double gnorm = norm(g);
        result.gradient_norm = gnorm;
        result.iterations = iter;
        if (!std::isfinite(fx)) throw std::runtime_error("non-finite loss");
        if (gnorm <= tolerance) {
            result.converged = true;
            break;
        }
        // backtracking from a slightly enlarged previous step
        step = std::min(step * 2.0, 1e8);
        double ftrial = 0.0;
        while (true) {
            for (std::size_t i = 0; i < result.x.size(); ++i)
                trial[i] = result.x[i] - step * g[i];
            ftrial = f(trial);
            if (ftrial <= fx - 0.5 * step * gnorm * gnorm || step < 1e-16) break;
            step *= 0.5;
        }
        if (ftrial > fx && step < 1e-16) break;  // no descent possible
        result.x.swap(trial);
        fx = ftrial;
    }
    result.value = fx;
    if (!result.converged) {
        grad(result.x, g);
        result.gradient_norm = norm(g);
    }
    return result;
}

OptimResult minimize_proximal(const Objective& smooth, const Gradient& grad,
                              std::vector<double> x0, double l1_strength,
                              const std::vector<char>& l1_mask,
                              double tolerance, int max_iters)
{
    if (l1_mask.size() != x0.size())
        throw std::invalid_argument("minimize_proximal: mask size mismatch");
    OptimResult result;
    result.x = std::move(x0);
    const std::size_t n = result.x.size();
    std::vector<double> g(n);
    std::vector<double> trial(n);
    double fx = smooth(result.x);
    double step = 1.0;
    for (int iter = 0; iter < max_iters; ++iter) {
        grad(result.x, g);
        result.iterations = iter;
        step = std::min(step * 2.0, 1e8);
        while (true) {
            for (std::size_t i = 0; i < n; ++i) {
                const double raw = result.x[i] - step * g[i];
                trial[i] = l1_mask[i] ? soft_threshold(raw, step * l1_strength)
                                      : raw;
            }
            // quadratic upper bound test for the smooth part
            double quad = fx;
            double dist = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = trial[i] - result.x[i];
                quad += g[i] * d;
                dist += d * d;
            }
            quad += dist / (2.0 * step);
            if (smooth(trial) <= quad + 1e-12 || step < 1e-16) break;
            step *= 0.5;
        }
        // proximal gradient mapping norm as the convergence measure
        double map_norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = (result.x[i] - trial[i]) / step;
            map_norm += d * d;
        }
        map_norm = std::sqrt(map_norm);
        result.gradient_norm = map_norm;
        result.x.swap(trial);
        fx = smooth(result.x);
        if (!std::isfinite(fx)) throw std::runtime_error("non-finite loss");
        if (map_norm <= tolerance) {
            result.converged = true;
            break;
        }
    }
    result.value = fx;
    return result;
}

}  // namespace fairtopk
