#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace spinqoct {

// Limited-memory BFGS minimizer with a strong-Wolfe cubic line search.
// The objective callback returns f(x) and fills the gradient in place.

struct LbfgsOptions {
    int max_iterations = 200;
    int memory = 10;
    double grad_tolerance = 1e-10;  // stop when ||g||_inf drops below
    double f_tolerance = 0.0;       // stop when |f_k - f_{k-1}| drops below
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_line_search = 40;
};

struct LbfgsResult {
    double f = 0.0;
    int iterations = 0;
    bool converged = false;       // a tolerance fired before the iteration cap
    std::vector<double> history;  // accepted f after each iteration
};

using Objective =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;
using IterationCallback = std::function<void(
    int iter, double f, const Eigen::VectorXd& x, const Eigen::VectorXd& grad)>;

LbfgsResult lbfgs_minimize(const Objective& fg, Eigen::VectorXd& x,
                           const LbfgsOptions& opt,
                           const IterationCallback& callback = nullptr);

// Steepest descent with backtracking, a robust fallback.
LbfgsResult steepest_minimize(const Objective& fg, Eigen::VectorXd& x,
                              const LbfgsOptions& opt,
                              const IterationCallback& callback = nullptr);

}  // namespace spinqoct
