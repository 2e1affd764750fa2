#pragma once

#include <Eigen/Dense>
#include <functional>

namespace lmmrec::detail {

// Value-and-gradient callback. Must be smooth inside the box.
using Objective =
    std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct OptimOptions {
  int max_iter = 200;
  double tol_f = 1e-8;
  double tol_grad = 1e-6;
  double max_step = 10.0;  // cap on the infinity norm of one step
};

struct OptimResult {
  Eigen::VectorXd x;
  double f = 0.0;
  Eigen::VectorXd grad;
  int iterations = 0;
  bool converged = false;
};

// Box-constrained BFGS ascent with backtracking line search. When the
// quasi-Newton step degenerates (no ascent possible along the proposed
// direction) it falls back to golden-section sweeps per coordinate before
// giving up. Convergence requires both |delta f| < tol_f and
// ||grad||_inf < tol_grad.
OptimResult maximize_bfgs(const Objective& fn, Eigen::VectorXd x0,
                          const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper,
                          const OptimOptions& opts);

}  // namespace lmmrec::detail
