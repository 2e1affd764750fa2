#include "optimize.hpp"

#include <cmath>

namespace lmmrec::detail {

namespace {

Eigen::VectorXd clamp_box(Eigen::VectorXd x, const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper) {
  return x.cwiseMax(lower).cwiseMin(upper);
}

// One-dimensional golden-section ascent on coordinate j over
// [x_j - width, x_j + width] intersected with the box.
bool golden_coordinate(const Objective& fn, Eigen::VectorXd& x, double& f,
                       Eigen::Index j, double width,
                       const Eigen::VectorXd& lower,
                       const Eigen::VectorXd& upper) {
  const double golden = 0.6180339887498949;
  double a = std::max(lower(j), x(j) - width);
  double b = std::min(upper(j), x(j) + width);
  if (!(b > a)) return false;

  Eigen::VectorXd grad_unused;
  auto value_at = [&](double t) {
    Eigen::VectorXd xt = x;
    xt(j) = t;
    return fn(xt, grad_unused);
  };

  double t1 = b - golden * (b - a);
  double t2 = a + golden * (b - a);
  double f1 = value_at(t1);
  double f2 = value_at(t2);
  for (int it = 0; it < 80 && (b - a) > 1e-12; ++it) {
    if (f1 < f2) {
      a = t1;
      t1 = t2;
      f1 = f2;
      t2 = a + golden * (b - a);
      f2 = value_at(t2);
    } else {
      b = t2;
      t2 = t1;
      f2 = f1;
      t1 = b - golden * (b - a);
      f1 = value_at(t1);
    }
  }
  const double best_t = f1 >= f2 ? t1 : t2;
  const double best_f = std::max(f1, f2);
  if (best_f > f) {
    x(j) = best_t;
    f = best_f;
    return true;
  }
  return false;
}

}  // namespace

OptimResult maximize_bfgs(const Objective& fn, Eigen::VectorXd x0,
                          const Eigen::VectorXd& lower,
                          const Eigen::VectorXd& upper,
                          const OptimOptions& opts) {
  const Eigen::Index n = x0.size();
  OptimResult res;
  res.x = clamp_box(std::move(x0), lower, upper);
  res.grad.resize(n);
  res.f = fn(res.x, res.grad);

  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  double last_delta_f = std::numeric_limits<double>::infinity();

  for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
    if (std::abs(last_delta_f) < opts.tol_f &&
        res.grad.lpNorm<Eigen::Infinity>() < opts.tol_grad) {
      res.converged = true;
      return res;
    }

    Eigen::VectorXd dir = hinv * res.grad;
    if (dir.dot(res.grad) <= 0.0) {  // not an ascent direction: reset
      hinv.setIdentity();
      dir = res.grad;
    }
    const double dn = dir.lpNorm<Eigen::Infinity>();
    if (dn > opts.max_step) dir *= opts.max_step / dn;

    // Backtracking Armijo search on the (box-projected) step.
    bool accepted = false;
    Eigen::VectorXd xn, gn(n);
    double fnew = res.f;
    double t = 1.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      xn = clamp_box(res.x + t * dir, lower, upper);
      const Eigen::VectorXd step = xn - res.x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) continue;
      fnew = fn(xn, gn);
      if (fnew >= res.f + 1e-4 * res.grad.dot(step)) {
        accepted = true;
        break;
      }
    }

    if (!accepted) {
      // Quasi-Newton step degenerated; per-coordinate golden sections.
      bool improved = false;
      double f = res.f;
      Eigen::VectorXd x = res.x;
      for (Eigen::Index j = 0; j < n; ++j)
        improved = golden_coordinate(fn, x, f, j, 2.0, lower, upper) || improved;
      if (!improved) {
        res.converged = res.grad.lpNorm<Eigen::Infinity>() < opts.tol_grad;
        return res;
      }
      last_delta_f = f - res.f;
      res.x = x;
      res.f = fn(res.x, res.grad);
      hinv.setIdentity();
      continue;
    }

    const Eigen::VectorXd s = xn - res.x;
    const Eigen::VectorXd yv = -(gn - res.grad);  // curvature pair for -f
    last_delta_f = fnew - res.f;
    res.x = xn;
    res.f = fnew;
    res.grad = gn;

    const double sy = yv.dot(s);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd vmat =
          Eigen::MatrixXd::Identity(n, n) - rho * s * yv.transpose();
      hinv = vmat * hinv * vmat.transpose() + rho * s * s.transpose();
    }
  }

  res.converged = std::abs(last_delta_f) < opts.tol_f &&
                  res.grad.lpNorm<Eigen::Infinity>() < opts.tol_grad;
  return res;
}

}  // namespace lmmrec::detail
