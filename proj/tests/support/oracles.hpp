#pragma once

// Independent reference implementations used only by tests. Everything
// here goes through dense V = I + sum_k gamma_k Z_k Z_k', never through
// the mixed-model-equation path it is checking.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "lmmrec/design.hpp"
#include "lmmrec/formula.hpp"
#include "lmmrec/observation.hpp"
#include "lmmrec/rng.hpp"

namespace oracle {

/// Dense V(gamma) over all blocks (a zero ratio contributes nothing).
Eigen::MatrixXd dense_v(const lmmrec::DesignMatrices& d,
                        const Eigen::VectorXd& gamma);

struct GlsSolution {
  Eigen::VectorXd tau;
  Eigen::VectorXd u;
};

/// Explicit GLS: tau = (X'V^-1X)^-1 X'V^-1 y over kept columns, then
/// u_k = gamma_k Z_k' V^-1 (y - X tau).
GlsSolution gls_solution(const lmmrec::DesignMatrices& d,
                         const Eigen::VectorXd& gamma);

/// Profiled restricted log-likelihood via dense V and the explicit REML
/// projection P. Returns (loglik, sigma2).
std::pair<double, double> dense_reml_loglik(const lmmrec::DesignMatrices& d,
                                            const Eigen::VectorXd& gamma);

/// Profiled marginal (ML) log-likelihood via dense V.
std::pair<double, double> dense_ml_loglik(const lmmrec::DesignMatrices& d,
                                          const Eigen::VectorXd& gamma);

/// Central finite differences of f at x, relative step h_rel per
/// coordinate (absolute floor h_abs).
Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h_rel = 1e-5, double h_abs = 1e-7);

/// Balanced one-way ANOVA estimates: MSE and MSA for groups x per-group
/// observations laid out as y[group][obs].
struct BalancedAnova {
  double mse = 0.0;
  double msa = 0.0;
  double sigma2_e = 0.0;  // MSE
  double sigma2_u = 0.0;  // max(0, (MSA - MSE) / n_per_group)
};
BalancedAnova balanced_one_way(const std::vector<std::vector<double>>& y);

/// Two-sided Kolmogorov-Smirnov test against U(0, 1).
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
KsResult ks_uniform(std::vector<double> values);

/// Spearman rank correlation (average ranks on ties).
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Random small mixed-model instance for equivalence sweeps: 1-2 random
/// factors, 0-2 fixed factors (intercept kept when none), N <= max_rows.
struct RandomInstance {
  lmmrec::ModelFormula formula;
  lmmrec::ObservationTable table;
};
RandomInstance random_instance(lmmrec::Rng& rng, Eigen::Index max_rows = 50,
                               int max_random_factors = 2);

/// Random valid formula for parser round-trip sweeps.
lmmrec::ModelFormula random_formula(lmmrec::Rng& rng);

}  // namespace oracle
