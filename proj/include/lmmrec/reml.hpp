#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lmmrec/design.hpp"
#include "lmmrec/formula.hpp"
#include "lmmrec/observation.hpp"

namespace lmmrec {

/// Variance parameters theta: residual variance sigma^2 and one
/// dimensionless ratio gamma_k >= 0 per random factor, so
/// var(u_k) = sigma^2 gamma_k I and var(e) = sigma^2 I.
struct VarianceComponents {
  double sigma2 = 1.0;
  Eigen::VectorXd gamma;
};

/// Henderson's coefficient matrix and right-hand side:
///   C = [X'X  X'Z; Z'X  Z'Z + G^-1],  rhs = [X'y; Z'y]
/// with X restricted to kept columns and G^-1 = blockdiag(gamma_k^-1 I).
struct MixedModelEquations {
  Eigen::SparseMatrix<double> C;
  Eigen::VectorXd rhs;
  Eigen::Index n_fixed = 0;
  Eigen::Index n_random = 0;
};

/// Retained symmetric positive-definite factorization of C; backs the
/// solution, the log-determinant, and sigma^2 C^-1 covariance queries.
class MmeFactor {
 public:
  explicit MmeFactor(const Eigen::SparseMatrix<double>& C);

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve_many(const Eigen::MatrixXd& b) const;
  /// Dense C^-1; intended for the modest dimensions of these systems.
  Eigen::MatrixXd inverse() const;
  double log_det() const { return log_det_; }
  Eigen::Index dim() const { return ldlt_.matrixL().rows(); }

 private:
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
  double log_det_ = 0.0;
};

struct MmeSolution {
  Eigen::VectorXd tau;  // fixed effects (kept columns)
  Eigen::VectorXd u;    // random effects
  std::shared_ptr<const MmeFactor> factor;
};

/// Assemble Henderson's equations at the given variance ratios.
/// Requires every gamma_k > 0 (G must be invertible); callers wanting a
/// gamma_k = 0 model drop that block instead (the GLS reduction).
MixedModelEquations assemble_mme(const DesignMatrices& d,
                                 const VarianceComponents& v);

/// Exact solve of C [tau; u] = rhs; the factorization is retained on the
/// returned solution for covariance queries. Throws NumericError when C
/// is not positive definite (aliasing not removed, or gamma <= 0).
MmeSolution solve_mme(const MixedModelEquations& m);

struct RemlLoglik {
  double loglik = 0.0;
  double sigma2 = 0.0;
};

/// Profiled restricted log-likelihood at the given ratios (gamma_k >= 0;
/// zero ratios drop their block). With V = I + sum_k gamma_k Z_k Z_k' and
/// P the REML projection,
///   sigma2 = y'Py / (N - p*),
///   loglik = -1/2 [ (N - p*)(log(2 pi sigma2) + 1) + log|V| + log|X'V^-1 X| ],
/// computed through the mixed-model-equation factorization rather than a
/// dense V. Throws DataError when N <= p*.
RemlLoglik reml_loglik(const DesignMatrices& d, const Eigen::VectorXd& gamma);

/// Profiled marginal (ML) log-likelihood; divisor N, no |X'V^-1 X| term.
/// Used by the likelihood-ratio test on fixed effects.
RemlLoglik ml_loglik(const DesignMatrices& d, const Eigen::VectorXd& gamma);

struct RemlLoglikGrad {
  double loglik = 0.0;
  double sigma2 = 0.0;
  Eigen::VectorXd grad;  // d loglik / d log gamma_k, blocks with gamma > 0
};

/// Analytic gradient of the profiled restricted log-likelihood in
/// rho = log gamma coordinates, via the MME identities
/// Z'Py = G^-1 u_hat and Z'PZ = G^-1 - G^-1 C^uu G^-1. This is the
/// derivative the fitter ascends; requires every gamma_k > 0.
RemlLoglikGrad reml_loglik_gradient(const DesignMatrices& d,
                                    const Eigen::VectorXd& gamma);

struct FitOptions {
  int max_iter = 200;
  double tol_loglik = 1e-8;   // |delta loglik| threshold
  double tol_grad = 1e-6;     // max-norm of d loglik / d log gamma
  double gamma_floor = 1e-8;  // ratios at/below this clamp to zero
  double gamma_ceiling = 1e8;
  double sigma2_floor = 1e-12;  // lower bound for degenerate (constant) data
};

/// Level-to-coefficient maps kept on a fit so prediction works by label,
/// including on tables whose level sets extend the training ones.
struct FixedTermInfo {
  std::string factor;
  std::vector<std::string> levels;
  std::vector<Eigen::Index> coef;  // per level: index into tau_hat, or -1
};

struct RandomTermInfo {
  std::string factor;
  std::vector<std::string> levels;
  Eigen::Index offset = 0;  // into u_hat
  bool active = true;       // false when gamma_k clamped to zero
};

struct FitResult {
  ModelFormula formula;
  std::shared_ptr<const ObservationTable> table;  // training data

  Eigen::VectorXd tau_hat;              // kept fixed-effect estimates
  std::vector<std::string> tau_labels;  // labels of kept columns
  std::optional<Eigen::Index> intercept_coef;
  std::vector<FixedTermInfo> fixed_terms;

  Eigen::VectorXd u_hat;  // all blocks; zeros where gamma clamped to 0
  std::vector<RandomTermInfo> random_terms;

  VarianceComponents theta;
  std::shared_ptr<const MmeFactor> mme;  // C at the optimum (active blocks)

  double loglik_restricted = 0.0;
  std::optional<double> loglik_ml;  // set when fitted by ML

  Eigen::Index n_obs = 0;
  int n_params = 0;  // kept fixed + positive ratios + residual variance
  bool converged = false;
  int iterations = 0;
  std::vector<std::string> dropped_columns;

  Eigen::Index n_fixed() const { return tau_hat.size(); }
  Eigen::Index n_random_active() const {
    return mme ? mme->dim() - n_fixed() : 0;
  }
};

/// REML fit: maximizes the profiled restricted log-likelihood over
/// rho_k = log gamma_k with a quasi-Newton ascent and analytic gradient,
/// clamping ratios that hit the floor to zero and refitting the rest.
/// Initialization gamma_k = 1; deterministic for identical inputs.
FitResult fit_reml(const ModelFormula& f, const ObservationTable& t,
                   const FitOptions& opts = {});
FitResult fit_reml(const ModelFormula& f,
                   std::shared_ptr<const ObservationTable> t,
                   const FitOptions& opts = {});

/// Same search on the marginal (ML) objective; fills loglik_ml.
FitResult fit_ml(const ModelFormula& f, const ObservationTable& t,
                 const FitOptions& opts = {});
FitResult fit_ml(const ModelFormula& f,
                 std::shared_ptr<const ObservationTable> t,
                 const FitOptions& opts = {});

/// Eq.-style estimator covariance var(tau_hat, u_hat - u) = sigma2 C^-1
/// over the kept fixed block and the active random blocks, via the
/// retained factorization. Standard errors are the square roots of the
/// diagonal.
Eigen::MatrixXd estimate_covariance(const FitResult& fit);

/// X_new tau_hat + Z_new u_hat with label-based matching: a level unseen
/// in training (or whose column was aliased away) contributes zero, which
/// is the population-level prediction for that term. newdata must declare
/// every factor the formula uses.
Eigen::VectorXd predict(const FitResult& fit, const ObservationTable& newdata);

}  // namespace lmmrec
