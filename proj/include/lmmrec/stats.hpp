#pragma once

#include <string>

#include "lmmrec/reml.hpp"

namespace lmmrec {

/// Whole-factor Wald chi-square: statistic, its degrees of freedom
/// (number of independent contrasts) and the upper-tail p-value.
struct WaldTest {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
};

/// Tests H0: all successive differences among the factor's kept level
/// coefficients are zero, W = (L tau)' [L var(tau) L']^-1 (L tau) against
/// chi-square with rank(L) df. The factor must be fixed in the fit and
/// keep at least two columns. Throws DataError otherwise and NumericError
/// when the contrast covariance is singular.
WaldTest wald_test(const FitResult& fit, const std::string& factor);

/// Joint Wald test stacking the contrast rows of every fixed factor;
/// equals wald_test for single-fixed-factor models.
WaldTest wald_test_fixed_effects(const FitResult& fit);

struct Criteria {
  double aic = 0.0;
  double bic = 0.0;
  double loglik = 0.0;
};

/// AIC = -2 loglik + 2 n_params, BIC = -2 loglik + n_params log N, with
/// loglik the restricted log-likelihood of the fit.
Criteria information_criteria(const FitResult& fit);

/// One model-comparison row (the Table-1-shaped report).
struct TestReport {
  std::string model_label;
  double p_value = 1.0;
  double aic = 0.0;
  double bic = 0.0;
  double loglik = 0.0;
  int df = 0;
};

TestReport make_test_report(const FitResult& fit);

struct LrtReport {
  int df_nested = 0;
  int df_full = 0;
  int delta_df = 0;
  double lr_stat = 0.0;
  double p_value = 1.0;
  double loglik_ml_nested = 0.0;
  double loglik_ml_full = 0.0;
  bool same_random_structure = true;
};

/// Likelihood-ratio test for nested fixed effects. Both models are refit
/// by maximum likelihood (REML likelihoods with different X are not
/// comparable); lr_stat = 2 (l_full - l_nested) clamped at zero, p-value
/// from chi-square with delta_df degrees of freedom.
///
/// Nesting check: identical data (row count and response checksum), the
/// nested model's fixed factors a subset of the full model's, and a
/// strictly larger full-model parameter count. Differing random
/// structures are permitted and flagged, matching the comparisons the
/// report format comes from. lr_stat below -1e-6 raises NumericError.
LrtReport likelihood_ratio_test(const FitResult& nested, const FitResult& full,
                                const FitOptions& opts = {});

}  // namespace lmmrec
