#include "lmmrec/stats.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "lmmrec/errors.hpp"
#include "lmmrec/special_functions.hpp"

namespace lmmrec {

namespace {

// Rows of the successive-difference contrast matrix for one factor, as
// (i, j) coefficient pairs over tau indices: tau_i - tau_j = 0.
std::vector<std::pair<Eigen::Index, Eigen::Index>> factor_contrasts(
    const FitResult& fit, const std::string& factor) {
  const FixedTermInfo* term = nullptr;
  for (const auto& t : fit.fixed_terms)
    if (t.factor == factor) term = &t;
  if (!term)
    throw DataError("wald_test: '" + factor +
                    "' is not a fixed factor of this fit");

  std::vector<Eigen::Index> kept;
  for (const auto c : term->coef)
    if (c >= 0) kept.push_back(c);
  if (kept.size() < 2)
    throw DataError("wald_test: factor '" + factor +
                    "' keeps fewer than two columns, no testable contrast");
  std::vector<std::pair<Eigen::Index, Eigen::Index>> rows;
  for (std::size_t i = 0; i + 1 < kept.size(); ++i)
    rows.emplace_back(kept[i], kept[i + 1]);
  return rows;
}

WaldTest wald_from_contrasts(
    const FitResult& fit,
    const std::vector<std::pair<Eigen::Index, Eigen::Index>>& rows) {
  const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index p = fit.n_fixed();
  Eigen::MatrixXd contrast = Eigen::MatrixXd::Zero(m, p);
  for (Eigen::Index r = 0; r < m; ++r) {
    contrast(r, rows[static_cast<std::size_t>(r)].first) = 1.0;
    contrast(r, rows[static_cast<std::size_t>(r)].second) = -1.0;
  }

  const Eigen::MatrixXd cov = estimate_covariance(fit).topLeftCorner(p, p);
  const Eigen::VectorXd delta = contrast * fit.tau_hat;
  const Eigen::MatrixXd mid = contrast * cov * contrast.transpose();

  Eigen::LDLT<Eigen::MatrixXd> ldlt(mid);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 0.0)
    throw NumericError("wald_test: singular contrast covariance");

  WaldTest out;
  out.statistic = delta.dot(ldlt.solve(delta));
  out.df = static_cast<int>(m);
  out.p_value = chi_squared_sf(out.statistic, static_cast<double>(out.df));
  return out;
}

}  // namespace

WaldTest wald_test(const FitResult& fit, const std::string& factor) {
  return wald_from_contrasts(fit, factor_contrasts(fit, factor));
}

WaldTest wald_test_fixed_effects(const FitResult& fit) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> rows;
  for (const auto& term : fit.fixed_terms) {
    auto r = factor_contrasts(fit, term.factor);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  if (rows.empty())
    throw DataError("wald_test: the model has no testable fixed factor");
  return wald_from_contrasts(fit, rows);
}

Criteria information_criteria(const FitResult& fit) {
  Criteria c;
  c.loglik = fit.loglik_restricted;
  c.aic = -2.0 * c.loglik + 2.0 * fit.n_params;
  c.bic = -2.0 * c.loglik +
          static_cast<double>(fit.n_params) *
              std::log(static_cast<double>(fit.n_obs));
  return c;
}

TestReport make_test_report(const FitResult& fit) {
  TestReport r;
  r.model_label = format_formula(fit.formula);
  const Criteria c = information_criteria(fit);
  r.aic = c.aic;
  r.bic = c.bic;
  r.loglik = c.loglik;
  r.df = fit.n_params;
  r.p_value = fit.fixed_terms.empty()
                  ? 1.0
                  : wald_test_fixed_effects(fit).p_value;
  return r;
}

LrtReport likelihood_ratio_test(const FitResult& nested, const FitResult& full,
                                const FitOptions& opts) {
  if (!nested.table || !full.table)
    throw DataError("likelihood_ratio_test: fits carry no training data");
  if (nested.table->n_rows() != full.table->n_rows() ||
      nested.table->response_checksum() != full.table->response_checksum())
    throw DataError(
        "likelihood_ratio_test: fits were made on different data");

  const std::unordered_set<std::string> full_fixed(
      full.formula.fixed_factors.begin(), full.formula.fixed_factors.end());
  for (const auto& name : nested.formula.fixed_factors)
    if (!full_fixed.count(name))
      throw DataError("likelihood_ratio_test: models are not nested ('" +
                      name + "' is fixed only in the nested model)");
  if (nested.formula.intercept && !full.formula.intercept)
    throw DataError(
        "likelihood_ratio_test: nested model has an intercept the full "
        "model lacks");

  const FitResult ml_nested = fit_ml(nested.formula, nested.table, opts);
  const FitResult ml_full = fit_ml(full.formula, full.table, opts);

  LrtReport r;
  r.df_nested = ml_nested.n_params;
  r.df_full = ml_full.n_params;
  r.delta_df = r.df_full - r.df_nested;
  if (r.delta_df <= 0)
    throw DataError(
        "likelihood_ratio_test: models are not nested (the full model adds "
        "no parameters)");

  r.loglik_ml_nested = *ml_nested.loglik_ml;
  r.loglik_ml_full = *ml_full.loglik_ml;
  double lr = 2.0 * (r.loglik_ml_full - r.loglik_ml_nested);
  if (lr < -1e-6)
    throw NumericError(
        "likelihood_ratio_test: full-model likelihood fell below the nested "
        "one by " +
        std::to_string(-lr) + "; optimizer diagnostics required");
  r.lr_stat = std::max(lr, 0.0);
  r.p_value = chi_squared_sf(r.lr_stat, static_cast<double>(r.delta_df));

  std::vector<std::string> rn = nested.formula.random_factors;
  std::vector<std::string> rf = full.formula.random_factors;
  std::sort(rn.begin(), rn.end());
  std::sort(rf.begin(), rf.end());
  r.same_random_structure = rn == rf;
  return r;
}

}  // namespace lmmrec
