#include "lmmrec/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "lmmrec/errors.hpp"

namespace lmmrec {

namespace {

std::string join_levels(const std::vector<std::string>& levels) {
  std::string out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (i) out += ", ";
    out += levels[i];
  }
  return out;
}

// Index of a level within a term's training levels, validating the label.
Eigen::Index level_index(const std::vector<std::string>& levels,
                         const std::string& factor, const std::string& level) {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == level) return static_cast<Eigen::Index>(i);
  throw DataError("'" + level + "' is not a level of factor '" + factor +
                  "'; valid levels: " + join_levels(levels));
}

}  // namespace

double predict_cell(const FitResult& fit, const GroupCell& cell) {
  double value = 0.0;
  if (fit.intercept_coef) value += fit.tau_hat(*fit.intercept_coef);

  for (const auto& [factor, level] : cell.values) {
    bool found = false;
    for (const auto& term : fit.fixed_terms) {
      if (term.factor != factor) continue;
      const Eigen::Index lev = level_index(term.levels, factor, level);
      const Eigen::Index coef = term.coef[static_cast<std::size_t>(lev)];
      if (coef >= 0) value += fit.tau_hat(coef);
      found = true;
      break;
    }
    if (found) continue;
    for (const auto& term : fit.random_terms) {
      if (term.factor != factor) continue;
      const Eigen::Index lev = level_index(term.levels, factor, level);
      value += fit.u_hat(term.offset + lev);
      found = true;
      break;
    }
    if (!found)
      throw DataError("factor '" + factor + "' is not modeled in " +
                      format_formula(fit.formula));
  }
  return value;
}

CoefficientReport coefficient_report(const FitResult& fit,
                                     const std::string& factor) {
  CoefficientReport report;
  report.model_label = format_formula(fit.formula);
  report.factor = factor;

  const Eigen::MatrixXd cov = estimate_covariance(fit);
  auto std_error = [&](Eigen::Index coef) {
    return std::sqrt(cov(coef, coef));
  };

  if (factor == "intercept") {
    if (!fit.intercept_coef)
      throw DataError("the model has no intercept");
    report.rows.push_back({"intercept", fit.tau_hat(*fit.intercept_coef),
                           std_error(*fit.intercept_coef)});
    return report;
  }

  for (const auto& term : fit.fixed_terms) {
    if (term.factor != factor) continue;
    for (std::size_t lev = 0; lev < term.levels.size(); ++lev) {
      const Eigen::Index coef = term.coef[lev];
      if (coef >= 0)
        report.rows.push_back(
            {term.levels[lev], fit.tau_hat(coef), std_error(coef)});
      else
        report.aliased_levels.push_back(term.levels[lev]);
    }
    return report;
  }
  throw DataError("'" + factor + "' is not a fixed factor of " +
                  report.model_label);
}

std::vector<RankedCell> rank_groups_for_item(
    const FitResult& fit, const std::vector<std::string>& by) {
  if (by.empty())
    throw DataError("rank_groups_for_item: no factors given");

  struct ByFactor {
    std::string name;
    std::vector<std::string> levels;
    std::size_t table_index = 0;
  };
  std::vector<ByFactor> dims;
  for (const auto& name : by) {
    const std::vector<std::string>* levels = nullptr;
    for (const auto& t : fit.fixed_terms)
      if (t.factor == name) levels = &t.levels;
    for (const auto& t : fit.random_terms)
      if (t.factor == name) levels = &t.levels;
    if (!levels)
      throw DataError("factor '" + name + "' is not modeled in " +
                      format_formula(fit.formula));
    const auto ti = fit.table ? fit.table->factor_index(name) : -1;
    if (ti < 0)
      throw DataError("factor '" + name + "' missing from training data");
    dims.push_back({name, *levels, static_cast<std::size_t>(ti)});
  }

  // Support counts over the training table, keyed by the combined level
  // index of the requested factors.
  std::size_t n_cells = 1;
  for (const auto& d : dims) n_cells *= d.levels.size();
  std::vector<Eigen::Index> support(n_cells, 0);
  for (Eigen::Index r = 0; r < fit.table->n_rows(); ++r) {
    std::size_t key = 0;
    for (const auto& d : dims)
      key = key * d.levels.size() +
            static_cast<std::size_t>(fit.table->code(r, d.table_index));
    ++support[key];
  }

  std::vector<RankedCell> out;
  out.reserve(n_cells);
  std::vector<std::size_t> at(dims.size(), 0);
  for (bool done = false; !done;) {
    RankedCell rc;
    std::size_t key = 0;
    for (std::size_t i = 0; i < dims.size(); ++i) {
      rc.cell.values.emplace_back(dims[i].name, dims[i].levels[at[i]]);
      key = key * dims[i].levels.size() + at[i];
    }
    rc.predicted = predict_cell(fit, rc.cell);
    rc.support = support[key];
    out.push_back(std::move(rc));

    // odometer, rightmost digit fastest
    std::size_t i = dims.size();
    for (;;) {
      if (i == 0) {
        done = true;
        break;
      }
      --i;
      if (++at[i] < dims[i].levels.size()) break;
      at[i] = 0;
    }
  }

  // Enumeration order is level order, so a stable sort makes the
  // tie-break deterministic.
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedCell& a, const RankedCell& b) {
                     return a.predicted > b.predicted;
                   });
  return out;
}

std::vector<RankedItem> rank_items_for_group(
    const std::map<std::string, FitResult>& fits, const GroupCell& cell,
    int k) {
  if (fits.empty())
    throw DataError("rank_items_for_group: no fitted items");
  if (k < 1) throw DataError("rank_items_for_group: k must be >= 1");

  std::vector<RankedItem> out;
  out.reserve(fits.size());
  for (const auto& [name, fit] : fits)
    out.push_back({name, predict_cell(fit, cell)});
  std::stable_sort(out.begin(), out.end(),
                   [](const RankedItem& a, const RankedItem& b) {
                     return a.predicted > b.predicted;
                   });
  if (static_cast<std::size_t>(k) < out.size())
    out.resize(static_cast<std::size_t>(k));
  return out;
}

}  // namespace lmmrec
