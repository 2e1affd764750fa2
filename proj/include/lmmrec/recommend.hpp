#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lmmrec/reml.hpp"

namespace lmmrec {

/// One demographic cell: (factor, level) pairs for the specified factors;
/// anything not listed is "unspecified" and contributes the population
/// level (zero effect).
struct GroupCell {
  std::vector<std::pair<std::string, std::string>> values;
};

/// Linear-predictor score of a cell under a fit: intercept (if any) plus
/// the specified factors' fixed/random effects. Levels must be valid for
/// their factor (DataError lists the valid ones); a level that is valid
/// but was unseen or aliased in training contributes zero.
double predict_cell(const FitResult& fit, const GroupCell& cell);

struct CoefficientRow {
  std::string level;
  double estimate = 0.0;
  double std_error = 0.0;
};

struct CoefficientReport {
  std::string model_label;
  std::string factor;
  std::vector<CoefficientRow> rows;           // kept levels, declared order
  std::vector<std::string> aliased_levels;    // flagged, no estimate
};

/// Fixed-effect estimates and standard errors for one factor (or
/// "intercept"), ordered by level. The plot-data source for per-group
/// mean charts.
CoefficientReport coefficient_report(const FitResult& fit,
                                     const std::string& factor);

struct RankedCell {
  GroupCell cell;
  double predicted = 0.0;
  Eigen::Index support = 0;  // training rows matching the cell
};

/// Scores the full Cartesian product over the given factors' levels and
/// sorts descending by prediction; ties broken by level order, so the
/// ranking is total and deterministic. Factors must be modeled (fixed or
/// random) in the fit.
std::vector<RankedCell> rank_groups_for_item(
    const FitResult& fit, const std::vector<std::string>& by);

struct RankedItem {
  std::string item;
  double predicted = 0.0;
};

/// Scores one cell under every item's fit and returns the k best,
/// descending, ties by item name. This is the cold-start ranking: the
/// cell may specify any subset of factors, including none.
std::vector<RankedItem> rank_items_for_group(
    const std::map<std::string, FitResult>& fits, const GroupCell& cell,
    int k);

}  // namespace lmmrec
