#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <string>
#include <vector>

#include "lmmrec/formula.hpp"
#include "lmmrec/observation.hpp"

namespace lmmrec {

/// One fixed factor's span of X columns: column col0 + j holds the dummy
/// indicator of level j (declared order).
struct FixedGroup {
  std::string factor;
  Eigen::Index col0 = 0;
  std::vector<std::string> levels;
};

/// One random factor's indicator block Z_k. Every row has exactly one 1.
struct RandomBlock {
  std::string factor;
  Eigen::SparseMatrix<double> Z;  // n_obs x levels.size()
  std::vector<std::string> levels;
};

/// Numerical objects for y = X tau + Z u + e: response, fixed-effect
/// dummy matrix (one column per level, plus a leading all-ones column
/// when the intercept is present), and per-factor random blocks.
/// kept_columns lists the X columns surviving aliasing removal; only
/// those enter the mixed model equations.
struct DesignMatrices {
  Eigen::VectorXd y;
  Eigen::SparseMatrix<double> X;
  std::vector<std::string> x_labels;  // "intercept" or "factor:level"
  bool has_intercept = false;
  std::vector<FixedGroup> fixed_groups;
  std::vector<RandomBlock> z_blocks;
  std::vector<Eigen::Index> kept_columns;

  Eigen::Index n_obs() const { return y.size(); }
  Eigen::Index n_fixed_kept() const {
    return static_cast<Eigen::Index>(kept_columns.size());
  }
  Eigen::Index n_random() const {
    Eigen::Index q = 0;
    for (const auto& b : z_blocks) q += b.Z.cols();
    return q;
  }

  /// Labels of X columns dropped as aliased.
  std::vector<std::string> dropped_labels() const;
};

/// Build the design from a formula over a table. Fixed columns follow
/// declared level order per factor, prefixed by the intercept column when
/// present; z_blocks follow formula order. Throws DataError for unknown
/// factors or an empty table.
DesignMatrices build_design(const ModelFormula& f, const ObservationTable& t);

/// Greedy left-to-right maximal independent column set: a column is kept
/// iff it is not (numerically) in the span of the kept columns to its
/// left. Works on the Gram matrix with pivoted elimination; a column is
/// dropped when its pivot falls below 1e-10 of the largest pivot, which
/// only has to separate exact integer rank deficiency from float noise.
/// An all-zero matrix yields an empty list.
std::vector<Eigen::Index> detect_aliasing(const Eigen::SparseMatrix<double>& X);

}  // namespace lmmrec
