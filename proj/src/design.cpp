#include "lmmrec/design.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "lmmrec/errors.hpp"

namespace lmmrec {

std::vector<std::string> DesignMatrices::dropped_labels() const {
  std::vector<std::string> out;
  std::vector<bool> kept(static_cast<std::size_t>(X.cols()), false);
  for (Eigen::Index c : kept_columns) kept[static_cast<std::size_t>(c)] = true;
  for (Eigen::Index c = 0; c < X.cols(); ++c)
    if (!kept[static_cast<std::size_t>(c)])
      out.push_back(x_labels[static_cast<std::size_t>(c)]);
  return out;
}

std::vector<Eigen::Index> detect_aliasing(
    const Eigen::SparseMatrix<double>& X) {
  const Eigen::Index p = X.cols();
  if (p < 1) throw DataError("detect_aliasing: X has no columns");

  Eigen::MatrixXd gram = (Eigen::MatrixXd(X.transpose() * X));
  const double max_diag = gram.diagonal().maxCoeff();
  std::vector<Eigen::Index> kept;
  if (max_diag <= 0.0) return kept;  // all-zero matrix

  // Gaussian elimination pivot = Schur-complement diagonal of the Gram
  // matrix. Exact integer rank deficiency leaves cancellation noise of
  // order eps * |G|, far below the cutoff.
  const double tol = 1e-10 * max_diag;

  // Incremental Cholesky over the kept set; the candidate's pivot is its
  // squared residual against span(kept).
  Eigen::MatrixXd L(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const Eigen::Index m = static_cast<Eigen::Index>(kept.size());
    Eigen::VectorXd w(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      double s = gram(kept[static_cast<std::size_t>(i)], j);
      for (Eigen::Index r = 0; r < i; ++r) s -= L(i, r) * w(r);
      w(i) = s / L(i, i);
    }
    const double d = gram(j, j) - w.squaredNorm();
    if (d >= tol) {
      L.row(m).head(m) = w.transpose();
      L(m, m) = std::sqrt(d);
      kept.push_back(j);
    }
  }
  return kept;
}

DesignMatrices build_design(const ModelFormula& f, const ObservationTable& t) {
  if (t.n_rows() < 1) throw DataError("build_design: empty table");

  const Eigen::Index n = t.n_rows();
  DesignMatrices d;
  d.y = t.y();
  d.has_intercept = f.intercept;

  Eigen::Index p = f.intercept ? 1 : 0;
  std::vector<std::size_t> fixed_idx;
  for (const auto& name : f.fixed_factors) {
    const auto fi = t.factor_index(name);
    if (fi < 0) throw DataError("build_design: unknown factor '" + name + "'");
    fixed_idx.push_back(static_cast<std::size_t>(fi));
    p += static_cast<Eigen::Index>(t.factors[static_cast<std::size_t>(fi)].levels.size());
  }

  d.X.resize(n, p);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * (fixed_idx.size() + (f.intercept ? 1 : 0)));
  Eigen::Index col0 = 0;
  if (f.intercept) {
    d.x_labels.emplace_back("intercept");
    for (Eigen::Index r = 0; r < n; ++r) trip.emplace_back(r, 0, 1.0);
    col0 = 1;
  }
  for (std::size_t k = 0; k < fixed_idx.size(); ++k) {
    const Factor& fac = t.factors[fixed_idx[k]];
    d.fixed_groups.push_back({fac.name, col0, fac.levels});
    for (const auto& lev : fac.levels)
      d.x_labels.push_back(fac.name + ":" + lev);
    for (Eigen::Index r = 0; r < n; ++r)
      trip.emplace_back(r, col0 + t.code(r, fixed_idx[k]), 1.0);
    col0 += static_cast<Eigen::Index>(fac.levels.size());
  }
  d.X.setFromTriplets(trip.begin(), trip.end());

  for (const auto& name : f.random_factors) {
    const auto fi = t.factor_index(name);
    if (fi < 0) throw DataError("build_design: unknown factor '" + name + "'");
    const Factor& fac = t.factors[static_cast<std::size_t>(fi)];
    RandomBlock blk;
    blk.factor = fac.name;
    blk.levels = fac.levels;
    blk.Z.resize(n, static_cast<Eigen::Index>(fac.levels.size()));
    std::vector<Eigen::Triplet<double>> zt;
    zt.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < n; ++r)
      zt.emplace_back(r, t.code(r, static_cast<std::size_t>(fi)), 1.0);
    blk.Z.setFromTriplets(zt.begin(), zt.end());
    d.z_blocks.push_back(std::move(blk));
  }

  d.kept_columns = detect_aliasing(d.X);
  return d;
}

}  // namespace lmmrec
