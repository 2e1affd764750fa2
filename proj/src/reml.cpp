#include "lmmrec/reml.hpp"

#include <cmath>
#include <numbers>
#include <unordered_map>
#include <utility>

#include "lmmrec/errors.hpp"
#include "optimize.hpp"

namespace lmmrec {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// gamma-independent pieces of Henderson's system, formed once per design:
// X'X, X'Z, Z'Z, X'y, Z'y with X restricted to kept columns and Z the
// horizontal composition of the z_blocks. Fixed dimensions stay small in
// this problem family, so the X-side Grams are dense; Z'Z stays sparse.
struct Grams {
  Eigen::Index n_obs = 0;
  Eigen::Index p = 0;  // kept fixed columns
  Eigen::Index q = 0;  // sum of block sizes
  std::vector<Eigen::Index> block_size;
  std::vector<Eigen::Index> block_offset;
  SpMat Xk;
  SpMat Z;
  Eigen::MatrixXd Gxx;
  Eigen::MatrixXd Gxz;
  SpMat Gzz;
  Eigen::VectorXd Xty;
  Eigen::VectorXd Zty;
};

Grams make_grams(const DesignMatrices& d) {
  Grams g;
  g.n_obs = d.n_obs();
  g.p = d.n_fixed_kept();
  if (g.p < 1)
    throw DataError("design has no usable fixed-effect columns");

  g.Xk.resize(g.n_obs, g.p);
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index cc = 0; cc < g.p; ++cc) {
      const Eigen::Index c = d.kept_columns[static_cast<std::size_t>(cc)];
      for (SpMat::InnerIterator it(d.X, c); it; ++it)
        trip.emplace_back(it.row(), cc, it.value());
    }
    g.Xk.setFromTriplets(trip.begin(), trip.end());
  }

  g.q = d.n_random();
  g.Z.resize(g.n_obs, g.q);
  {
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::Index off = 0;
    for (const auto& blk : d.z_blocks) {
      g.block_size.push_back(blk.Z.cols());
      g.block_offset.push_back(off);
      for (Eigen::Index c = 0; c < blk.Z.cols(); ++c)
        for (SpMat::InnerIterator it(blk.Z, c); it; ++it)
          trip.emplace_back(it.row(), off + c, it.value());
      off += blk.Z.cols();
    }
    g.Z.setFromTriplets(trip.begin(), trip.end());
  }

  g.Gxx = Eigen::MatrixXd(SpMat(g.Xk.transpose() * g.Xk));
  g.Gxz = g.q > 0 ? Eigen::MatrixXd(SpMat(g.Xk.transpose() * g.Z))
                  : Eigen::MatrixXd(g.p, 0);
  g.Gzz = SpMat(g.Z.transpose() * g.Z);
  g.Xty = g.Xk.transpose() * d.y;
  g.Zty = g.Z.transpose() * d.y;
  return g;
}

struct ActiveSet {
  std::vector<int> blocks;              // indices of blocks with gamma > 0
  std::vector<Eigen::Index> global_pos; // size q, position in the active
                                        // system or -1
  Eigen::Index q_active = 0;
};

ActiveSet make_active(const Grams& g, const Eigen::VectorXd& gamma) {
  ActiveSet a;
  a.global_pos.assign(static_cast<std::size_t>(g.q), -1);
  for (int k = 0; k < gamma.size(); ++k) {
    if (!(gamma(k) >= 0.0))
      throw NumericError("variance ratio gamma must be >= 0");
    if (gamma(k) > 0.0) {
      a.blocks.push_back(k);
      for (Eigen::Index j = 0; j < g.block_size[static_cast<std::size_t>(k)]; ++j)
        a.global_pos[static_cast<std::size_t>(
            g.block_offset[static_cast<std::size_t>(k)] + j)] =
            a.q_active + j;
      a.q_active += g.block_size[static_cast<std::size_t>(k)];
    }
  }
  return a;
}

// C and rhs over the kept fixed block plus the active random blocks.
std::pair<SpMat, Eigen::VectorXd> assemble_active(const Grams& g,
                                                  const ActiveSet& act,
                                                  const Eigen::VectorXd& gamma) {
  const Eigen::Index dim = g.p + act.q_active;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(g.p * g.p) +
               2 * static_cast<std::size_t>(g.p * act.q_active) +
               static_cast<std::size_t>(g.Gzz.nonZeros()) +
               static_cast<std::size_t>(act.q_active));

  for (Eigen::Index i = 0; i < g.p; ++i)
    for (Eigen::Index j = 0; j < g.p; ++j)
      if (g.Gxx(i, j) != 0.0) trip.emplace_back(i, j, g.Gxx(i, j));

  for (Eigen::Index zc = 0; zc < g.q; ++zc) {
    const Eigen::Index pos = act.global_pos[static_cast<std::size_t>(zc)];
    if (pos < 0) continue;
    for (Eigen::Index i = 0; i < g.p; ++i) {
      const double v = g.Gxz(i, zc);
      if (v != 0.0) {
        trip.emplace_back(i, g.p + pos, v);
        trip.emplace_back(g.p + pos, i, v);
      }
    }
  }

  for (Eigen::Index c = 0; c < g.Gzz.outerSize(); ++c) {
    const Eigen::Index cp = act.global_pos[static_cast<std::size_t>(c)];
    if (cp < 0) continue;
    for (SpMat::InnerIterator it(g.Gzz, c); it; ++it) {
      const Eigen::Index rp = act.global_pos[static_cast<std::size_t>(it.row())];
      if (rp < 0) continue;
      trip.emplace_back(g.p + rp, g.p + cp, it.value());
    }
  }

  for (int k : act.blocks) {
    const double ginv = 1.0 / gamma(k);
    for (Eigen::Index j = 0; j < g.block_size[static_cast<std::size_t>(k)]; ++j) {
      const Eigen::Index pos = act.global_pos[static_cast<std::size_t>(
          g.block_offset[static_cast<std::size_t>(k)] + j)];
      trip.emplace_back(g.p + pos, g.p + pos, ginv);
    }
  }

  SpMat C(dim, dim);
  C.setFromTriplets(trip.begin(), trip.end());
  C.makeCompressed();

  Eigen::VectorXd rhs(dim);
  rhs.head(g.p) = g.Xty;
  for (Eigen::Index zc = 0; zc < g.q; ++zc) {
    const Eigen::Index pos = act.global_pos[static_cast<std::size_t>(zc)];
    if (pos >= 0) rhs(g.p + pos) = g.Zty(zc);
  }
  return {std::move(C), std::move(rhs)};
}

enum class Objective { kReml, kMl };

struct Eval {
  double loglik = 0.0;
  double sigma2 = 0.0;
  Eigen::VectorXd grad;  // d loglik / d log gamma over active blocks
  Eigen::VectorXd tau;
  Eigen::VectorXd u;  // full q, zeros for inactive blocks
  std::shared_ptr<const MmeFactor> factor;
};

// Profiled likelihood machinery for one design. Evaluations at different
// gamma share the Grams; each evaluation factors the (small) C.
class RemlProblem {
 public:
  RemlProblem(const DesignMatrices& d, double sigma2_floor)
      : d_(&d), g_(make_grams(d)), sigma2_floor_(sigma2_floor) {
    if (g_.n_obs <= g_.p)
      throw DataError(
          "degenerate fit: need more observations than kept fixed columns "
          "(N = " +
          std::to_string(g_.n_obs) + ", columns = " + std::to_string(g_.p) +
          ")");
  }

  const Grams& grams() const { return g_; }
  int n_blocks() const { return static_cast<int>(g_.block_size.size()); }

  Eval evaluate(const Eigen::VectorXd& gamma, Objective obj, bool want_grad,
                bool want_effects) const {
    if (gamma.size() != n_blocks())
      throw DataError("gamma length does not match the random structure");
    const ActiveSet act = make_active(g_, gamma);
    auto [C, rhs] = assemble_active(g_, act, gamma);
    auto factor = std::make_shared<const MmeFactor>(C);
    const Eigen::VectorXd sol = factor->solve(rhs);

    Eval e;
    e.tau = sol.head(g_.p);
    e.u = Eigen::VectorXd::Zero(g_.q);
    for (Eigen::Index zc = 0; zc < g_.q; ++zc) {
      const Eigen::Index pos = act.global_pos[static_cast<std::size_t>(zc)];
      if (pos >= 0) e.u(zc) = sol(g_.p + pos);
    }

    // y'Py as a sum of nonnegative pieces: |r|^2 + sum_k |u_k|^2 / gamma_k.
    Eigen::VectorXd r = d_->y - g_.Xk * e.tau;
    if (act.q_active > 0) r -= g_.Z * e.u;
    double ypy = r.squaredNorm();
    for (int k : act.blocks)
      ypy += e.u.segment(g_.block_offset[static_cast<std::size_t>(k)],
                         g_.block_size[static_cast<std::size_t>(k)])
                 .squaredNorm() /
             gamma(k);

    double log_gamma_sum = 0.0;
    for (int k : act.blocks)
      log_gamma_sum +=
          static_cast<double>(g_.block_size[static_cast<std::size_t>(k)]) *
          std::log(gamma(k));

    const double n = static_cast<double>(g_.n_obs);
    const double dof =
        obj == Objective::kReml ? n - static_cast<double>(g_.p) : n;
    e.sigma2 = std::max(ypy / dof, sigma2_floor_);

    double log_det_term;
    std::shared_ptr<const MmeFactor> m_factor;  // Z'Z + G^-1, ML path only
    if (obj == Objective::kReml) {
      log_det_term = factor->log_det();
    } else {
      m_factor = factor_m(act, gamma);
      log_det_term = m_factor ? m_factor->log_det() : 0.0;
    }

    e.loglik = -0.5 * (dof * (kLog2Pi + std::log(e.sigma2)) + ypy / e.sigma2 +
                       log_gamma_sum + log_det_term);

    if (want_grad) {
      // d loglik / d log gamma_k
      //   = -1/2 [ q_k - tr(inv_kk)/gamma_k - |u_k|^2 / (gamma_k sigma2) ]
      // where inv is C^-1 (REML) or (Z'Z + G^-1)^-1 (ML) over the random
      // rows; both follow from Z'PZ = G^-1 - G^-1 C^uu G^-1 and
      // Z'Py = G^-1 u_hat.
      e.grad.resize(static_cast<Eigen::Index>(act.blocks.size()));
      Eigen::VectorXd inv_diag(act.q_active);
      if (act.q_active > 0) {
        if (obj == Objective::kReml) {
          Eigen::MatrixXd basis =
              Eigen::MatrixXd::Zero(g_.p + act.q_active, act.q_active);
          for (Eigen::Index j = 0; j < act.q_active; ++j)
            basis(g_.p + j, j) = 1.0;
          const Eigen::MatrixXd cols = factor->solve_many(basis);
          for (Eigen::Index j = 0; j < act.q_active; ++j)
            inv_diag(j) = cols(g_.p + j, j);
        } else {
          const Eigen::MatrixXd minv = m_factor->inverse();
          inv_diag = minv.diagonal();
        }
      }
      Eigen::Index gi = 0;
      for (int k : act.blocks) {
        const Eigen::Index off = g_.block_offset[static_cast<std::size_t>(k)];
        const Eigen::Index sz = g_.block_size[static_cast<std::size_t>(k)];
        // active positions within a block are contiguous
        const Eigen::Index base =
            act.global_pos[static_cast<std::size_t>(off)];
        double tr = 0.0;
        for (Eigen::Index j = 0; j < sz; ++j) tr += inv_diag(base + j);
        const double unorm2 = e.u.segment(off, sz).squaredNorm();
        e.grad(gi++) =
            -0.5 * (static_cast<double>(sz) - tr / gamma(k) -
                    unorm2 / (gamma(k) * e.sigma2));
      }
    }

    if (want_effects) e.factor = std::move(factor);
    return e;
  }

 private:
  std::shared_ptr<const MmeFactor> factor_m(const ActiveSet& act,
                                            const Eigen::VectorXd& gamma) const {
    if (act.q_active == 0) return nullptr;
    std::vector<Eigen::Triplet<double>> trip;
    for (Eigen::Index c = 0; c < g_.Gzz.outerSize(); ++c) {
      const Eigen::Index cp = act.global_pos[static_cast<std::size_t>(c)];
      if (cp < 0) continue;
      for (SpMat::InnerIterator it(g_.Gzz, c); it; ++it) {
        const Eigen::Index rp =
            act.global_pos[static_cast<std::size_t>(it.row())];
        if (rp >= 0) trip.emplace_back(rp, cp, it.value());
      }
    }
    for (int k : act.blocks) {
      const double ginv = 1.0 / gamma(k);
      for (Eigen::Index j = 0;
           j < g_.block_size[static_cast<std::size_t>(k)]; ++j) {
        const Eigen::Index pos = act.global_pos[static_cast<std::size_t>(
            g_.block_offset[static_cast<std::size_t>(k)] + j)];
        trip.emplace_back(pos, pos, ginv);
      }
    }
    SpMat m(act.q_active, act.q_active);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return std::make_shared<const MmeFactor>(m);
  }

  const DesignMatrices* d_;
  Grams g_;
  double sigma2_floor_;
};

FitResult fit_impl(const ModelFormula& f,
                   std::shared_ptr<const ObservationTable> table,
                   const FitOptions& opts, Objective objective) {
  const DesignMatrices d = build_design(f, *table);
  const RemlProblem problem(d, opts.sigma2_floor);
  const int n_blocks = problem.n_blocks();

  Eigen::VectorXd gamma = Eigen::VectorXd::Ones(n_blocks);
  bool converged = true;
  int iterations = 0;

  if (n_blocks > 0) {
    for (;;) {
      std::vector<int> act;
      for (int k = 0; k < n_blocks; ++k)
        if (gamma(k) > 0.0) act.push_back(k);
      if (act.empty()) break;

      const Eigen::Index dim = static_cast<Eigen::Index>(act.size());
      Eigen::VectorXd x0(dim);
      for (Eigen::Index i = 0; i < dim; ++i)
        x0(i) = std::log(gamma(act[static_cast<std::size_t>(i)]));

      detail::OptimOptions oo;
      oo.max_iter = opts.max_iter;
      oo.tol_f = opts.tol_loglik;
      oo.tol_grad = opts.tol_grad;

      auto fn = [&](const Eigen::VectorXd& rho,
                    Eigen::VectorXd& grad) -> double {
        Eigen::VectorXd g = gamma;
        for (Eigen::Index i = 0; i < rho.size(); ++i)
          g(act[static_cast<std::size_t>(i)]) = std::exp(rho(i));
        const Eval e = problem.evaluate(g, objective, true, false);
        grad = e.grad;
        return e.loglik;
      };

      const Eigen::VectorXd lower = Eigen::VectorXd::Constant(
          dim, std::log(opts.gamma_floor));
      const Eigen::VectorXd upper = Eigen::VectorXd::Constant(
          dim, std::log(opts.gamma_ceiling));
      const detail::OptimResult out =
          detail::maximize_bfgs(fn, x0, lower, upper, oo);
      iterations += out.iterations;

      bool clamped = false;
      for (Eigen::Index i = 0; i < dim; ++i) {
        const double gk = std::exp(out.x(i));
        const int k = act[static_cast<std::size_t>(i)];
        if (gk <= opts.gamma_floor * (1.0 + 1e-9)) {
          gamma(k) = 0.0;
          clamped = true;
        } else {
          gamma(k) = gk;
        }
      }
      if (!clamped) {
        converged = out.converged;
        break;
      }
      // a component hit the boundary: refit the remaining ones
    }
  }

  const Eval final_eval = problem.evaluate(gamma, objective, false, true);

  FitResult fit;
  fit.formula = f;
  fit.table = std::move(table);
  fit.tau_hat = final_eval.tau;
  for (Eigen::Index c : d.kept_columns)
    fit.tau_labels.push_back(d.x_labels[static_cast<std::size_t>(c)]);

  std::unordered_map<Eigen::Index, Eigen::Index> kept_pos;
  for (std::size_t i = 0; i < d.kept_columns.size(); ++i)
    kept_pos[d.kept_columns[i]] = static_cast<Eigen::Index>(i);
  if (d.has_intercept) {
    const auto it = kept_pos.find(0);
    if (it != kept_pos.end()) fit.intercept_coef = it->second;
  }
  for (const auto& grp : d.fixed_groups) {
    FixedTermInfo info;
    info.factor = grp.factor;
    info.levels = grp.levels;
    info.coef.resize(grp.levels.size(), -1);
    for (std::size_t lev = 0; lev < grp.levels.size(); ++lev) {
      const auto it =
          kept_pos.find(grp.col0 + static_cast<Eigen::Index>(lev));
      if (it != kept_pos.end()) info.coef[lev] = it->second;
    }
    fit.fixed_terms.push_back(std::move(info));
  }

  fit.u_hat = final_eval.u;
  {
    Eigen::Index off = 0;
    for (int k = 0; k < n_blocks; ++k) {
      const auto& blk = d.z_blocks[static_cast<std::size_t>(k)];
      RandomTermInfo info;
      info.factor = blk.factor;
      info.levels = blk.levels;
      info.offset = off;
      info.active = gamma(k) > 0.0;
      off += blk.Z.cols();
      fit.random_terms.push_back(std::move(info));
    }
  }

  fit.theta.sigma2 = final_eval.sigma2;
  fit.theta.gamma = gamma;
  fit.mme = final_eval.factor;

  if (objective == Objective::kReml) {
    fit.loglik_restricted = final_eval.loglik;
  } else {
    fit.loglik_ml = final_eval.loglik;
    fit.loglik_restricted =
        problem.evaluate(gamma, Objective::kReml, false, false).loglik;
  }

  fit.n_obs = d.n_obs();
  fit.n_params = static_cast<int>(d.n_fixed_kept()) +
                 static_cast<int>((gamma.array() > 0.0).count()) + 1;
  fit.converged = converged;
  fit.iterations = iterations;
  fit.dropped_columns = d.dropped_labels();
  return fit;
}

}  // namespace

MmeFactor::MmeFactor(const Eigen::SparseMatrix<double>& C) {
  ldlt_.compute(C);
  if (ldlt_.info() != Eigen::Success)
    throw NumericError("mixed model equations: factorization failed");
  const Eigen::VectorXd dvec = ldlt_.vectorD();
  double ld = 0.0;
  for (Eigen::Index i = 0; i < dvec.size(); ++i) {
    if (!(dvec(i) > 0.0) || !std::isfinite(dvec(i)))
      throw NumericError(
          "mixed model equations are not positive definite (aliasing not "
          "removed, or a variance ratio <= 0)");
    ld += std::log(dvec(i));
  }
  log_det_ = ld;
}

Eigen::VectorXd MmeFactor::solve(const Eigen::VectorXd& b) const {
  return ldlt_.solve(b);
}

Eigen::MatrixXd MmeFactor::solve_many(const Eigen::MatrixXd& b) const {
  return ldlt_.solve(b);
}

Eigen::MatrixXd MmeFactor::inverse() const {
  return ldlt_.solve(
      Eigen::MatrixXd::Identity(dim(), dim()));
}

MixedModelEquations assemble_mme(const DesignMatrices& d,
                                 const VarianceComponents& v) {
  if (v.gamma.size() != static_cast<Eigen::Index>(d.z_blocks.size()))
    throw DataError("gamma length does not match the number of z blocks");
  for (Eigen::Index k = 0; k < v.gamma.size(); ++k)
    if (!(v.gamma(k) > 0.0))
      throw NumericError(
          "assemble_mme requires every gamma > 0; drop zero-ratio blocks "
          "(GLS reduction) instead");

  const Grams g = make_grams(d);
  const ActiveSet act = make_active(g, v.gamma);
  auto [C, rhs] = assemble_active(g, act, v.gamma);
  MixedModelEquations m;
  m.C = std::move(C);
  m.rhs = std::move(rhs);
  m.n_fixed = g.p;
  m.n_random = g.q;
  return m;
}

MmeSolution solve_mme(const MixedModelEquations& m) {
  auto factor = std::make_shared<const MmeFactor>(m.C);
  const Eigen::VectorXd sol = factor->solve(m.rhs);
  MmeSolution out;
  out.tau = sol.head(m.n_fixed);
  out.u = sol.tail(sol.size() - m.n_fixed);
  out.factor = std::move(factor);
  return out;
}

RemlLoglik reml_loglik(const DesignMatrices& d, const Eigen::VectorXd& gamma) {
  const RemlProblem problem(d, FitOptions{}.sigma2_floor);
  const Eval e = problem.evaluate(gamma, Objective::kReml, false, false);
  return {e.loglik, e.sigma2};
}

RemlLoglik ml_loglik(const DesignMatrices& d, const Eigen::VectorXd& gamma) {
  const RemlProblem problem(d, FitOptions{}.sigma2_floor);
  const Eval e = problem.evaluate(gamma, Objective::kMl, false, false);
  return {e.loglik, e.sigma2};
}

RemlLoglikGrad reml_loglik_gradient(const DesignMatrices& d,
                                    const Eigen::VectorXd& gamma) {
  for (Eigen::Index k = 0; k < gamma.size(); ++k)
    if (!(gamma(k) > 0.0))
      throw NumericError(
          "reml_loglik_gradient: log-ratio coordinates need gamma > 0");
  const RemlProblem problem(d, FitOptions{}.sigma2_floor);
  const Eval e = problem.evaluate(gamma, Objective::kReml, true, false);
  return {e.loglik, e.sigma2, e.grad};
}

FitResult fit_reml(const ModelFormula& f,
                   std::shared_ptr<const ObservationTable> t,
                   const FitOptions& opts) {
  return fit_impl(f, std::move(t), opts, Objective::kReml);
}

FitResult fit_reml(const ModelFormula& f, const ObservationTable& t,
                   const FitOptions& opts) {
  return fit_impl(f, std::make_shared<const ObservationTable>(t), opts,
                  Objective::kReml);
}

FitResult fit_ml(const ModelFormula& f,
                 std::shared_ptr<const ObservationTable> t,
                 const FitOptions& opts) {
  return fit_impl(f, std::move(t), opts, Objective::kMl);
}

FitResult fit_ml(const ModelFormula& f, const ObservationTable& t,
                 const FitOptions& opts) {
  return fit_impl(f, std::make_shared<const ObservationTable>(t), opts,
                  Objective::kMl);
}

Eigen::MatrixXd estimate_covariance(const FitResult& fit) {
  if (!fit.mme) throw NumericError("fit carries no retained factorization");
  return fit.theta.sigma2 * fit.mme->inverse();
}

Eigen::VectorXd predict(const FitResult& fit,
                        const ObservationTable& newdata) {
  const Eigen::Index n = newdata.n_rows();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (fit.intercept_coef) out.setConstant(fit.tau_hat(*fit.intercept_coef));

  // Per term, translate the newdata level codes into coefficient indices
  // once; levels absent from training map to "no contribution".
  auto term_lookup = [&](const std::string& factor,
                         const std::vector<std::string>& train_levels)
      -> std::pair<std::size_t, std::vector<Eigen::Index>> {
    const auto fi = newdata.factor_index(factor);
    if (fi < 0)
      throw DataError("predict: newdata lacks factor '" + factor + "'");
    std::unordered_map<std::string, Eigen::Index> by_label;
    for (std::size_t i = 0; i < train_levels.size(); ++i)
      by_label.emplace(train_levels[i], static_cast<Eigen::Index>(i));
    const auto& new_levels =
        newdata.factors[static_cast<std::size_t>(fi)].levels;
    std::vector<Eigen::Index> map(new_levels.size(), -1);
    for (std::size_t i = 0; i < new_levels.size(); ++i) {
      const auto it = by_label.find(new_levels[i]);
      if (it != by_label.end()) map[i] = it->second;
    }
    return {static_cast<std::size_t>(fi), std::move(map)};
  };

  for (const auto& term : fit.fixed_terms) {
    const auto [fi, level_map] = term_lookup(term.factor, term.levels);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index lev = level_map[static_cast<std::size_t>(
          newdata.code(r, fi))];
      if (lev < 0) continue;
      const Eigen::Index coef = term.coef[static_cast<std::size_t>(lev)];
      if (coef >= 0) out(r) += fit.tau_hat(coef);
    }
  }
  for (const auto& term : fit.random_terms) {
    const auto [fi, level_map] = term_lookup(term.factor, term.levels);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index lev = level_map[static_cast<std::size_t>(
          newdata.code(r, fi))];
      if (lev >= 0) out(r) += fit.u_hat(term.offset + lev);
    }
  }
  return out;
}

}  // namespace lmmrec
