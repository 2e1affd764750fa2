#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace oracle {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::MatrixXd kept_x_dense(const lmmrec::DesignMatrices& d) {
  const Eigen::MatrixXd full = Eigen::MatrixXd(d.X);
  Eigen::MatrixXd x(d.n_obs(), d.n_fixed_kept());
  for (Eigen::Index c = 0; c < d.n_fixed_kept(); ++c)
    x.col(c) = full.col(d.kept_columns[static_cast<std::size_t>(c)]);
  return x;
}
}  // namespace

Eigen::MatrixXd dense_v(const lmmrec::DesignMatrices& d,
                        const Eigen::VectorXd& gamma) {
  const Eigen::Index n = d.n_obs();
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index k = 0; k < gamma.size(); ++k) {
    if (gamma(k) == 0.0) continue;
    const Eigen::MatrixXd z =
        Eigen::MatrixXd(d.z_blocks[static_cast<std::size_t>(k)].Z);
    v += gamma(k) * z * z.transpose();
  }
  return v;
}

GlsSolution gls_solution(const lmmrec::DesignMatrices& d,
                         const Eigen::VectorXd& gamma) {
  const Eigen::MatrixXd x = kept_x_dense(d);
  const Eigen::MatrixXd v = dense_v(d, gamma);
  const Eigen::LLT<Eigen::MatrixXd> vllt(v);
  const Eigen::MatrixXd vinv_x = vllt.solve(x);
  const Eigen::VectorXd vinv_y = vllt.solve(d.y);
  const Eigen::MatrixXd xtvx = x.transpose() * vinv_x;
  GlsSolution out;
  out.tau = xtvx.ldlt().solve(x.transpose() * vinv_y);
  const Eigen::VectorXd resid_v = vllt.solve(d.y - x * out.tau);
  out.u.resize(d.n_random());
  Eigen::Index off = 0;
  for (Eigen::Index k = 0; k < gamma.size(); ++k) {
    const auto& blk = d.z_blocks[static_cast<std::size_t>(k)];
    out.u.segment(off, blk.Z.cols()) =
        gamma(k) * (Eigen::MatrixXd(blk.Z).transpose() * resid_v);
    off += blk.Z.cols();
  }
  return out;
}

namespace {
std::pair<double, double> dense_loglik(const lmmrec::DesignMatrices& d,
                                       const Eigen::VectorXd& gamma,
                                       bool restricted) {
  const Eigen::MatrixXd x = kept_x_dense(d);
  const Eigen::Index n = d.n_obs();
  const Eigen::Index p = x.cols();
  const Eigen::MatrixXd v = dense_v(d, gamma);
  const Eigen::LLT<Eigen::MatrixXd> vllt(v);

  double logdet_v = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    logdet_v += 2.0 * std::log(vllt.matrixLLT()(i, i));

  const Eigen::MatrixXd vinv_x = vllt.solve(x);
  const Eigen::VectorXd vinv_y = vllt.solve(d.y);
  const Eigen::MatrixXd xtvx = x.transpose() * vinv_x;
  const Eigen::LLT<Eigen::MatrixXd> xtvx_llt(xtvx);
  double logdet_xtvx = 0.0;
  for (Eigen::Index i = 0; i < p; ++i)
    logdet_xtvx += 2.0 * std::log(xtvx_llt.matrixLLT()(i, i));

  const Eigen::VectorXd tau = xtvx_llt.solve(x.transpose() * vinv_y);
  const double ypy = d.y.dot(vinv_y) - (x.transpose() * vinv_y).dot(tau);

  const double dof = restricted ? static_cast<double>(n - p)
                                : static_cast<double>(n);
  const double sigma2 = ypy / dof;
  double ll = dof * (kLog2Pi + std::log(sigma2)) + ypy / sigma2 + logdet_v;
  if (restricted) ll += logdet_xtvx;
  return {-0.5 * ll, sigma2};
}
}  // namespace

std::pair<double, double> dense_reml_loglik(const lmmrec::DesignMatrices& d,
                                            const Eigen::VectorXd& gamma) {
  return dense_loglik(d, gamma, true);
}

std::pair<double, double> dense_ml_loglik(const lmmrec::DesignMatrices& d,
                                          const Eigen::VectorXd& gamma) {
  return dense_loglik(d, gamma, false);
}

Eigen::VectorXd finite_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double h_rel, double h_abs) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = std::max(h_abs, h_rel * std::abs(x(i)));
    Eigen::VectorXd lo = x, hi = x;
    lo(i) -= h;
    hi(i) += h;
    g(i) = (f(hi) - f(lo)) / (2.0 * h);
  }
  return g;
}

BalancedAnova balanced_one_way(const std::vector<std::vector<double>>& y) {
  const std::size_t a = y.size();
  const std::size_t n = y.front().size();
  double grand = 0.0;
  std::vector<double> group_mean(a, 0.0);
  for (std::size_t i = 0; i < a; ++i) {
    for (double v : y[i]) group_mean[i] += v;
    group_mean[i] /= static_cast<double>(n);
    grand += group_mean[i];
  }
  grand /= static_cast<double>(a);

  double ss_within = 0.0, ss_between = 0.0;
  for (std::size_t i = 0; i < a; ++i) {
    for (double v : y[i]) ss_within += (v - group_mean[i]) * (v - group_mean[i]);
    ss_between += (group_mean[i] - grand) * (group_mean[i] - grand);
  }
  BalancedAnova r;
  r.mse = ss_within / static_cast<double>(a * (n - 1));
  r.msa = static_cast<double>(n) * ss_between / static_cast<double>(a - 1);
  r.sigma2_e = r.mse;
  r.sigma2_u = std::max(0.0, (r.msa - r.mse) / static_cast<double>(n));
  return r;
}

KsResult ks_uniform(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double f = values[i];
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  // Asymptotic Kolmogorov tail with the usual small-sample correction.
  const double t = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * t * t);
    p += 2.0 * sign * term;
    sign = -sign;
    if (term < 1e-12) break;
  }
  KsResult r;
  r.statistic = d;
  r.p_value = std::clamp(p, 0.0, 1.0);
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double num = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    num += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  return num / std::sqrt(va * vb);
}

RandomInstance random_instance(lmmrec::Rng& rng, Eigen::Index max_rows,
                               int max_random_factors) {
  const int n_fixed = static_cast<int>(rng.index(3));       // 0..2
  const int n_random =
      1 + static_cast<int>(rng.index(static_cast<std::size_t>(max_random_factors)));
  const bool intercept = n_fixed == 0 ? true : rng.index(2) == 0;

  lmmrec::ModelFormula f;
  f.response = "y";
  f.intercept = intercept;
  lmmrec::ObservationTable t;

  auto add_factor = [&](const std::string& name, std::size_t n_levels) {
    lmmrec::Factor fac{name, {}};
    for (std::size_t l = 0; l < n_levels; ++l)
      fac.levels.push_back(name + std::to_string(l));
    t.factors.push_back(std::move(fac));
  };
  for (int i = 0; i < n_fixed; ++i) {
    const std::string name = "f" + std::to_string(i + 1);
    f.fixed_factors.push_back(name);
    add_factor(name, 2 + rng.index(3));
  }
  for (int i = 0; i < n_random; ++i) {
    const std::string name = "g" + std::to_string(i + 1);
    f.random_factors.push_back(name);
    add_factor(name, 2 + rng.index(4));
  }

  Eigen::Index p_max = intercept ? 1 : 0;
  for (const auto& fac : t.factors) p_max += static_cast<Eigen::Index>(fac.levels.size());
  const Eigen::Index n_rows = std::min<Eigen::Index>(
      max_rows,
      p_max + 5 + static_cast<Eigen::Index>(rng.index(
                      static_cast<std::size_t>(max_rows - p_max - 4))));

  std::vector<Eigen::VectorXd> effects;
  for (const auto& fac : t.factors) {
    Eigen::VectorXd e(static_cast<Eigen::Index>(fac.levels.size()));
    for (Eigen::Index l = 0; l < e.size(); ++l) e(l) = rng.normal(0.0, 0.8);
    effects.push_back(std::move(e));
  }

  for (Eigen::Index r = 0; r < n_rows; ++r) {
    std::vector<std::int32_t> codes;
    double mu = intercept ? 2.5 : 0.0;
    for (std::size_t fi = 0; fi < t.factors.size(); ++fi) {
      const auto code =
          static_cast<std::int32_t>(rng.index(t.factors[fi].levels.size()));
      codes.push_back(code);
      mu += effects[fi](code);
    }
    t.add_row(mu + rng.normal(0.0, 1.0), codes);
  }
  return {std::move(f), std::move(t)};
}

lmmrec::ModelFormula random_formula(lmmrec::Rng& rng) {
  static const std::vector<std::string> pool = {
      "age",  "occupation", "gender", "region", "income",
      "tier", "channel",    "device", "season", "cohort"};
  lmmrec::ModelFormula f;
  f.response = "y";
  std::vector<std::string> names = pool;
  for (std::size_t i = names.size() - 1; i > 0; --i)
    std::swap(names[i], names[rng.index(i + 1)]);

  const std::size_t n_fixed = rng.index(4);  // 0..3
  const std::size_t n_random = rng.index(4);
  f.intercept = n_fixed == 0 ? true : rng.index(2) == 0;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n_fixed; ++i)
    f.fixed_factors.push_back(names[next++]);
  for (std::size_t i = 0; i < n_random; ++i)
    f.random_factors.push_back(names[next++]);
  return f;
}

}  // namespace oracle
