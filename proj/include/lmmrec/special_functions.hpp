#pragma once

namespace lmmrec {

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
/// Power series for x < a + 1, Lentz continued fraction otherwise;
/// relative accuracy better than 1e-10 over the tested range.
double regularized_gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

/// Chi-square survival function Pr[X > x] with df degrees of freedom.
double chi_squared_sf(double x, double df);

/// Chi-square CDF Pr[X <= x].
double chi_squared_cdf(double x, double df);

}  // namespace lmmrec
