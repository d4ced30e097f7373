#pragma once

namespace lcmdp {

/// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
///
/// Power series for x < a + 1, Lentz continued fraction for Q otherwise.
/// Relative error stays below 1e-12 for a in (0, 1e4]. P(a, 0) = 0 and
/// P(a, inf) = 1. Throws std::domain_error for a <= 0 or x < 0.
double regularized_gamma_p(double a, double x);

/// Complement Q(a, x) = 1 - P(a, x), evaluated without cancellation.
double regularized_gamma_q(double a, double x);

/// CDF of Gamma(shape, rate) at x. Returns 0 for x <= 0 and for shape == 0
/// the degenerate point mass at zero (CDF 1 for x >= 0).
double gamma_cdf(double shape, double rate, double x);

/// Log density of Gamma(shape, rate) at x > 0.
double gamma_log_pdf(double shape, double rate, double x);

double normal_cdf(double z);
double normal_quantile(double p);

} // namespace lcmdp
