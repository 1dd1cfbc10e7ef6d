#pragma once

namespace morphoreg::metrics {

// Regularized incomplete beta I_x(a, b).
[[nodiscard]] auto regularized_beta(double x, double a, double b) -> double;

// x such that I_x(a, b) = p, to 1e-10 in probability or better.
[[nodiscard]] auto inverse_regularized_beta(double p, double a, double b) -> double;

// CDF and quantile of the F distribution with (d1, d2) degrees of freedom. Degrees of
// freedom may be non-integer.
[[nodiscard]] auto f_cdf(double x, double d1, double d2) -> double;
[[nodiscard]] auto f_quantile(double p, double d1, double d2) -> double;

}  // namespace morphoreg::metrics
