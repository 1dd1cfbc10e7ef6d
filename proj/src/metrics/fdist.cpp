#include "morphoreg/metrics/fdist.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace morphoreg::metrics {

namespace {

constexpr int kMaxIterations = 20000;
constexpr double kTiny = 1e-300;

// Continued fraction for I_x(a, b), modified Lentz.
auto beta_fraction(double x, double a, double b) -> double {
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) {
        d = kTiny;
    }
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIterations; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-16) {
            return h;
        }
    }
    throw std::runtime_error("incomplete beta continued fraction did not converge");
}

auto log_beta_prefactor(double x, double a, double b) -> double {
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
}

void require_shape(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
        throw std::invalid_argument("beta parameters must be positive and finite, got a=" + std::to_string(a) +
                                    " b=" + std::to_string(b));
    }
}

}  // namespace

auto regularized_beta(double x, double a, double b) -> double {
    require_shape(a, b);
    if (std::isnan(x)) {
        throw std::invalid_argument("regularized_beta: x is NaN");
    }
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double front = std::exp(log_beta_prefactor(x, a, b));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_fraction(x, a, b) / a;
    }
    return 1.0 - front * beta_fraction(1.0 - x, b, a) / b;
}

auto inverse_regularized_beta(double p, double a, double b) -> double {
    require_shape(a, b);
    if (!(p >= 0.0 && p <= 1.0)) {
        throw std::invalid_argument("inverse_regularized_beta: p must lie in [0, 1]");
    }
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;

    // Newton on a shrinking bracket; any step that leaves the bracket becomes a bisection.
    double lo = 0.0, hi = 1.0;
    double x = a / (a + b);
    const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    for (int it = 0; it < 400; ++it) {
        const double f = regularized_beta(x, a, b) - p;
        if (f == 0.0) {
            return x;
        }
        (f < 0.0 ? lo : hi) = x;
        const double log_pdf = log_norm + (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x);
        const double pdf = std::exp(log_pdf);
        double next = (pdf > 0.0 && std::isfinite(pdf)) ? x - f / pdf : std::numeric_limits<double>::quiet_NaN();
        if (!(next > lo && next < hi)) {
            next = 0.5 * (lo + hi);
        }
        if (std::abs(next - x) <= 1e-15 * std::min(x, 1.0 - x) || hi <= std::nextafter(lo, 1.0)) {
            return next;
        }
        x = next;
    }
    return x;
}

auto f_cdf(double x, double d1, double d2) -> double {
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return regularized_beta(d1 * x / (d1 * x + d2), 0.5 * d1, 0.5 * d2);
}

auto f_quantile(double p, double d1, double d2) -> double {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("f_quantile: p must lie in (0, 1)");
    }
    const double u = inverse_regularized_beta(p, 0.5 * d1, 0.5 * d2);
    if (u >= 1.0) {
        return std::numeric_limits<double>::infinity();
    }
    return d2 * u / (d1 * (1.0 - u));
}

}  // namespace morphoreg::metrics
