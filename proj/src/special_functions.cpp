#include "lcmdp/special_functions.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace lcmdp {

namespace {

constexpr int max_iterations = 100000;
constexpr double eps = std::numeric_limits<double>::epsilon();

// exp(a ln x - x - lgamma(a)), the common prefactor of both expansions.
double prefactor(double a, double x) {
    return std::exp(a * std::log(x) - x - std::lgamma(a));
}

double series_p(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    double ap = a;
    for (int n = 0; n < max_iterations; ++n) {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if (std::abs(term) < std::abs(sum) * eps) {
            return sum * prefactor(a, x);
        }
    }
    throw std::runtime_error("regularized_gamma_p: series did not converge");
}

double continued_fraction_q(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < max_iterations; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) {
            d = tiny;
        }
        c = b + an / c;
        if (std::abs(c) < tiny) {
            c = tiny;
        }
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < eps) {
            return h * prefactor(a, x);
        }
    }
    throw std::runtime_error("regularized_gamma_q: continued fraction did not converge");
}

void check_arguments(double a, double x) {
    if (!(a > 0.0) || std::isnan(x) || x < 0.0) {
        throw std::domain_error("incomplete gamma: requires a > 0 and x >= 0");
    }
}

} // namespace

double regularized_gamma_p(double a, double x) {
    check_arguments(a, x);
    if (x == 0.0) {
        return 0.0;
    }
    if (std::isinf(x)) {
        return 1.0;
    }
    if (x < a + 1.0) {
        return series_p(a, x);
    }
    return 1.0 - continued_fraction_q(a, x);
}

double regularized_gamma_q(double a, double x) {
    check_arguments(a, x);
    if (x == 0.0) {
        return 1.0;
    }
    if (std::isinf(x)) {
        return 0.0;
    }
    if (x < a + 1.0) {
        return 1.0 - series_p(a, x);
    }
    return continued_fraction_q(a, x);
}

double gamma_cdf(double shape, double rate, double x) {
    if (x <= 0.0) {
        return shape == 0.0 && x == 0.0 ? 1.0 : 0.0;
    }
    if (shape == 0.0) {
        return 1.0;
    }
    return regularized_gamma_p(shape, rate * x);
}

double gamma_log_pdf(double shape, double rate, double x) {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::domain_error("normal_quantile: p must lie in (0, 1)");
    }
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

} // namespace lcmdp
