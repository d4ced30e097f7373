#include "lcmdp/deterioration.hpp"

#include "lcmdp/errors.hpp"
#include "lcmdp/special_functions.hpp"

#include "lcmdp/quadrature.hpp"

#include <cmath>
#include <limits>

namespace lcmdp {

namespace {

constexpr double occupancy_floor = 1e-300;
constexpr double quadrature_abs_tol = 1e-15;

// Survival function of Gamma(shape, rate) at y; 1 for y <= 0.
double gamma_sf(double shape, double rate, double y) {
    if (y <= 0.0) {
        return 1.0;
    }
    if (std::isinf(y)) {
        return 0.0;
    }
    return regularized_gamma_q(shape, rate * y);
}

// P(lo <= D < hi) for D ~ Gamma(shape, rate), choosing the tail that avoids cancellation.
double interval_probability(double shape, double rate, double lo, double hi) {
    const double p_lo = gamma_cdf(shape, rate, lo);
    if (p_lo < 0.5) {
        const double p_hi = std::isinf(hi) ? 1.0 : gamma_cdf(shape, rate, hi);
        return p_hi - p_lo;
    }
    return gamma_sf(shape, rate, lo) - gamma_sf(shape, rate, hi);
}

double integrate(const std::function<double(double)>& f, double lo, double hi) {
    return integrate_adaptive(f, lo, hi, transition_quadrature_tolerance, quadrature_abs_tol).value;
}

} // namespace

void GammaProcessParams::validate() const {
    if (!(a > 0.0) || !(b > 0.0) || !(beta > 0.0) || !std::isfinite(a) || !std::isfinite(b) ||
        !std::isfinite(beta)) {
        throw ValidationError("gamma process parameters a, b, beta must be positive and finite");
    }
}

CdsScheme::CdsScheme(std::vector<double> thresholds) : thresholds_{std::move(thresholds)} {
    for (std::size_t i = 0; i < thresholds_.size(); ++i) {
        if (!(thresholds_[i] > 0.0) || !std::isfinite(thresholds_[i]) ||
            (i > 0 && !(thresholds_[i] > thresholds_[i - 1]))) {
            throw ValidationError("CDS thresholds must be positive, finite and strictly increasing");
        }
    }
}

int CdsScheme::classify(double loss) const {
    int state = 1;
    for (double c : thresholds_) {
        if (loss >= c) {
            ++state;
        }
    }
    return state;
}

double CdsScheme::lower(int l) const {
    return l <= 1 ? 0.0 : thresholds_.at(static_cast<std::size_t>(l - 2));
}

double CdsScheme::upper(int l) const {
    return l >= n_cds() ? std::numeric_limits<double>::infinity()
                        : thresholds_.at(static_cast<std::size_t>(l - 1));
}

double shape(const GammaProcessParams& p, double tau) {
    return tau <= 0.0 ? 0.0 : p.a * std::pow(tau, p.b);
}

double marginal_cdf(const GammaProcessParams& p, double tau, double x) {
    if (std::isinf(x)) {
        return 1.0;
    }
    return gamma_cdf(shape(p, tau), p.beta, x);
}

double increment_cdf(const GammaProcessParams& p, double tau1, double tau2, double x) {
    if (std::isinf(x)) {
        return 1.0;
    }
    return gamma_cdf(shape(p, tau2) - shape(p, tau1), p.beta, x);
}

std::vector<double> state_occupancy(const GammaProcessParams& p, const CdsScheme& scheme, double tau) {
    const int n = scheme.n_cds();
    std::vector<double> occ(static_cast<std::size_t>(n), 0.0);
    const double alpha = shape(p, tau);
    if (alpha == 0.0) {
        occ[0] = 1.0;
        return occ;
    }
    for (int l = 1; l <= n; ++l) {
        occ[static_cast<std::size_t>(l - 1)] =
            interval_probability(alpha, p.beta, scheme.lower(l), scheme.upper(l));
    }
    return occ;
}

TransitionMatrixResult transition_matrix_detailed(const GammaProcessParams& p,
                                                  const CdsScheme& scheme, double tau, double dt) {
    p.validate();
    if (!(tau >= 0.0) || !(dt > 0.0)) {
        throw ValidationError("transition_matrix: requires tau >= 0 and dt > 0");
    }
    const int n = scheme.n_cds();
    TransitionMatrixResult result{Matrix(static_cast<std::size_t>(n), static_cast<std::size_t>(n)), {}};
    Matrix& m = result.matrix;
    const double alpha = shape(p, tau);
    const double d_alpha = shape(p, tau + dt) - alpha;
    const double beta = p.beta;

    for (int l = 1; l <= n; ++l) {
        const auto row = static_cast<std::size_t>(l - 1);
        double off_diagonal = 0.0;

        if (alpha == 0.0) {
            // D(tau) = 0 exactly: only the first state is reachable, with the increment law.
            if (l > 1) {
                m(row, row) = 1.0;
                result.fallback_rows.push_back(l);
                continue;
            }
            for (int target = 2; target <= n; ++target) {
                const double v = interval_probability(d_alpha, beta, scheme.lower(target),
                                                      scheme.upper(target));
                m(row, static_cast<std::size_t>(target - 1)) = v;
                off_diagonal += v;
            }
            m(row, row) = 1.0 - off_diagonal;
            continue;
        }

        const double lo = scheme.lower(l);
        const double hi = scheme.upper(l);
        const double occupancy = interval_probability(alpha, beta, lo, hi);
        if (!(occupancy >= occupancy_floor)) {
            m(row, row) = 1.0;
            result.fallback_rows.push_back(l);
            continue;
        }
        if (l == n) {
            m(row, row) = 1.0;
            continue;
        }
        const double log_occupancy = std::log(occupancy);
        const double log_norm = alpha * std::log(beta) - std::lgamma(alpha) - log_occupancy;

        for (int target = l + 1; target <= n; ++target) {
            const double c_lo = scheme.lower(target);
            const double c_hi = scheme.upper(target);
            auto reach = [&](double x) {
                return gamma_sf(d_alpha, beta, c_lo - x) - gamma_sf(d_alpha, beta, c_hi - x);
            };
            double value = 0.0;
            if (lo == 0.0 && alpha < 1.0) {
                // x = hi * t^(1/alpha) removes the x^(alpha-1) singularity at the origin.
                const double log_scale = log_norm + alpha * std::log(hi) - std::log(alpha);
                value = integrate(
                    [&](double t) {
                        if (t <= 0.0) {
                            return std::exp(log_scale) * reach(0.0);
                        }
                        const double x = hi * std::pow(t, 1.0 / alpha);
                        return std::exp(log_scale - beta * x) * reach(x);
                    },
                    0.0, 1.0);
            } else {
                value = integrate(
                    [&](double x) {
                        if (x <= 0.0) {
                            return 0.0;
                        }
                        const double log_density =
                            log_norm + (alpha - 1.0) * std::log(x) - beta * x;
                        return std::exp(log_density) * reach(x);
                    },
                    lo, hi);
            }
            value = std::max(0.0, value);
            m(row, static_cast<std::size_t>(target - 1)) = value;
            off_diagonal += value;
        }
        m(row, row) = std::max(0.0, 1.0 - off_diagonal);
    }
    return result;
}

Matrix transition_matrix(const GammaProcessParams& p, const CdsScheme& scheme, double tau, double dt) {
    return transition_matrix_detailed(p, scheme, tau, dt).matrix;
}

CdsTransitionSet build_transition_set(const GammaProcessParams& p, const CdsScheme& scheme,
                                      int tau_count, double dt) {
    if (tau_count < 1) {
        throw ValidationError("build_transition_set: tau_count must be >= 1");
    }
    CdsTransitionSet set;
    set.dt = dt;
    set.matrices.resize(static_cast<std::size_t>(tau_count));
    std::vector<std::vector<int>> fallbacks(static_cast<std::size_t>(tau_count));
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < tau_count; ++k) {
        auto r = transition_matrix_detailed(p, scheme, k * dt, dt);
        set.matrices[static_cast<std::size_t>(k)] = std::move(r.matrix);
        fallbacks[static_cast<std::size_t>(k)] = std::move(r.fallback_rows);
    }
    for (int k = 0; k < tau_count; ++k) {
        for (int row : fallbacks[static_cast<std::size_t>(k)]) {
            set.fallback_rows.emplace_back(k, row);
        }
    }
    return set;
}

GammaProcessParams calibrate_from_moments(double mean_T, double sd_T, double b, double T) {
    if (!(mean_T > 0.0) || !(sd_T > 0.0) || !(T > 0.0) || !(b > 0.0)) {
        throw ValidationError("calibration targets mean, sd, b and T must all be positive");
    }
    GammaProcessParams p;
    p.b = b;
    p.beta = mean_T / (sd_T * sd_T);
    p.a = mean_T * p.beta / std::pow(T, b);
    return p;
}

std::vector<double> sample_path(const GammaProcessParams& p, double horizon, double dt, Rng& rng) {
    if (!(dt > 0.0) || horizon < 0.0) {
        throw ValidationError("sample_path: requires dt > 0 and horizon >= 0");
    }
    const double steps_real = horizon / dt;
    const auto steps = static_cast<long>(std::llround(steps_real));
    if (std::abs(steps_real - static_cast<double>(steps)) > 1e-9) {
        throw ValidationError("sample_path: horizon must be a multiple of dt");
    }
    std::vector<double> path;
    path.reserve(static_cast<std::size_t>(steps) + 1);
    path.push_back(0.0);
    double level = 0.0;
    for (long k = 0; k < steps; ++k) {
        const double d_alpha = shape(p, (k + 1) * dt) - shape(p, k * dt);
        std::gamma_distribution<double> increment(d_alpha, 1.0 / p.beta);
        level += increment(rng);
        path.push_back(level);
    }
    return path;
}

} // namespace lcmdp
