#pragma once

#include <functional>

namespace lcmdp {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    int intervals = 0;
    bool converged = false;
};

/// Globally adaptive 7/15-point Gauss-Kronrod integration on a finite interval.
///
/// The interval with the largest error estimate is bisected until the summed
/// estimate drops below max(abs_tol, rel_tol * |integral|) or `max_intervals`
/// subintervals exist. Endpoints are never evaluated, so integrable endpoint
/// singularities are tolerated.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double lo, double hi,
                                    double rel_tol, double abs_tol = 0.0, int max_intervals = 4000);

} // namespace lcmdp
