#pragma once

#include "lcmdp/hazard.hpp"
#include "lcmdp/matrix.hpp"

#include <vector>

namespace lcmdp {

/// Nonstationary gamma process D(tau) ~ Gamma(a * tau^b, beta).
struct GammaProcessParams {
    double a = 1.0;    ///< shape coefficient, 1/year^b
    double b = 1.0;    ///< shape exponent
    double beta = 1.0; ///< rate, 1/section-loss unit

    void validate() const;
};

/// Corrosion damage states from increasing section-loss cut points.
/// CDS l (1-based) covers [c_{l-1}, c_l) with c_0 = 0 and c_n = inf.
class CdsScheme {
public:
    explicit CdsScheme(std::vector<double> thresholds);

    const std::vector<double>& thresholds() const { return thresholds_; }
    int n_cds() const { return static_cast<int>(thresholds_.size()) + 1; }

    /// 1-based state of a section-loss value; thresholds belong to the upper state.
    int classify(double loss) const;

    /// Lower/upper bound of state l (1-based); upper of the last state is +inf.
    double lower(int l) const;
    double upper(int l) const;

private:
    std::vector<double> thresholds_;
};

double shape(const GammaProcessParams& p, double tau);
double marginal_cdf(const GammaProcessParams& p, double tau, double x);
double increment_cdf(const GammaProcessParams& p, double tau1, double tau2, double x);
std::vector<double> state_occupancy(const GammaProcessParams& p, const CdsScheme& scheme, double tau);

/// Relative tolerance of the adaptive quadrature behind transition_matrix.
inline constexpr double transition_quadrature_tolerance = 1e-9;

struct TransitionMatrixResult {
    Matrix matrix;
    /// 1-based rows replaced by the identity because their occupancy underflowed.
    std::vector<int> fallback_rows;
};

/// Exact CDS transition probabilities over (tau, tau + dt], averaging the
/// increment law over the truncated marginal density of each starting state.
TransitionMatrixResult transition_matrix_detailed(const GammaProcessParams& p,
                                                  const CdsScheme& scheme, double tau, double dt);
Matrix transition_matrix(const GammaProcessParams& p, const CdsScheme& scheme, double tau, double dt);

/// Time-indexed CDS transitions; matrices[tau] covers (tau*dt, (tau+1)*dt].
struct CdsTransitionSet {
    std::vector<Matrix> matrices;
    double dt = 1.0;
    std::vector<std::pair<int, int>> fallback_rows; ///< (tau index, 1-based row)

    int n_cds() const { return matrices.empty() ? 0 : static_cast<int>(matrices.front().rows()); }
    int tau_count() const { return static_cast<int>(matrices.size()); }
};

CdsTransitionSet build_transition_set(const GammaProcessParams& p, const CdsScheme& scheme,
                                      int tau_count, double dt = 1.0);

/// Moment match at time T: mean = alpha(T)/beta, variance = alpha(T)/beta^2.
GammaProcessParams calibrate_from_moments(double mean_T, double sd_T, double b, double T);

/// Cumulative loss at dt, 2dt, ..., horizon (first element 0 at tau = 0).
std::vector<double> sample_path(const GammaProcessParams& p, double horizon, double dt, Rng& rng);

} // namespace lcmdp
