#pragma once

#include "lcmdp/hazard.hpp"

#include <vector>

namespace lcmdp {

struct ParkAngInputs {
    double delta_m = 0.0;           ///< maximum deformation
    double delta_u = 1.0;           ///< ultimate deformation capacity
    double hysteretic_energy = 0.0; ///< cumulative dissipated energy
    double v_y = 1.0;               ///< yield strength
    double beta_pa = 0.1;           ///< energy-term coefficient

    void validate() const;
};

double park_ang_index(const ParkAngInputs& in);

/// Seismic damage states from increasing Park-Ang cut points (0.2, 0.5 by default).
/// A value exactly at a threshold belongs to the upper state.
class SdsScheme {
public:
    explicit SdsScheme(std::vector<double> thresholds);

    const std::vector<double>& thresholds() const { return thresholds_; }
    int n_sds() const { return static_cast<int>(thresholds_.size()) + 1; }

    /// Lower bound of state j (1-based); 0 for the first state.
    double lower(int j) const;

private:
    std::vector<double> thresholds_;
};

int classify_sds(double d_pa, const SdsScheme& scheme);

/// Lognormal Park-Ang demand standing in for nonlinear response analysis.
///
/// median(im, cds, prior) = median_at_ref * (im / im_ref)^slope
///                          * cds_factor[cds-1] * prior_sds_factor[prior-1]
/// The drawn value is floored at the lower bound of the prior state, so the
/// classified state never decreases.
struct SyntheticResponseModel {
    double median_at_ref = 0.3;
    double im_ref = 0.5;
    double slope = 1.2;
    double dispersion = 0.5;
    std::vector<double> cds_factor{1.0, 1.25, 1.6};
    std::vector<double> prior_sds_factor{1.0, 1.3, 1.3};

    void validate(int n_cds, int n_sds) const;
    double median(int cds, int prior_sds, double im) const;
};

double generate_response(const SyntheticResponseModel& model, const SdsScheme& scheme, int cds,
                         int prior_sds, double im, Rng& rng);

/// Closed-form SDS distribution of generate_response at fixed inputs.
std::vector<double> response_sds_probabilities(const SyntheticResponseModel& model,
                                               const SdsScheme& scheme, int cds, int prior_sds,
                                               double im);

} // namespace lcmdp
