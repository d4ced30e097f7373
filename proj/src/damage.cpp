#include "lcmdp/damage.hpp"

#include "lcmdp/errors.hpp"
#include "lcmdp/special_functions.hpp"

#include <cmath>

namespace lcmdp {

void ParkAngInputs::validate() const {
    if (!(delta_u > 0.0) || !(v_y > 0.0) || !(beta_pa >= 0.0) || !(delta_m >= 0.0) ||
        !(hysteretic_energy >= 0.0)) {
        throw ValidationError("Park-Ang inputs: need delta_u, v_y > 0 and non-negative demands");
    }
}

double park_ang_index(const ParkAngInputs& in) {
    in.validate();
    return in.delta_m / in.delta_u + in.beta_pa * in.hysteretic_energy / (in.v_y * in.delta_u);
}

SdsScheme::SdsScheme(std::vector<double> thresholds) : thresholds_{std::move(thresholds)} {
    for (std::size_t i = 0; i < thresholds_.size(); ++i) {
        if (!(thresholds_[i] > 0.0) || !std::isfinite(thresholds_[i]) ||
            (i > 0 && !(thresholds_[i] > thresholds_[i - 1]))) {
            throw ValidationError("SDS thresholds must be positive, finite and strictly increasing");
        }
    }
}

double SdsScheme::lower(int j) const {
    return j <= 1 ? 0.0 : thresholds_.at(static_cast<std::size_t>(j - 2));
}

int classify_sds(double d_pa, const SdsScheme& scheme) {
    int state = 1;
    for (double c : scheme.thresholds()) {
        if (d_pa >= c) {
            ++state;
        }
    }
    return state;
}

void SyntheticResponseModel::validate(int n_cds, int n_sds) const {
    if (!(median_at_ref > 0.0) || !(im_ref > 0.0) || !(slope >= 0.0) || !(dispersion >= 0.0)) {
        throw ValidationError("synthetic response: median, im_ref > 0 and slope, dispersion >= 0");
    }
    if (static_cast<int>(cds_factor.size()) != n_cds ||
        static_cast<int>(prior_sds_factor.size()) != n_sds) {
        throw ValidationError("synthetic response: factor lists must match the scheme sizes");
    }
    for (std::size_t i = 0; i < cds_factor.size(); ++i) {
        if (!(cds_factor[i] > 0.0) || (i > 0 && cds_factor[i] < cds_factor[i - 1])) {
            throw ValidationError("synthetic response: cds factors must be positive and non-decreasing");
        }
    }
    for (double f : prior_sds_factor) {
        if (!(f > 0.0)) {
            throw ValidationError("synthetic response: prior-state factors must be positive");
        }
    }
}

double SyntheticResponseModel::median(int cds, int prior_sds, double im) const {
    return median_at_ref * std::pow(im / im_ref, slope) *
           cds_factor.at(static_cast<std::size_t>(cds - 1)) *
           prior_sds_factor.at(static_cast<std::size_t>(prior_sds - 1));
}

double generate_response(const SyntheticResponseModel& model, const SdsScheme& scheme, int cds,
                         int prior_sds, double im, Rng& rng) {
    if (!(im > 0.0)) {
        throw ValidationError("generate_response: im must be positive");
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    const double z = normal(rng);
    const double d = model.median(cds, prior_sds, im) * std::exp(model.dispersion * z);
    return std::max(d, scheme.lower(prior_sds));
}

std::vector<double> response_sds_probabilities(const SyntheticResponseModel& model,
                                               const SdsScheme& scheme, int cds, int prior_sds,
                                               double im) {
    const int n = scheme.n_sds();
    const double log_median = std::log(model.median(cds, prior_sds, im));
    auto exceed = [&](double threshold) {
        if (model.dispersion == 0.0) {
            return log_median >= std::log(threshold) ? 1.0 : 0.0;
        }
        return 1.0 - normal_cdf((std::log(threshold) - log_median) / model.dispersion);
    };
    std::vector<double> p(static_cast<std::size_t>(n), 0.0);
    // P(state >= j) for j > prior follows the lognormal tail; states below prior collapse onto it.
    std::vector<double> at_least(static_cast<std::size_t>(n + 1), 0.0);
    for (int j = 1; j <= n; ++j) {
        at_least[static_cast<std::size_t>(j - 1)] = j <= prior_sds ? 1.0 : exceed(scheme.lower(j));
    }
    for (int j = 1; j <= n; ++j) {
        p[static_cast<std::size_t>(j - 1)] =
            at_least[static_cast<std::size_t>(j - 1)] - at_least[static_cast<std::size_t>(j)];
    }
    return p;
}

} // namespace lcmdp
