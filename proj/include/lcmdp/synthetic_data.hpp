#pragma once

#include "lcmdp/damage.hpp"
#include "lcmdp/deterioration.hpp"
#include "lcmdp/fragility.hpp"
#include "lcmdp/hazard.hpp"

#include <cstdint>
#include <vector>

namespace lcmdp {

/// Unmaintained life cycles used to generate fragility training data: a
/// sampled deterioration path, Bernoulli event years, IM from the site hazard
/// curve and a synthetic damage index classified into SDS.
struct SyntheticFragilityStudy {
    HazardCurve hazard;
    GammaProcessParams deterioration;
    CdsScheme cds_scheme{{0.1, 0.4}};
    SdsScheme sds_scheme{{0.2, 0.5}};
    SyntheticResponseModel response;
    std::size_t trajectories = 5000;
    int years = 50;
};

/// One record per event year while the component is below the top SDS.
/// Trajectory i draws from its own stream keyed by (seed, i).
std::vector<TransitionRecord> generate_fragility_records(const SyntheticFragilityStudy& study, std::uint64_t seed);

} // namespace lcmdp
