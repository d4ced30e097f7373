#include "lcmdp/synthetic_data.hpp"

#include <random>

namespace lcmdp {

std::vector<TransitionRecord> generate_fragility_records(const SyntheticFragilityStudy& study, std::uint64_t seed) {
    study.deterioration.validate();
    study.response.validate(study.cds_scheme.n_cds(), study.sds_scheme.n_sds());
    const double p_event = annual_event_probability(study.hazard);
    const int top = study.sds_scheme.n_sds();
    std::vector<std::vector<TransitionRecord>> per_run(study.trajectories);
#pragma omp parallel for schedule(dynamic, 32)
    for (long long i = 0; i < static_cast<long long>(study.trajectories); ++i) {
        const auto run = static_cast<std::uint64_t>(i);
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32), 0x6f7e21u};
        Rng rng(seq);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const auto path = sample_path(study.deterioration, study.years, 1.0, rng);
        int sds = 1;
        auto& out = per_run[static_cast<std::size_t>(i)];
        for (int y = 1; y <= study.years && sds < top; ++y) {
            if (!(unif(rng) < p_event)) {
                continue;
            }
            const double im = conditional_im_quantile(study.hazard, unif(rng));
            const int cds = study.cds_scheme.classify(path[static_cast<std::size_t>(y)]);
            const double d = generate_response(study.response, study.sds_scheme, cds, sds, im, rng);
            const int next = classify_sds(d, study.sds_scheme);
            out.push_back({static_cast<int>(i), y, sds, next, cds, im});
            sds = next;
        }
    }
    std::vector<TransitionRecord> records;
    for (auto& r : per_run) {
        records.insert(records.end(), r.begin(), r.end());
    }
    return records;
}

} // namespace lcmdp
