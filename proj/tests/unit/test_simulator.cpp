#include "doctest.h"

#include "lcmdp/config.hpp"
#include "lcmdp/errors.hpp"
#include "lcmdp/simulator.hpp"

#include <omp.h>

#include <cmath>

using namespace lcmdp;

namespace {

FragilityModel moderate_fragility() {
    FragilityModel m(3, 3);
    for (int l = 1; l <= 3; ++l) {
        m.coefficients(1, l, 2) = {0.5 + 0.3 * l, 1.5};
        m.coefficients(1, l, 3) = {-0.5 + 0.4 * l, 2.0};
        m.coefficients(2, l, 3) = {0.2 + 0.3 * l, 1.5};
    }
    return m;
}

CaseStudyModel tiny_model() {
    const auto cfg = RunConfig::load(std::filesystem::path(LCMDP_DATA_DIR) / "config_tiny.json");
    const auto params = calibrate_from_moments(cfg.deterioration.mean, cfg.deterioration.sd, cfg.deterioration.b,
                                               cfg.deterioration.T);
    return build_case_study(make_case_study_inputs(cfg, params, std::vector<FragilityModel>(3, moderate_fragility())));
}

// Freezes every component: no events, no corrosion, do-nothing is the identity.
CaseStudyModel frozen(CaseStudyModel m) {
    std::fill(m.event_probability.begin(), m.event_probability.end(), 0.0);
    for (auto& d : m.deterioration.matrices) {
        d = Matrix::identity(d.rows());
    }
    for (auto& c : m.mdp.components) {
        c.transitions[0] = Matrix::identity(c.transitions[0].rows());
    }
    return m;
}

} // namespace

TEST_SUITE("simulator") {

TEST_CASE("cbm rules") {
    const auto rules = baseline_cbm_rules();
    REQUIRE(rules.size() == 3);
    using A = MaintenanceAction;
    CHECK(rules[0].name() == "CBM1");
    CHECK(cbm_action(rules[0], 1, 1) == A::DoNothing);
    CHECK(cbm_action(rules[0], 2, 2) == A::MinorRepair);
    CHECK(cbm_action(rules[0], 3, 1) == A::MajorRepair);
    CHECK(cbm_action(rules[0], 1, 3) == A::MajorRepair);
    CHECK(cbm_action(rules[1], 2, 1) == A::MinorRepair);
    CHECK(cbm_action(rules[1], 1, 2) == A::MajorRepair);
    CHECK(cbm_action(rules[2], 2, 2) == A::DoNothing);
    CHECK(cbm_action(rules[2], 3, 1) == A::MinorRepair);
    CHECK(cbm_action(rules[2], 3, 3) == A::MajorRepair);

    const std::vector<CbmPredicate> overlapping{{A::DoNothing, {{1, 3, 1, 2}}}, {A::MajorRepair, {{1, 3, 2, 3}}}};
    CHECK_THROWS_AS(CbmRule("x", overlapping, 3, 3, CbmOverlap::Reject), ValidationError);
    CHECK(CbmRule("x", overlapping, 3, 3, CbmOverlap::MostSevere).action(1, 2) == A::MajorRepair);
    const std::vector<CbmPredicate> gap{{A::DoNothing, {{1, 3, 1, 2}}}};
    CHECK_THROWS_AS(CbmRule("gap", gap, 3, 3), ValidationError);
}

TEST_CASE("frozen system costs nothing") {
    const auto model = frozen(tiny_model());
    SimulationOptions o;
    o.n_runs = 200;
    o.snapshot_years = {3, 6};
    o.loss_grid = {0.0, 100.0};
    for (auto mode : {HazardSampling::CorrelatedField, HazardSampling::MdpConsistent}) {
        o.hazard = mode;
        const auto m = simulate_lifecycle(model, PolicySpec::no_action(), o);
        CHECK(m.costs.total == 0.0);
        CHECK(m.costs.total_se == 0.0);
        for (const auto& c : m.cumulative_failure) {
            for (double p : c) {
                CHECK(p == 0.0);
            }
        }
        for (const auto& a : m.aep) {
            CHECK(a.exceedance == std::vector<double>{0.0, 0.0});
        }
    }
    CHECK(static_baseline_curve(model, {0.0, 500.0}) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("results do not depend on the thread count") {
    const auto model = tiny_model();
    SimulationOptions o;
    o.n_runs = 400;
    o.snapshot_years = {3, 6};
    o.loss_grid = {0.0, 500.0, 1000.0};
    o.seed = 77;
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto a = simulate_lifecycle(model, PolicySpec::cbm(baseline_cbm_rules()[0]), o);
    omp_set_num_threads(4);
    const auto b = simulate_lifecycle(model, PolicySpec::cbm(baseline_cbm_rules()[0]), o);
    omp_set_num_threads(saved);
    CHECK(a.costs.total == b.costs.total);
    CHECK(a.costs.total_se == b.costs.total_se);
    CHECK(a.cumulative_failure == b.cumulative_failure);
    CHECK(a.system_any_annual == b.system_any_annual);
    REQUIRE(a.aep.size() == b.aep.size());
    for (std::size_t i = 0; i < a.aep.size(); ++i) {
        CHECK(a.aep[i].exceedance == b.aep[i].exceedance);
    }
    CHECK(a.costs.total == doctest::Approx(a.costs.mr_cost + a.costs.risk_cost).epsilon(1e-12));

    o.seed = 78;
    const auto c = simulate_lifecycle(model, PolicySpec::cbm(baseline_cbm_rules()[0]), o);
    CHECK(c.costs.total != a.costs.total);
}

TEST_CASE("curves are well formed") {
    const auto model = tiny_model();
    SimulationOptions o;
    o.n_runs = 500;
    o.snapshot_years = {3, 6};
    o.loss_grid = {0.0, 200.0, 600.0, 2000.0, 6000.0};
    o.trajectory_runs = 2;
    const auto m = simulate_lifecycle(model, PolicySpec::no_action(), o);
    for (const auto& c : m.cumulative_failure) {
        CHECK(c.size() == 7);
        CHECK(c[0] == 0.0);
        for (std::size_t y = 1; y < c.size(); ++y) {
            CHECK(c[y] >= c[y - 1]);
        }
    }
    for (std::size_t y = 1; y < m.system_any_cumulative.size(); ++y) {
        CHECK(m.system_any_cumulative[y] >= m.system_any_cumulative[y - 1]);
        CHECK(m.system_all_annual[y] <= m.system_any_annual[y]);
    }
    for (const auto& a : m.aep) {
        for (std::size_t i = 1; i < a.exceedance.size(); ++i) {
            CHECK(a.exceedance[i] <= a.exceedance[i - 1]);
        }
    }
    CHECK(m.trajectories.size() == 2 * 7 * 3);
    CHECK(m.costs.mr_cost == 0.0);
    CHECK(proportion_se(0.25, 100) == doctest::Approx(std::sqrt(0.25 * 0.75 / 100.0)));

    const auto s = static_baseline_curve(model, o.loss_grid);
    for (std::size_t i = 1; i < s.size(); ++i) {
        CHECK(s[i] <= s[i - 1]);
    }
    CHECK(s.front() > 0.0);
    CHECK(s.back() == 0.0);
}

TEST_CASE("monte carlo cost matches the policy value") {
    const auto model = tiny_model();
    const auto solved = tensor_value_iteration(model.mdp);
    const std::size_t pristine = model.mdp.encode_state(std::vector<std::size_t>(3, 0));
    SimulationOptions o;
    o.n_runs = 20000;
    o.snapshot_years = {6};
    o.hazard = HazardSampling::MdpConsistent;
    const auto opt = simulate_lifecycle(model, PolicySpec::optimal(solved.policy), o);
    CHECK(std::abs(opt.costs.total - solved.initial_values[pristine]) <= 3.0 * opt.costs.total_se);

    Policy idle = solved.policy;
    for (auto& e : idle.actions) {
        std::fill(e.begin(), e.end(), std::uint16_t{0});
    }
    const auto v_idle = evaluate_policy(model.mdp, idle);
    const auto none = simulate_lifecycle(model, PolicySpec::no_action(), o);
    CHECK(std::abs(none.costs.total - v_idle[pristine]) <= 3.0 * none.costs.total_se);
}

TEST_CASE("invalid simulation inputs") {
    const auto model = tiny_model();
    SimulationOptions o;
    o.snapshot_years = {7};
    CHECK_THROWS_AS(simulate_lifecycle(model, PolicySpec::no_action(), o), ValidationError);
    Policy short_policy;
    short_policy.state_count = model.joint_state_count();
    short_policy.actions.resize(2, std::vector<std::uint16_t>(model.joint_state_count(), 0));
    o.snapshot_years = {3};
    CHECK_THROWS_AS(simulate_lifecycle(model, PolicySpec::optimal(short_policy), o), ValidationError);
}

}
