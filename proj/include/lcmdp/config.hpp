#pragma once

#include "lcmdp/damage.hpp"
#include "lcmdp/deterioration.hpp"
#include "lcmdp/fragility.hpp"
#include "lcmdp/mdp_model.hpp"
#include "lcmdp/simulator.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace lcmdp {

struct ComponentConfig {
    std::string name;
    std::filesystem::path hazard_csv; ///< resolved against the config directory
    SitePosition site;
    double replacement_value = 0.0;
};

struct DeteriorationTargets {
    double mean = 0.4;
    double sd = 0.075;
    double b = 1.5;
    double T = 50.0;
};

struct FragilityDataConfig {
    std::size_t trajectories = 5000;
    int years = 50;
    SyntheticResponseModel response;
    FitOptions fit;
    bool fatal_nonconvergence = false;
};

struct SolverConfig {
    double memory_budget_bytes = 4.0e9;
    std::size_t oracle_state_cap = 100000;
    bool export_policy_csv = false;
    bool export_values = true;
};

struct SimulationConfig {
    std::size_t runs = 10000;
    std::vector<int> snapshot_years{25, 50};
    std::vector<double> loss_grid;
    HazardSampling hazard = HazardSampling::CorrelatedField;
    std::size_t trajectory_runs = 0;
};

/// Parsed and validated run configuration (one JSON file).
struct RunConfig {
    std::filesystem::path source;
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 1;
    int threads = 0;

    std::vector<ComponentConfig> components;
    double correlation_range_km = 20.0;
    std::size_t im_bins = 100;

    DeteriorationTargets deterioration;
    std::vector<double> cds_thresholds{0.1, 0.4};
    std::vector<double> sds_thresholds{0.2, 0.5};

    FragilityDataConfig fragility;

    int n_tau = 50;
    int horizon = 50;
    double discount = 0.97;
    int tau_reduction = 10;

    CostModel costs;
    SolverConfig solver;
    SimulationConfig simulation;
    std::vector<CbmRule> cbm_rules;

    /// Throws ValidationError with the offending key on any problem.
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir);
    void validate() const;

    std::vector<std::string> component_names() const;
    std::vector<HazardCurve> load_hazard_curves() const;
};

/// Case-study inputs from the configuration plus the fitted artifacts.
CaseStudyInputs make_case_study_inputs(const RunConfig& config, const GammaProcessParams& deterioration,
                                       const std::vector<FragilityModel>& fragility);

void save_deterioration_params(const std::filesystem::path& path, const GammaProcessParams& p,
                               const DeteriorationTargets& targets);
GammaProcessParams load_deterioration_params(const std::filesystem::path& path);

} // namespace lcmdp
