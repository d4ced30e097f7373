#pragma once

#include "lcmdp/mdp_model.hpp"
#include "lcmdp/solver.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lcmdp {

/// Axis-aligned box on the (CDS, SDS) grid; bounds are inclusive and 1-based.
struct CbmCondition {
    int cds_min = 1;
    int cds_max = 3;
    int sds_min = 1;
    int sds_max = 3;
    bool matches(int cds, int sds) const {
        return cds >= cds_min && cds <= cds_max && sds >= sds_min && sds <= sds_max;
    }
};

/// Predicate for one action: the union of its conditions.
struct CbmPredicate {
    MaintenanceAction action = MaintenanceAction::DoNothing;
    std::vector<CbmCondition> any_of;
};

enum class CbmOverlap {
    Reject,     ///< a cell matched by two actions is a validation error
    MostSevere, ///< MajorRepair beats MinorRepair beats DoNothing
};

/// Condition-based rule resolved into one action per (CDS, SDS) cell; the same
/// rule applies to every component.
class CbmRule {
public:
    CbmRule() = default;
    /// Throws ValidationError when a cell is unmatched, or matched twice under CbmOverlap::Reject.
    CbmRule(std::string name, const std::vector<CbmPredicate>& predicates, int n_cds, int n_sds,
            CbmOverlap overlap = CbmOverlap::Reject);

    const std::string& name() const { return name_; }
    int n_cds() const { return n_cds_; }
    int n_sds() const { return n_sds_; }
    MaintenanceAction action(int cds, int sds) const;

private:
    std::string name_;
    int n_cds_ = 0;
    int n_sds_ = 0;
    std::vector<MaintenanceAction> grid_; ///< [(cds - 1) * n_sds + (sds - 1)]
};

MaintenanceAction cbm_action(const CbmRule& rule, int cds, int sds);

/// The three baseline rules for a 3 x 3 grid. Overlapping cells in the
/// published triggers resolve to the more severe action.
std::vector<CbmRule> baseline_cbm_rules();

/// Joint-action lookup (epoch, joint state) -> joint action.
using PolicyLookup = std::function<std::uint16_t(int, std::size_t)>;

struct PolicySpec {
    enum class Kind { Optimal, Cbm, NoAction };
    Kind kind = Kind::NoAction;
    std::string name = "NoAction";
    PolicyLookup lookup; ///< Optimal only
    int horizon = 0;     ///< Optimal only
    CbmRule rule;        ///< Cbm only

    static PolicySpec no_action();
    static PolicySpec cbm(CbmRule rule);
    /// `policy` must outlive the spec.
    static PolicySpec optimal(const Policy& policy, std::string name = "Optimal");
    static PolicySpec optimal(PolicyLookup lookup, int horizon, std::string name = "Optimal");
};

enum class HazardSampling {
    CorrelatedField, ///< one regional event per year, Gaussian-copula IM field across sites
    MdpConsistent,   ///< components evolve independently by their do-nothing matrices
};

struct SimulationOptions {
    std::size_t n_runs = 10000;
    std::uint64_t seed = 1;
    HazardSampling hazard = HazardSampling::CorrelatedField;
    std::vector<int> snapshot_years{25, 50};
    std::vector<double> loss_grid; ///< AEP abscissae (cost units); empty means no AEP curves
    std::size_t trajectory_runs = 0; ///< keep per-year rows for the first runs
};

struct AepCurve {
    int year = 0;
    std::vector<double> loss_grid;
    std::vector<double> exceedance; ///< P(loss in year > x)
};

struct TrajectoryRow {
    std::size_t run = 0;
    int year = 0;
    std::size_t component = 0;
    ComponentState state;
    MaintenanceAction action = MaintenanceAction::DoNothing;
    double action_cost = 0.0;  ///< component share after the campaign discount, undiscounted
    double failure_cost = 0.0; ///< system scenario cost of the state that year, undiscounted
};

struct CostSummary {
    std::string policy;
    double mr_cost = 0.0;
    double risk_cost = 0.0;
    double total = 0.0;
    double mr_se = 0.0;
    double risk_se = 0.0;
    double total_se = 0.0;
};

/// Yearly curves are indexed by year 0..T, where year y refers to the state
/// after y transitions.
struct LifecycleMetrics {
    std::string policy;
    std::size_t n_runs = 0;
    std::vector<std::vector<double>> cumulative_failure; ///< [component][year] P(failed at some year <= y)
    std::vector<std::vector<double>> annual_failure;     ///< [component][year] P(failed in year y)
    std::vector<double> system_any_annual;
    std::vector<double> system_any_cumulative;
    std::vector<double> system_all_annual;
    std::vector<AepCurve> aep;
    CostSummary costs;
    std::vector<TrajectoryRow> trajectories;
};

/// Binomial standard error of an empirical proportion.
double proportion_se(double p, std::size_t n);

/// Runs n_runs life cycles from the pristine joint state. Each run draws from
/// its own stream seeded by (seed, run index), so results do not depend on
/// the thread count.
LifecycleMetrics simulate_lifecycle(const CaseStudyModel& model, const PolicySpec& policy,
                                    const SimulationOptions& options);

/// Exceedance curve of the loss accrued in `year` (1 <= year <= T).
std::vector<double> aep_loss_curve(const CaseStudyModel& model, const PolicySpec& policy, int year,
                                   const std::vector<double>& loss_grid, const SimulationOptions& options);

/// One-year loss exceedance from the pristine state under DoNothing,
/// enumerated over all failure scenarios with independent components.
std::vector<double> static_baseline_curve(const CaseStudyModel& model, const std::vector<double>& loss_grid);

std::vector<CostSummary> cost_comparison(const CaseStudyModel& model, const std::vector<PolicySpec>& policies,
                                         const SimulationOptions& options);

void write_failure_csv(const std::filesystem::path& path, const std::vector<LifecycleMetrics>& metrics,
                       const std::vector<std::string>& component_names);
void write_system_risk_csv(const std::filesystem::path& path, const std::vector<LifecycleMetrics>& metrics);
/// `static_curve` (may be empty) is written with policy "StaticBaseline" and year 1.
void write_aep_csv(const std::filesystem::path& path, const std::vector<LifecycleMetrics>& metrics,
                   const std::vector<double>& loss_grid, const std::vector<double>& static_curve);
void write_costs_csv(const std::filesystem::path& path, const std::vector<CostSummary>& costs);
void write_trajectory_csv(const std::filesystem::path& path, const std::vector<LifecycleMetrics>& metrics,
                          const std::vector<std::string>& component_names);

} // namespace lcmdp
