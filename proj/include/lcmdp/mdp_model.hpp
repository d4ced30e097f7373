#pragma once

#include "lcmdp/damage.hpp"
#include "lcmdp/deterioration.hpp"
#include "lcmdp/factored_mdp.hpp"
#include "lcmdp/fragility.hpp"
#include "lcmdp/hazard.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace lcmdp {

/// Component state (SDS, CDS, exposure time), all 1-based.
struct ComponentState {
    int sds = 1;
    int cds = 1;
    int tau = 1;
    friend bool operator==(const ComponentState&, const ComponentState&) = default;
};

/// Index codec for component states: SDS-major, then CDS, then tau.
/// index = ((sds - 1) * n_cds + (cds - 1)) * n_tau + (tau - 1)
class ComponentStateSpace {
public:
    ComponentStateSpace(int n_sds, int n_cds, int n_tau);

    int n_sds() const { return n_sds_; }
    int n_cds() const { return n_cds_; }
    int n_tau() const { return n_tau_; }
    std::size_t size() const { return static_cast<std::size_t>(n_sds_) * n_cds_ * n_tau_; }

    std::size_t encode(const ComponentState& s) const;
    ComponentState decode(std::size_t index) const;

private:
    int n_sds_;
    int n_cds_;
    int n_tau_;
};

enum class MaintenanceAction : int { DoNothing = 0, MinorRepair = 1, MajorRepair = 2 };
inline constexpr int maintenance_action_count = 3;

std::string to_string(MaintenanceAction a);

/// Natural evolution over one epoch: SDS follows the seismic kernel of the new
/// CDS, CDS follows the deterioration matrix for the current exposure window,
/// and tau advances by one (absorbing at n_tau). A component at exposure tau
/// uses deterioration.matrices[tau - 1], i.e. the window (tau - 1, tau].
Matrix do_nothing_matrix(const ComponentStateSpace& space, const CdsTransitionSet& deterioration,
                         const AnnualSeismicKernel& kernel);

/// Minor: every index drops one level and tau drops by `tau_reduction`, clamped at 1.
/// Major: back to (1, 1, 1).
ComponentState apply_repair(MaintenanceAction action, const ComponentState& s, int tau_reduction = 10);
Matrix repair_matrix(const ComponentStateSpace& space, MaintenanceAction action, int tau_reduction = 10);

/// Row of the failure-scenario table: direct cost times multiplier gives the total.
struct FailureScenario {
    std::vector<std::string> failed;
    double direct_cost = 0.0;
    double multiplier = 1.0;
    double total_cost = 0.0;
};

/// Costs in thousands of currency units.
struct CostModel {
    std::vector<std::string> component_names;
    std::vector<double> replacement_value;
    double minor_repair_fraction = 0.2;
    double major_repair_fraction = 1.0;
    std::map<int, double> campaign_discounts; ///< concurrent interventions -> fractional discount
    std::vector<FailureScenario> scenarios;

    /// Checks fractions, discounts, and that every non-empty subset of
    /// components has a scenario whose total matches direct * multiplier
    /// within half a table rounding unit (`total_rounding`).
    void validate(double total_rounding = 10.0) const;

    /// Scenario total indexed by failure mask (bit k = component k).
    std::vector<double> scenario_table() const;

    double discount_for(int concurrent) const;
};

double action_cost(std::span<const MaintenanceAction> joint_action, const CostModel& costs);
/// Table total for the set of components currently in the top SDS; 0 if none.
double failure_cost(std::span<const ComponentState> state, const CostModel& costs, int n_sds);

/// Everything needed to assemble the case-study MDP.
struct ComponentSpec {
    std::string name;
    HazardCurve hazard;
    FragilityModel fragility;
    SitePosition site;
};

struct CaseStudyInputs {
    int n_tau = 50;
    int horizon = 50;
    double discount = 0.97;
    int tau_reduction = 10;
    std::size_t im_bins = 100;
    double correlation_range_km = 20.0;
    CdsScheme cds_scheme{{0.1, 0.4}};
    SdsScheme sds_scheme{{0.2, 0.5}};
    GammaProcessParams deterioration;
    std::vector<ComponentSpec> components;
    CostModel costs;
};

struct CaseStudyModel {
    CaseStudyInputs inputs;
    ComponentStateSpace space{1, 1, 1};
    SiteLayout layout;
    CdsTransitionSet deterioration;
    std::vector<ImPmf> im_pmfs;
    std::vector<double> event_probability;
    std::vector<AnnualSeismicKernel> kernels;
    FactoredMdp mdp;

    std::size_t joint_state_count() const { return mdp.joint_state_count(); }
};

/// Builds all component matrices and the structured cost; throws
/// ValidationError on inconsistent scheme sizes or cost tables.
CaseStudyModel build_case_study(CaseStudyInputs inputs);

} // namespace lcmdp
