#include "lcmdp/mdp_model.hpp"

#include "lcmdp/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace lcmdp {

ComponentStateSpace::ComponentStateSpace(int n_sds, int n_cds, int n_tau)
    : n_sds_{n_sds}, n_cds_{n_cds}, n_tau_{n_tau} {
    if (n_sds < 1 || n_cds < 1 || n_tau < 1) {
        throw ValidationError("component state space dimensions must be >= 1");
    }
}

std::size_t ComponentStateSpace::encode(const ComponentState& s) const {
    if (s.sds < 1 || s.sds > n_sds_ || s.cds < 1 || s.cds > n_cds_ || s.tau < 1 || s.tau > n_tau_) {
        throw std::out_of_range("component state out of range");
    }
    return (static_cast<std::size_t>(s.sds - 1) * n_cds_ + static_cast<std::size_t>(s.cds - 1)) * n_tau_ +
           static_cast<std::size_t>(s.tau - 1);
}

ComponentState ComponentStateSpace::decode(std::size_t index) const {
    if (index >= size()) {
        throw std::out_of_range("component state index out of range");
    }
    const auto tau = static_cast<int>(index % static_cast<std::size_t>(n_tau_));
    index /= static_cast<std::size_t>(n_tau_);
    const auto cds = static_cast<int>(index % static_cast<std::size_t>(n_cds_));
    const auto sds = static_cast<int>(index / static_cast<std::size_t>(n_cds_));
    return {sds + 1, cds + 1, tau + 1};
}

std::string to_string(MaintenanceAction a) {
    switch (a) {
    case MaintenanceAction::DoNothing:
        return "DoNothing";
    case MaintenanceAction::MinorRepair:
        return "MinorRepair";
    case MaintenanceAction::MajorRepair:
        return "MajorRepair";
    }
    return "Unknown";
}

Matrix do_nothing_matrix(const ComponentStateSpace& space, const CdsTransitionSet& deterioration,
                         const AnnualSeismicKernel& kernel) {
    if (deterioration.n_cds() != space.n_cds() || deterioration.tau_count() < space.n_tau()) {
        throw ValidationError("deterioration matrices do not cover the component state space");
    }
    if (static_cast<int>(kernel.by_cds.size()) != space.n_cds() ||
        static_cast<int>(kernel.by_cds.front().rows()) != space.n_sds()) {
        throw ValidationError("seismic kernel does not match the component state space");
    }
    Matrix m(space.size(), space.size());
    for (std::size_t from = 0; from < space.size(); ++from) {
        const ComponentState s = space.decode(from);
        const int next_tau = std::min(s.tau + 1, space.n_tau());
        const Matrix& det = deterioration.matrices[static_cast<std::size_t>(s.tau - 1)];
        for (int l = 1; l <= space.n_cds(); ++l) {
            const double p_cds = det(static_cast<std::size_t>(s.cds - 1), static_cast<std::size_t>(l - 1));
            if (p_cds == 0.0) {
                continue;
            }
            const Matrix& seismic = kernel.for_cds(l);
            for (int j = 1; j <= space.n_sds(); ++j) {
                const double p_sds = seismic(static_cast<std::size_t>(s.sds - 1), static_cast<std::size_t>(j - 1));
                if (p_sds == 0.0) {
                    continue;
                }
                m(from, space.encode({j, l, next_tau})) += p_sds * p_cds;
            }
        }
    }
    return m;
}

ComponentState apply_repair(MaintenanceAction action, const ComponentState& s, int tau_reduction) {
    switch (action) {
    case MaintenanceAction::DoNothing:
        return s;
    case MaintenanceAction::MinorRepair:
        return {std::max(s.sds - 1, 1), std::max(s.cds - 1, 1), std::max(s.tau - tau_reduction, 1)};
    case MaintenanceAction::MajorRepair:
        return {1, 1, 1};
    }
    throw std::invalid_argument("unknown maintenance action");
}

Matrix repair_matrix(const ComponentStateSpace& space, MaintenanceAction action, int tau_reduction) {
    if (action == MaintenanceAction::DoNothing) {
        throw std::invalid_argument("repair_matrix: DoNothing is stochastic; use do_nothing_matrix");
    }
    Matrix m(space.size(), space.size());
    for (std::size_t from = 0; from < space.size(); ++from) {
        m(from, space.encode(apply_repair(action, space.decode(from), tau_reduction))) = 1.0;
    }
    return m;
}

void CostModel::validate(double total_rounding) const {
    const std::size_t n = component_names.size();
    if (n == 0 || replacement_value.size() != n) {
        throw ValidationError("cost model: one replacement value per component is required");
    }
    if (n > 16) {
        throw ValidationError("cost model: at most 16 components are supported");
    }
    for (double v : replacement_value) {
        if (!(v >= 0.0)) {
            throw ValidationError("cost model: replacement values must be non-negative");
        }
    }
    if (!(minor_repair_fraction > 0.0 && minor_repair_fraction <= 1.0) ||
        !(major_repair_fraction > 0.0 && major_repair_fraction <= 1.0)) {
        throw ValidationError("cost model: repair fractions must lie in (0, 1]");
    }
    for (const auto& [count, d] : campaign_discounts) {
        if (count < 1 || !(d >= 0.0 && d < 1.0)) {
            throw ValidationError("cost model: campaign discounts must lie in [0, 1)");
        }
    }
    std::set<std::size_t> masks;
    for (const auto& s : scenarios) {
        std::size_t mask = 0;
        for (const auto& name : s.failed) {
            const auto it = std::find(component_names.begin(), component_names.end(), name);
            if (it == component_names.end()) {
                throw ValidationError("cost model: scenario names unknown component '" + name + "'");
            }
            mask |= std::size_t{1} << static_cast<std::size_t>(it - component_names.begin());
        }
        if (mask == 0 || !masks.insert(mask).second) {
            throw ValidationError("cost model: scenarios must be distinct non-empty component sets");
        }
        if (!(s.total_cost >= 0.0) ||
            std::abs(s.direct_cost * s.multiplier - s.total_cost) > 0.5 * total_rounding + 1e-9) {
            throw ValidationError("cost model: scenario total differs from direct cost x multiplier");
        }
    }
    if (masks.size() != (std::size_t{1} << n) - 1) {
        throw ValidationError("cost model: every non-empty subset of components needs a failure scenario");
    }
}

std::vector<double> CostModel::scenario_table() const {
    std::vector<double> table(std::size_t{1} << component_names.size(), 0.0);
    for (const auto& s : scenarios) {
        std::size_t mask = 0;
        for (const auto& name : s.failed) {
            const auto it = std::find(component_names.begin(), component_names.end(), name);
            mask |= std::size_t{1} << static_cast<std::size_t>(it - component_names.begin());
        }
        table[mask] = s.total_cost;
    }
    return table;
}

double CostModel::discount_for(int concurrent) const {
    double d = 0.0;
    for (const auto& [count, value] : campaign_discounts) {
        if (count <= concurrent) {
            d = value;
        }
    }
    return d;
}

double action_cost(std::span<const MaintenanceAction> joint_action, const CostModel& costs) {
    if (joint_action.size() != costs.replacement_value.size()) {
        throw std::out_of_range("action_cost: one action per component is required");
    }
    double total = 0.0;
    int concurrent = 0;
    for (std::size_t k = 0; k < joint_action.size(); ++k) {
        switch (joint_action[k]) {
        case MaintenanceAction::DoNothing:
            break;
        case MaintenanceAction::MinorRepair:
            total += costs.minor_repair_fraction * costs.replacement_value[k];
            ++concurrent;
            break;
        case MaintenanceAction::MajorRepair:
            total += costs.major_repair_fraction * costs.replacement_value[k];
            ++concurrent;
            break;
        }
    }
    return total * (1.0 - costs.discount_for(concurrent));
}

double failure_cost(std::span<const ComponentState> state, const CostModel& costs, int n_sds) {
    if (state.size() != costs.component_names.size()) {
        throw std::out_of_range("failure_cost: one state per component is required");
    }
    std::size_t mask = 0;
    for (std::size_t k = 0; k < state.size(); ++k) {
        if (state[k].sds == n_sds) {
            mask |= std::size_t{1} << k;
        }
    }
    if (mask == 0) {
        return 0.0;
    }
    const auto table = costs.scenario_table();
    return table[mask];
}

CaseStudyModel build_case_study(CaseStudyInputs inputs) {
    inputs.deterioration.validate();
    inputs.costs.validate();
    if (inputs.components.empty()) {
        throw ValidationError("case study needs at least one component");
    }
    if (inputs.components.size() != inputs.costs.component_names.size()) {
        throw ValidationError("cost model and component list differ in length");
    }
    for (std::size_t k = 0; k < inputs.components.size(); ++k) {
        const auto& c = inputs.components[k];
        if (c.name != inputs.costs.component_names[k]) {
            throw ValidationError("cost model component order differs from the component list");
        }
        if (c.fragility.n_sds() != inputs.sds_scheme.n_sds() || c.fragility.n_cds() != inputs.cds_scheme.n_cds()) {
            throw ValidationError("fragility model for '" + c.name + "' does not match the SDS/CDS schemes");
        }
    }
    if (inputs.horizon < 0 || !(inputs.discount > 0.0 && inputs.discount <= 1.0) || inputs.im_bins == 0 ||
        inputs.tau_reduction < 0) {
        throw ValidationError("case study: invalid horizon, discount, IM bin count or tau reduction");
    }

    CaseStudyModel model;
    model.space = ComponentStateSpace(inputs.sds_scheme.n_sds(), inputs.cds_scheme.n_cds(), inputs.n_tau);
    model.layout.correlation_range_km = inputs.correlation_range_km;
    for (const auto& c : inputs.components) {
        model.layout.sites.push_back(c.site);
    }
    model.layout.validate();
    model.deterioration = build_transition_set(inputs.deterioration, inputs.cds_scheme, inputs.n_tau);

    const Matrix minor = repair_matrix(model.space, MaintenanceAction::MinorRepair, inputs.tau_reduction);
    const Matrix major = repair_matrix(model.space, MaintenanceAction::MajorRepair, inputs.tau_reduction);

    FactoredMdp& mdp = model.mdp;
    for (const auto& c : inputs.components) {
        model.im_pmfs.push_back(discretize_annual_im(c.hazard, inputs.im_bins));
        model.event_probability.push_back(annual_event_probability(c.hazard));
        model.kernels.push_back(
            marginalize_over_hazard(c.fragility, model.im_pmfs.back(), model.event_probability.back()));

        FactoredComponent fc;
        fc.name = c.name;
        fc.transitions = {do_nothing_matrix(model.space, model.deterioration, model.kernels.back()), minor,
                          major};
        fc.failed.resize(model.space.size(), 0);
        for (std::size_t s = 0; s < model.space.size(); ++s) {
            fc.failed[s] = model.space.decode(s).sds == model.space.n_sds() ? 1 : 0;
        }
        mdp.components.push_back(std::move(fc));
    }
    mdp.discount = inputs.discount;
    mdp.horizon = inputs.horizon;
    mdp.scenario_cost = inputs.costs.scenario_table();
    mdp.joint_action_cost.resize(mdp.joint_action_count());
    for (std::size_t a = 0; a < mdp.joint_action_cost.size(); ++a) {
        std::vector<MaintenanceAction> actions;
        for (std::size_t local : mdp.decode_action(a)) {
            actions.push_back(static_cast<MaintenanceAction>(local));
        }
        mdp.joint_action_cost[a] = action_cost(actions, inputs.costs);
    }
    mdp.validate();
    model.inputs = std::move(inputs);
    return model;
}

} // namespace lcmdp
