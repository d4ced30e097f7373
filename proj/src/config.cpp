#include "lcmdp/config.hpp"

#include "lcmdp/errors.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace lcmdp {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
    if (!obj.is_object()) {
        throw ValidationError(where + ": expected an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.contains(key)) {
            throw ValidationError(where + ": unknown key '" + key + "'");
        }
    }
}

template <typename T>
void read(const json& obj, const std::string& key, const std::string& where, T& out) {
    if (!obj.contains(key)) {
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(where + "." + key + ": wrong type");
    }
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) {
        throw ValidationError(where + ": missing key '" + key + "'");
    }
    T out{};
    read(obj, key, where, out);
    return out;
}

MaintenanceAction parse_action(const std::string& s) {
    if (s == "DoNothing") {
        return MaintenanceAction::DoNothing;
    }
    if (s == "MinorRepair") {
        return MaintenanceAction::MinorRepair;
    }
    if (s == "MajorRepair") {
        return MaintenanceAction::MajorRepair;
    }
    throw ValidationError("unknown maintenance action '" + s + "'");
}

CbmRule parse_cbm(const json& j, int n_cds, int n_sds) {
    check_keys(j, "cbm_policies[]", {"name", "overlap", "rules"});
    const auto name = require<std::string>(j, "name", "cbm_policies[]");
    const std::string where = "cbm_policies." + name;
    std::string overlap = "reject";
    read(j, "overlap", where, overlap);
    if (overlap != "reject" && overlap != "most_severe") {
        throw ValidationError(where + ".overlap must be 'reject' or 'most_severe'");
    }
    const auto& rules = j.at("rules");
    check_keys(rules, where + ".rules", {"DoNothing", "MinorRepair", "MajorRepair"});
    std::vector<CbmPredicate> predicates;
    for (const auto& [action, boxes] : rules.items()) {
        CbmPredicate p{parse_action(action), {}};
        if (!boxes.is_array()) {
            throw ValidationError(where + ".rules." + action + ": expected a list of conditions");
        }
        for (const auto& box : boxes) {
            check_keys(box, where + ".rules." + action + "[]", {"cds", "sds"});
            CbmCondition c{1, n_cds, 1, n_sds};
            std::vector<int> range;
            read(box, "cds", where, range);
            if (!range.empty()) {
                if (range.size() != 2) {
                    throw ValidationError(where + ": cds range must be [min, max]");
                }
                c.cds_min = range[0];
                c.cds_max = range[1];
            }
            range.clear();
            read(box, "sds", where, range);
            if (!range.empty()) {
                if (range.size() != 2) {
                    throw ValidationError(where + ": sds range must be [min, max]");
                }
                c.sds_min = range[0];
                c.sds_max = range[1];
            }
            p.any_of.push_back(c);
        }
        predicates.push_back(std::move(p));
    }
    return CbmRule(name, predicates, n_cds, n_sds,
                   overlap == "most_severe" ? CbmOverlap::MostSevere : CbmOverlap::Reject);
}

} // namespace

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config file " + path.string());
    }
    std::stringstream buf;
    buf << in.rdbuf();
    RunConfig c = parse(buf.str(), path.parent_path());
    c.source = path;
    return c;
}

RunConfig RunConfig::parse(const std::string& text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    check_keys(j, "config",
               {"output_dir", "seed", "threads", "hazard", "components", "deterioration", "schemes", "fragility",
                "mdp", "costs", "solver", "simulation", "cbm_policies"});
    RunConfig c;
    std::string out_dir = c.output_dir.string();
    read(j, "output_dir", "config", out_dir);
    c.output_dir = out_dir;
    read(j, "seed", "config", c.seed);
    read(j, "threads", "config", c.threads);

    if (j.contains("hazard")) {
        const auto& h = j["hazard"];
        check_keys(h, "hazard", {"correlation_range_km", "im_bins"});
        read(h, "correlation_range_km", "hazard", c.correlation_range_km);
        read(h, "im_bins", "hazard", c.im_bins);
    }

    if (!j.contains("components") || !j["components"].is_array()) {
        throw ValidationError("config: 'components' must be a list");
    }
    for (const auto& cj : j["components"]) {
        check_keys(cj, "components[]", {"name", "hazard_csv", "site_km", "replacement_value"});
        ComponentConfig comp;
        comp.name = require<std::string>(cj, "name", "components[]");
        const std::string where = "components." + comp.name;
        comp.hazard_csv = base_dir / require<std::string>(cj, "hazard_csv", where);
        const auto site = require<std::vector<double>>(cj, "site_km", where);
        if (site.size() != 2) {
            throw ValidationError(where + ".site_km must be [x, y]");
        }
        comp.site = {site[0], site[1]};
        comp.replacement_value = require<double>(cj, "replacement_value", where);
        c.components.push_back(std::move(comp));
    }

    if (j.contains("deterioration")) {
        const auto& d = j["deterioration"];
        check_keys(d, "deterioration", {"mean", "sd", "b", "T"});
        read(d, "mean", "deterioration", c.deterioration.mean);
        read(d, "sd", "deterioration", c.deterioration.sd);
        read(d, "b", "deterioration", c.deterioration.b);
        read(d, "T", "deterioration", c.deterioration.T);
    }
    if (j.contains("schemes")) {
        const auto& s = j["schemes"];
        check_keys(s, "schemes", {"cds_thresholds", "sds_thresholds"});
        read(s, "cds_thresholds", "schemes", c.cds_thresholds);
        read(s, "sds_thresholds", "schemes", c.sds_thresholds);
    }
    if (j.contains("fragility")) {
        const auto& f = j["fragility"];
        check_keys(f, "fragility", {"trajectories", "years", "fatal_nonconvergence", "response", "fit"});
        read(f, "trajectories", "fragility", c.fragility.trajectories);
        read(f, "years", "fragility", c.fragility.years);
        read(f, "fatal_nonconvergence", "fragility", c.fragility.fatal_nonconvergence);
        if (f.contains("response")) {
            const auto& r = f["response"];
            auto& m = c.fragility.response;
            check_keys(r, "fragility.response",
                       {"median_at_ref", "im_ref", "slope", "dispersion", "cds_factor", "prior_sds_factor"});
            read(r, "median_at_ref", "fragility.response", m.median_at_ref);
            read(r, "im_ref", "fragility.response", m.im_ref);
            read(r, "slope", "fragility.response", m.slope);
            read(r, "dispersion", "fragility.response", m.dispersion);
            read(r, "cds_factor", "fragility.response", m.cds_factor);
            read(r, "prior_sds_factor", "fragility.response", m.prior_sds_factor);
        }
        if (f.contains("fit")) {
            const auto& r = f["fit"];
            check_keys(r, "fragility.fit", {"ridge", "gradient_tol", "max_iterations"});
            read(r, "ridge", "fragility.fit", c.fragility.fit.ridge);
            read(r, "gradient_tol", "fragility.fit", c.fragility.fit.gradient_tol);
            read(r, "max_iterations", "fragility.fit", c.fragility.fit.max_iterations);
        }
    }
    if (j.contains("mdp")) {
        const auto& m = j["mdp"];
        check_keys(m, "mdp", {"n_tau", "horizon", "discount", "tau_reduction"});
        read(m, "n_tau", "mdp", c.n_tau);
        read(m, "horizon", "mdp", c.horizon);
        read(m, "discount", "mdp", c.discount);
        read(m, "tau_reduction", "mdp", c.tau_reduction);
    }

    for (const auto& comp : c.components) {
        c.costs.component_names.push_back(comp.name);
        c.costs.replacement_value.push_back(comp.replacement_value);
    }
    double total_rounding = 10.0;
    if (j.contains("costs")) {
        const auto& k = j["costs"];
        check_keys(k, "costs", {"minor_fraction", "major_fraction", "campaign_discounts", "scenarios", "total_rounding"});
        read(k, "minor_fraction", "costs", c.costs.minor_repair_fraction);
        read(k, "major_fraction", "costs", c.costs.major_repair_fraction);
        read(k, "total_rounding", "costs", total_rounding);
        if (k.contains("campaign_discounts")) {
            for (const auto& [count, value] : k["campaign_discounts"].items()) {
                int n = 0;
                try {
                    n = std::stoi(count);
                } catch (const std::exception&) {
                    throw ValidationError("costs.campaign_discounts: keys must be integers");
                }
                if (!value.is_number()) {
                    throw ValidationError("costs.campaign_discounts: values must be numbers");
                }
                c.costs.campaign_discounts[n] = value.get<double>();
            }
        }
        if (k.contains("scenarios")) {
            for (const auto& s : k["scenarios"]) {
                check_keys(s, "costs.scenarios[]", {"failed", "direct", "multiplier", "total"});
                FailureScenario fs;
                fs.failed = require<std::vector<std::string>>(s, "failed", "costs.scenarios[]");
                fs.multiplier = require<double>(s, "multiplier", "costs.scenarios[]");
                double derived_direct = 0.0;
                for (const auto& name : fs.failed) {
                    for (const auto& comp : c.components) {
                        if (comp.name == name) {
                            derived_direct += comp.replacement_value;
                        }
                    }
                }
                fs.direct_cost = derived_direct;
                read(s, "direct", "costs.scenarios[]", fs.direct_cost);
                if (std::abs(fs.direct_cost - derived_direct) > 0.5) {
                    throw ValidationError("costs.scenarios: direct cost differs from the sum of replacement values");
                }
                fs.total_cost = fs.direct_cost * fs.multiplier;
                read(s, "total", "costs.scenarios[]", fs.total_cost);
                c.costs.scenarios.push_back(std::move(fs));
            }
        }
    }
    c.costs.validate(total_rounding);

    if (j.contains("solver")) {
        const auto& s = j["solver"];
        check_keys(s, "solver", {"memory_budget_gb", "oracle_state_cap", "export_policy_csv", "export_values"});
        double gb = c.solver.memory_budget_bytes / 1e9;
        read(s, "memory_budget_gb", "solver", gb);
        c.solver.memory_budget_bytes = gb * 1e9;
        read(s, "oracle_state_cap", "solver", c.solver.oracle_state_cap);
        read(s, "export_policy_csv", "solver", c.solver.export_policy_csv);
        read(s, "export_values", "solver", c.solver.export_values);
    }
    if (j.contains("simulation")) {
        const auto& s = j["simulation"];
        check_keys(s, "simulation", {"runs", "snapshot_years", "loss_grid", "hazard_sampling", "trajectory_runs"});
        read(s, "runs", "simulation", c.simulation.runs);
        read(s, "snapshot_years", "simulation", c.simulation.snapshot_years);
        read(s, "loss_grid", "simulation", c.simulation.loss_grid);
        read(s, "trajectory_runs", "simulation", c.simulation.trajectory_runs);
        std::string mode = "correlated";
        read(s, "hazard_sampling", "simulation", mode);
        if (mode == "correlated") {
            c.simulation.hazard = HazardSampling::CorrelatedField;
        } else if (mode == "independent") {
            c.simulation.hazard = HazardSampling::MdpConsistent;
        } else {
            throw ValidationError("simulation.hazard_sampling must be 'correlated' or 'independent'");
        }
    }

    const int n_cds = static_cast<int>(c.cds_thresholds.size()) + 1;
    const int n_sds = static_cast<int>(c.sds_thresholds.size()) + 1;
    if (j.contains("cbm_policies")) {
        for (const auto& p : j["cbm_policies"]) {
            c.cbm_rules.push_back(parse_cbm(p, n_cds, n_sds));
        }
    } else if (n_cds == 3 && n_sds == 3) {
        c.cbm_rules = baseline_cbm_rules();
    }
    c.validate();
    return c;
}

void RunConfig::validate() const {
    if (components.empty()) {
        throw ValidationError("config: at least one component is required");
    }
    std::set<std::string> names;
    for (const auto& comp : components) {
        if (comp.name.empty() || !names.insert(comp.name).second) {
            throw ValidationError("config: component names must be unique and non-empty");
        }
        if (!std::filesystem::exists(comp.hazard_csv)) {
            throw ValidationError("config: hazard file not found: " + comp.hazard_csv.string());
        }
    }
    if (!(correlation_range_km > 0.0) || im_bins == 0) {
        throw ValidationError("hazard: correlation_range_km must be positive and im_bins >= 1");
    }
    if (!(deterioration.mean > 0.0) || !(deterioration.sd > 0.0) || !(deterioration.b > 0.0) ||
        !(deterioration.T > 0.0)) {
        throw ValidationError("deterioration: mean, sd, b and T must be positive");
    }
    CdsScheme cds(cds_thresholds);
    SdsScheme sds(sds_thresholds);
    fragility.response.validate(cds.n_cds(), sds.n_sds());
    if (fragility.trajectories == 0 || fragility.years < 1) {
        throw ValidationError("fragility: trajectories and years must be >= 1");
    }
    if (n_tau < 1 || horizon < 0 || !(discount > 0.0 && discount <= 1.0) || tau_reduction < 0) {
        throw ValidationError("mdp: need n_tau >= 1, horizon >= 0, discount in (0, 1], tau_reduction >= 0");
    }
    if (!(solver.memory_budget_bytes > 0.0)) {
        throw ValidationError("solver.memory_budget_gb must be positive");
    }
    for (int y : simulation.snapshot_years) {
        if (y < 1 || y > horizon) {
            throw ValidationError("simulation.snapshot_years must lie in 1..horizon");
        }
    }
    for (std::size_t i = 1; i < simulation.loss_grid.size(); ++i) {
        if (!(simulation.loss_grid[i] > simulation.loss_grid[i - 1])) {
            throw ValidationError("simulation.loss_grid must be strictly increasing");
        }
    }
    for (const auto& r : cbm_rules) {
        if (r.n_cds() != cds.n_cds() || r.n_sds() != sds.n_sds()) {
            throw ValidationError("cbm rule '" + r.name() + "' does not match the scheme sizes");
        }
    }
}

std::vector<std::string> RunConfig::component_names() const {
    std::vector<std::string> names;
    for (const auto& c : components) {
        names.push_back(c.name);
    }
    return names;
}

std::vector<HazardCurve> RunConfig::load_hazard_curves() const {
    std::vector<HazardCurve> curves;
    for (const auto& c : components) {
        curves.push_back(HazardCurve::from_csv(c.hazard_csv));
    }
    return curves;
}

CaseStudyInputs make_case_study_inputs(const RunConfig& config, const GammaProcessParams& deterioration,
                                       const std::vector<FragilityModel>& fragility) {
    if (fragility.size() != config.components.size()) {
        throw ValidationError("one fragility model per component is required");
    }
    CaseStudyInputs in;
    in.n_tau = config.n_tau;
    in.horizon = config.horizon;
    in.discount = config.discount;
    in.tau_reduction = config.tau_reduction;
    in.im_bins = config.im_bins;
    in.correlation_range_km = config.correlation_range_km;
    in.cds_scheme = CdsScheme(config.cds_thresholds);
    in.sds_scheme = SdsScheme(config.sds_thresholds);
    in.deterioration = deterioration;
    in.costs = config.costs;
    const auto curves = config.load_hazard_curves();
    for (std::size_t k = 0; k < config.components.size(); ++k) {
        in.components.push_back({config.components[k].name, curves[k], fragility[k], config.components[k].site});
    }
    return in;
}

void save_deterioration_params(const std::filesystem::path& path, const GammaProcessParams& p,
                               const DeteriorationTargets& targets) {
    json j;
    j["format"] = "lcmdp-deterioration-v1";
    j["a"] = p.a;
    j["b"] = p.b;
    j["beta"] = p.beta;
    j["targets"] = {{"mean", targets.mean}, {"sd", targets.sd}, {"T", targets.T}};
    const double alpha = shape(p, targets.T);
    j["check"] = {{"mean", alpha / p.beta}, {"sd", std::sqrt(alpha) / p.beta}};
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

GammaProcessParams load_deterioration_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("deterioration parameters not found at " + path.string() + " (run calibrate first)");
    }
    try {
        const json j = json::parse(in);
        if (j.value("format", "") != "lcmdp-deterioration-v1") {
            throw ValidationError(path.string() + ": unrecognized format");
        }
        GammaProcessParams p{j.at("a").get<double>(), j.at("b").get<double>(), j.at("beta").get<double>()};
        p.validate();
        return p;
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

} // namespace lcmdp
