#include "commands.hpp"

#include "lcmdp/config.hpp"
#include "lcmdp/errors.hpp"
#include "lcmdp/policy_io.hpp"
#include "lcmdp/simulator.hpp"
#include "lcmdp/solver.hpp"
#include "lcmdp/synthetic_data.hpp"

#include "json.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace lcmdp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Session {
    RunConfig config;
    fs::path out;
    std::uint64_t seed = 1;
};

Session open_session(const GlobalOptions& g) {
    Session s{RunConfig::load(g.config), {}, 1};
    s.out = g.out ? *g.out : s.config.output_dir;
    s.seed = g.seed ? *g.seed : s.config.seed;
    const int threads = g.threads ? *g.threads : s.config.threads;
    if (threads < 0) {
        throw ValidationError("--threads must be >= 0");
    }
    if (threads > 0) {
        omp_set_num_threads(threads);
    }
    return s;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
    }
}

GammaProcessParams deterioration_for(const Session& s, std::ostream& log) {
    const fs::path file = s.out / "deterioration.json";
    if (fs::exists(file)) {
        return load_deterioration_params(file);
    }
    const auto& t = s.config.deterioration;
    log << "note: " << file.string() << " not found; calibrating from the config targets\n";
    return calibrate_from_moments(t.mean, t.sd, t.b, t.T);
}

fs::path fragility_path(const Session& s, const std::string& name) { return s.out / ("fragility_" + name + ".json"); }

std::vector<FragilityModel> load_fragility(const Session& s) {
    std::vector<FragilityModel> models;
    for (const auto& c : s.config.components) {
        const auto path = fragility_path(s, c.name);
        if (!fs::exists(path)) {
            throw ValidationError("fragility model not found at " + path.string() + " (run fit-fragility first)");
        }
        models.push_back(FragilityModel::load(path));
    }
    return models;
}

CaseStudyModel build_model(const Session& s, std::ostream& log) {
    const auto det = deterioration_for(s, log);
    return build_case_study(make_case_study_inputs(s.config, det, load_fragility(s)));
}

std::uint64_t component_seed(std::uint64_t seed, std::size_t k) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k), 0x3c1du};
    std::array<std::uint32_t, 2> v{};
    seq.generate(v.begin(), v.end());
    return (static_cast<std::uint64_t>(v[0]) << 32) | v[1];
}

std::size_t pristine_index(const CaseStudyModel& m) {
    std::vector<std::size_t> local(m.mdp.components.size(), m.space.encode({1, 1, 1}));
    return m.mdp.encode_state(local);
}

double peak_rss_bytes() {
    std::ifstream in("/proc/self/status");
    std::string key;
    while (in >> key) {
        if (key == "VmHWM:") {
            double kb = 0.0;
            in >> kb;
            return kb * 1024.0;
        }
        std::string rest;
        std::getline(in, rest);
    }
    return 0.0;
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << j.dump(2) << '\n';
}

json complexity_json(const ComplexityCounts& c) {
    return {{"naive_flops", c.naive_flops},   {"naive_bytes", c.naive_bytes},
            {"sparse_flops", c.sparse_flops}, {"sparse_bytes", c.sparse_bytes},
            {"tensor_flops", c.tensor_flops}, {"tensor_bytes", c.tensor_bytes}};
}

SimulationOptions simulation_options(const Session& s, const CaseStudyModel& m) {
    SimulationOptions o;
    o.n_runs = s.config.simulation.runs;
    o.seed = s.seed;
    o.hazard = s.config.simulation.hazard;
    o.snapshot_years = s.config.simulation.snapshot_years;
    o.loss_grid = s.config.simulation.loss_grid;
    o.trajectory_runs = s.config.simulation.trajectory_runs;
    if (o.loss_grid.empty()) {
        double top = 0.0;
        for (double c : m.mdp.scenario_cost) {
            top = std::max(top, c);
        }
        for (double c : m.mdp.joint_action_cost) {
            top = std::max(top, c);
        }
        for (int i = 0; i <= 60; ++i) {
            o.loss_grid.push_back(1.1 * top * i / 60.0);
        }
    }
    return o;
}

// Keeps a file-backed policy alive for the lookups of a PolicySpec.
struct LoadedPolicy {
    std::shared_ptr<PolicyFileReader> reader;
    std::shared_ptr<Policy> in_memory;
    PolicySpec spec;
};

LoadedPolicy load_optimal(const Session& s, const CaseStudyModel& m) {
    const fs::path path = s.out / "policy.bin";
    if (!fs::exists(path)) {
        throw ValidationError("policy file not found at " + path.string() + " (run solve first)");
    }
    LoadedPolicy p;
    p.reader = std::make_shared<PolicyFileReader>(path);
    if (p.reader->horizon() != m.mdp.horizon || p.reader->state_count() != m.mdp.joint_state_count()) {
        throw ValidationError("policy file does not match the configured model (horizon or state count)");
    }
    const double bytes = 2.0 * m.mdp.horizon * static_cast<double>(p.reader->state_count());
    if (bytes <= 2.0e9) {
        p.in_memory = std::make_shared<Policy>(p.reader->load_all());
        auto pol = p.in_memory;
        p.spec = PolicySpec::optimal([pol](int t, std::size_t st) { return pol->action(t, st); }, m.mdp.horizon);
    } else {
        auto reader = p.reader;
        p.spec = PolicySpec::optimal([reader](int t, std::size_t st) { return reader->action(t, st); },
                                     m.mdp.horizon);
    }
    return p;
}

void write_simulation_outputs(const Session& s, const CaseStudyModel& m, const fs::path& dir,
                              const std::vector<LifecycleMetrics>& metrics, const SimulationOptions& o,
                              std::ostream& log) {
    ensure_dir(dir);
    const auto names = s.config.component_names();
    write_failure_csv(dir / "failure_prob.csv", metrics, names);
    write_system_risk_csv(dir / "system_risk.csv", metrics);
    write_aep_csv(dir / "aep.csv", metrics, o.loss_grid, static_baseline_curve(m, o.loss_grid));
    std::vector<CostSummary> costs;
    for (const auto& mm : metrics) {
        costs.push_back(mm.costs);
    }
    write_costs_csv(dir / "costs.csv", costs);
    if (o.trajectory_runs > 0) {
        write_trajectory_csv(dir / "trajectories.csv", metrics, names);
    }
    log << std::fixed << std::setprecision(2);
    log << "policy            M/R      risk     total   (+/- se)\n";
    for (const auto& c : costs) {
        log << std::left << std::setw(12) << c.policy << std::right << std::setw(10) << c.mr_cost << std::setw(10)
            << c.risk_cost << std::setw(10) << c.total << "   " << c.total_se << '\n';
    }
    log << "outputs written to " << dir.string() << '\n';
}

} // namespace

int cmd_calibrate(const GlobalOptions& g, std::ostream& log) {
    const Session s = open_session(g);
    const auto& t = s.config.deterioration;
    const auto p = calibrate_from_moments(t.mean, t.sd, t.b, t.T);
    ensure_dir(s.out);
    save_deterioration_params(s.out / "deterioration.json", p, t);
    const double alpha = shape(p, t.T);
    log << std::setprecision(8) << "a = " << p.a << "\nb = " << p.b << "\nbeta = " << p.beta << '\n'
        << "check at T = " << t.T << ": mean " << alpha / p.beta << " (target " << t.mean << "), sd "
        << std::sqrt(alpha) / p.beta << " (target " << t.sd << ")\n";
    return 0;
}

int cmd_fit_fragility(const GlobalOptions& g, std::ostream& log) {
    const Session s = open_session(g);
    const auto det = deterioration_for(s, log);
    const auto curves = s.config.load_hazard_curves();
    const CdsScheme cds(s.config.cds_thresholds);
    const SdsScheme sds(s.config.sds_thresholds);
    ensure_dir(s.out);
    bool all_converged = true;
    for (std::size_t k = 0; k < s.config.components.size(); ++k) {
        const auto& comp = s.config.components[k];
        SyntheticFragilityStudy study{curves[k], det, cds, sds, s.config.fragility.response,
                                      s.config.fragility.trajectories, s.config.fragility.years};
        const auto records = generate_fragility_records(study, component_seed(s.seed, k));
        const auto fit = fit_mle(records, sds.n_sds(), cds.n_cds(), s.config.fragility.fit);
        fit.model.save(fragility_path(s, comp.name), fit.diagnostics_json());
        log << comp.name << ": " << records.size() << " records\n";
        for (const auto& c : fit.contexts) {
            if (c.prior_sds == sds.n_sds()) {
                continue;
            }
            log << "  prior SDS " << c.prior_sds << ", CDS " << c.cds << ": " << std::setw(7) << c.records
                << " records, " << to_string(c.status);
            if (c.records < 50) {
                log << " (under-observed)";
            }
            log << '\n';
            if (c.status == ContextStatus::NotConverged) {
                all_converged = false;
            }
        }
    }
    if (!all_converged && s.config.fragility.fatal_nonconvergence) {
        log << "error: some fragility contexts did not converge\n";
        return 4;
    }
    return 0;
}

int cmd_build(const GlobalOptions& g, std::ostream& log) {
    const Session s = open_session(g);
    const auto m = build_model(s, log);
    ensure_dir(s.out);
    json j;
    j["component_states"] = m.space.size();
    j["joint_states"] = m.mdp.joint_state_count();
    j["joint_actions"] = m.mdp.joint_action_count();
    j["horizon"] = m.mdp.horizon;
    j["discount"] = m.mdp.discount;
    j["scenario_cost"] = m.mdp.scenario_cost;
    j["joint_action_cost"] = m.mdp.joint_action_cost;
    j["event_probability"] = m.event_probability;
    json kernels = json::array();
    for (std::size_t k = 0; k < m.kernels.size(); ++k) {
        json by_cds = json::array();
        for (const auto& mat : m.kernels[k].by_cds) {
            by_cds.push_back(std::vector<double>(mat.data().begin(), mat.data().end()));
        }
        kernels.push_back({{"component", m.mdp.components[k].name}, {"seismic_kernel_by_cds", by_cds}});
    }
    j["kernels"] = kernels;
    j["deterioration_fallback_rows"] = m.deterioration.fallback_rows.size();
    j["complexity"] = complexity_json(complexity_report(m.mdp));
    SolveOptions so;
    so.store_policy = false;
    so.memory_budget_bytes = s.config.solver.memory_budget_bytes;
    j["planned_solver_bytes"] = planned_memory_bytes(m.mdp, so);
    j["memory_budget_bytes"] = s.config.solver.memory_budget_bytes;
    write_json(s.out / "model.json", j);
    log << "states per component: " << m.space.size() << "\njoint states: " << m.mdp.joint_state_count()
        << "\njoint actions: " << m.mdp.joint_action_count() << "\nplanned solver memory: " << std::setprecision(3)
        << planned_memory_bytes(m.mdp, so) / 1e9 << " GB (budget " << s.config.solver.memory_budget_bytes / 1e9
        << " GB)\n";
    return 0;
}

int cmd_solve(const GlobalOptions& g, std::ostream& log) {
    const Session s = open_session(g);
    const auto m = build_model(s, log);
    SolveOptions so;
    so.store_policy = false;
    so.memory_budget_bytes = s.config.solver.memory_budget_bytes;
    const double planned = planned_memory_bytes(m.mdp, so);
    if (planned > so.memory_budget_bytes) {
        // Refuse before any output file is touched.
        std::ostringstream msg;
        msg << "memory plan of " << planned / 1e9 << " GB exceeds the budget of " << so.memory_budget_bytes / 1e9
            << " GB (" << m.mdp.joint_state_count() << " joint states, " << m.mdp.joint_action_count()
            << " joint actions, horizon " << m.mdp.horizon << ")";
        throw ResourceError(msg.str());
    }
    ensure_dir(s.out);
    PolicyFileWriter writer(s.out / "policy.bin", policy_header_json(m), m.mdp.horizon, m.mdp.joint_state_count());
    so.on_epoch = [&](int t, std::span<const double>, std::span<const std::uint16_t> pi) {
        writer.write_epoch(t, pi);
    };
    const auto result = tensor_value_iteration(m.mdp, so);
    writer.close();

    const std::size_t pristine = pristine_index(m);
    if (s.config.solver.export_values) {
        write_values_csv(s.out / "values_t0.csv", result.initial_values);
    }
    if (s.config.solver.export_policy_csv) {
        write_policy_csv(s.out / "policy.csv", read_policy(s.out / "policy.bin"));
    }
    json report;
    report["joint_states"] = m.mdp.joint_state_count();
    report["joint_actions"] = m.mdp.joint_action_count();
    report["horizon"] = m.mdp.horizon;
    report["planned_bytes"] = planned;
    report["complexity"] = complexity_json(result.report.complexity);
    report["value_pristine"] = result.initial_values[pristine];
    write_json(s.out / "solve_report.json", report);

    log << std::setprecision(10) << "V0(pristine) = " << result.initial_values[pristine] << '\n'
        << std::setprecision(3) << "planned memory " << planned / 1e9 << " GB, measured peak RSS "
        << peak_rss_bytes() / 1e9 << " GB\nsolve time " << result.report.total_seconds << " s over "
        << m.mdp.horizon << " epochs\n";

    if (g.oracle) {
        const std::size_t n = m.mdp.joint_state_count();
        if (n > s.config.solver.oracle_state_cap) {
            log << "oracle skipped: " << n << " joint states exceed the cap of " << s.config.solver.oracle_state_cap
                << '\n';
        } else {
            const auto naive = naive_value_iteration(m.mdp, s.config.solver.oracle_state_cap);
            double worst = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                worst = std::max(worst, std::abs(naive.initial_values[i] - result.initial_values[i]));
            }
            const auto tensor_policy = read_policy(s.out / "policy.bin");
            std::size_t mismatches = 0;
            for (int t = 0; t < m.mdp.horizon; ++t) {
                for (std::size_t i = 0; i < n; ++i) {
                    mismatches += naive.policy.action(t, i) != tensor_policy.action(t, i) ? 1 : 0;
                }
            }
            log << std::scientific << std::setprecision(3) << "oracle: max |V_tensor - V_naive| = " << worst
                << ", policy mismatches = " << mismatches << '\n';
        }
    }
    return 0;
}

int cmd_simulate(const GlobalOptions& g, std::ostream& log) {
    const Session s = open_session(g);
    const auto m = build_model(s, log);
    const auto optimal = load_optimal(s, m);
    const auto o = simulation_options(s, m);
    std::vector<LifecycleMetrics> metrics{simulate_lifecycle(m, optimal.spec, o)};
    write_simulation_outputs(s, m, s.out / "simulate", metrics, o, log);
    return 0;
}

int cmd_compare(const GlobalOptions& g, std::ostream& log) {
    const Session s = open_session(g);
    const auto m = build_model(s, log);
    const auto optimal = load_optimal(s, m);
    const auto o = simulation_options(s, m);
    std::vector<PolicySpec> policies{optimal.spec};
    for (const auto& r : s.config.cbm_rules) {
        policies.push_back(PolicySpec::cbm(r));
    }
    policies.push_back(PolicySpec::no_action());
    std::vector<LifecycleMetrics> metrics;
    for (const auto& p : policies) {
        metrics.push_back(simulate_lifecycle(m, p, o));
    }
    write_simulation_outputs(s, m, s.out / "compare", metrics, o, log);
    return 0;
}

} // namespace lcmdp::cli
