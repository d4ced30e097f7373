#include "lcmdp/simulator.hpp"

#include "lcmdp/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>

namespace lcmdp {

CbmRule::CbmRule(std::string name, const std::vector<CbmPredicate>& predicates, int n_cds, int n_sds,
                 CbmOverlap overlap)
    : name_{std::move(name)}, n_cds_{n_cds}, n_sds_{n_sds} {
    if (n_cds < 1 || n_sds < 1) {
        throw ValidationError("CBM rule '" + name_ + "': grid dimensions must be >= 1");
    }
    grid_.assign(static_cast<std::size_t>(n_cds * n_sds), MaintenanceAction::DoNothing);
    for (int l = 1; l <= n_cds; ++l) {
        for (int j = 1; j <= n_sds; ++j) {
            int matched = 0;
            MaintenanceAction chosen = MaintenanceAction::DoNothing;
            for (const auto& p : predicates) {
                const bool hit = std::any_of(p.any_of.begin(), p.any_of.end(),
                                             [&](const CbmCondition& c) { return c.matches(l, j); });
                if (!hit) {
                    continue;
                }
                if (matched == 0 || static_cast<int>(p.action) > static_cast<int>(chosen)) {
                    chosen = p.action;
                }
                ++matched;
            }
            const std::string cell = "(CDS " + std::to_string(l) + ", SDS " + std::to_string(j) + ")";
            if (matched == 0) {
                throw ValidationError("CBM rule '" + name_ + "': no action matches " + cell);
            }
            if (matched > 1 && overlap == CbmOverlap::Reject) {
                throw ValidationError("CBM rule '" + name_ + "': several actions match " + cell);
            }
            grid_[static_cast<std::size_t>((l - 1) * n_sds + (j - 1))] = chosen;
        }
    }
}

MaintenanceAction CbmRule::action(int cds, int sds) const {
    if (cds < 1 || cds > n_cds_ || sds < 1 || sds > n_sds_) {
        throw std::out_of_range("CBM rule: state out of range");
    }
    return grid_[static_cast<std::size_t>((cds - 1) * n_sds_ + (sds - 1))];
}

MaintenanceAction cbm_action(const CbmRule& rule, int cds, int sds) { return rule.action(cds, sds); }

std::vector<CbmRule> baseline_cbm_rules() {
    using A = MaintenanceAction;
    std::vector<CbmRule> rules;
    rules.emplace_back("CBM1",
                       std::vector<CbmPredicate>{{A::DoNothing, {{1, 2, 1, 1}}},
                                                 {A::MinorRepair, {{1, 3, 2, 2}}},
                                                 {A::MajorRepair, {{3, 3, 1, 3}, {1, 3, 3, 3}}}},
                       3, 3, CbmOverlap::MostSevere);
    rules.emplace_back("CBM2",
                       std::vector<CbmPredicate>{{A::DoNothing, {{1, 1, 1, 1}}},
                                                 {A::MinorRepair, {{2, 2, 1, 3}}},
                                                 {A::MajorRepair, {{3, 3, 1, 3}, {1, 3, 2, 3}}}},
                       3, 3, CbmOverlap::MostSevere);
    rules.emplace_back("CBM3",
                       std::vector<CbmPredicate>{{A::DoNothing, {{1, 2, 1, 2}}},
                                                 {A::MinorRepair, {{3, 3, 1, 3}}},
                                                 {A::MajorRepair, {{1, 3, 3, 3}}}},
                       3, 3, CbmOverlap::MostSevere);
    return rules;
}

PolicySpec PolicySpec::no_action() { return PolicySpec{}; }

PolicySpec PolicySpec::cbm(CbmRule rule) {
    PolicySpec p;
    p.kind = Kind::Cbm;
    p.name = rule.name();
    p.rule = std::move(rule);
    return p;
}

PolicySpec PolicySpec::optimal(const Policy& policy, std::string name) {
    return optimal([&policy](int t, std::size_t s) { return policy.action(t, s); }, policy.horizon(),
                   std::move(name));
}

PolicySpec PolicySpec::optimal(PolicyLookup lookup, int horizon, std::string name) {
    PolicySpec p;
    p.kind = Kind::Optimal;
    p.name = std::move(name);
    p.lookup = std::move(lookup);
    p.horizon = horizon;
    return p;
}

double proportion_se(double p, std::size_t n) {
    return n == 0 ? 0.0 : std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
}

namespace {

constexpr std::uint64_t simulation_salt = 0x5d1f3a7cULL;

struct RunRecord {
    double mr = 0.0;
    double risk = 0.0;
    std::vector<std::uint32_t> masks; ///< failure mask per year 0..T
    std::vector<double> snapshot_loss;
    std::vector<TrajectoryRow> rows;
};

int sample_index(std::span<const double> p, double u) {
    double cum = 0.0;
    int last = -1;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) {
            continue;
        }
        cum += p[i];
        last = static_cast<int>(i);
        if (u < cum) {
            return last;
        }
    }
    return last;
}

// Cumulative rows of a component's do-nothing matrix.
struct RowSampler {
    std::vector<std::size_t> start;
    std::vector<std::size_t> col;
    std::vector<double> cum;

    explicit RowSampler(const Matrix& m) {
        for (std::size_t r = 0; r < m.rows(); ++r) {
            start.push_back(col.size());
            double acc = 0.0;
            for (std::size_t c = 0; c < m.cols(); ++c) {
                if (m(r, c) > 0.0) {
                    acc += m(r, c);
                    col.push_back(c);
                    cum.push_back(acc);
                }
            }
        }
        start.push_back(col.size());
    }

    std::size_t sample(std::size_t row, double u) const {
        for (std::size_t k = start[row]; k < start[row + 1]; ++k) {
            if (u < cum[k]) {
                return col[k];
            }
        }
        return col[start[row + 1] - 1];
    }
};

class Engine {
public:
    Engine(const CaseStudyModel& model, const PolicySpec& policy, const SimulationOptions& options)
        : model_{model}, policy_{policy}, options_{options}, n_{model.mdp.components.size()} {
        const auto& mdp = model.mdp;
        if (n_ == 0 || model.inputs.components.size() != n_) {
            throw ValidationError("simulation: model has no components");
        }
        if (policy.kind == PolicySpec::Kind::Optimal) {
            if (!policy.lookup || policy.horizon != mdp.horizon) {
                throw ValidationError("simulation: optimal policy horizon differs from the model horizon");
            }
        }
        if (policy.kind == PolicySpec::Kind::Cbm &&
            (policy.rule.n_cds() != model.space.n_cds() || policy.rule.n_sds() != model.space.n_sds())) {
            throw ValidationError("simulation: CBM rule grid does not match the state schemes");
        }
        for (int y : options.snapshot_years) {
            if (y < 1 || y > mdp.horizon) {
                throw ValidationError("simulation: snapshot year " + std::to_string(y) + " outside 1.." +
                                      std::to_string(mdp.horizon));
            }
        }
        if (options.hazard == HazardSampling::MdpConsistent) {
            for (const auto& c : mdp.components) {
                samplers_.emplace_back(c.transitions[0]);
            }
        } else {
            std::vector<HazardCurve> curves;
            for (const auto& c : model.inputs.components) {
                curves.push_back(c.hazard);
            }
            field_.emplace(model.layout, curves);
            for (double p : model.event_probability) {
                p_event_ = std::max(p_event_, p);
            }
        }
        const auto& costs = model.inputs.costs;
        for (std::size_t k = 0; k < n_; ++k) {
            unit_cost_.push_back({0.0, costs.minor_repair_fraction * costs.replacement_value[k],
                                  costs.major_repair_fraction * costs.replacement_value[k]});
        }
    }

    RunRecord run(std::size_t index) const {
        const auto& mdp = model_.mdp;
        const int horizon = mdp.horizon;
        std::seed_seq seq{static_cast<std::uint32_t>(options_.seed), static_cast<std::uint32_t>(options_.seed >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                          static_cast<std::uint32_t>(simulation_salt)};
        Rng rng(seq);
        std::uniform_real_distribution<double> unif(0.0, 1.0);

        RunRecord rec;
        rec.masks.resize(static_cast<std::size_t>(horizon) + 1, 0);
        rec.snapshot_loss.assign(options_.snapshot_years.size(), 0.0);
        const bool keep_rows = index < options_.trajectory_runs;

        std::vector<ComponentState> state(n_, ComponentState{1, 1, 1});
        std::vector<std::size_t> local_state(n_);
        std::vector<std::size_t> local_action(n_);
        double discount = 1.0;
        for (int t = 0; t <= horizon; ++t) {
            const std::uint32_t mask = failure_mask(state);
            rec.masks[static_cast<std::size_t>(t)] = mask;
            const double fc = mdp.scenario_cost.empty() ? 0.0 : mdp.scenario_cost[mask];
            add_snapshot(rec, t, fc);
            if (t == horizon) {
                if (keep_rows) {
                    append_rows(rec, index, t, state, local_action, 0, fc, true);
                }
                break;
            }
            choose_actions(t, state, local_state, local_action);
            const std::size_t joint_action = mdp.encode_action(local_action);
            const double ac = mdp.joint_action_cost[joint_action];
            rec.mr += discount * ac;
            rec.risk += discount * fc;
            add_snapshot(rec, t + 1, ac);
            if (keep_rows) {
                const auto concurrent = static_cast<int>(
                    std::count_if(local_action.begin(), local_action.end(), [](std::size_t a) { return a != 0; }));
                append_rows(rec, index, t, state, local_action, concurrent, fc, false);
            }
            step(state, local_action, rng, unif);
            discount *= mdp.discount;
        }
        return rec;
    }

private:
    std::uint32_t failure_mask(const std::vector<ComponentState>& state) const {
        std::uint32_t mask = 0;
        for (std::size_t k = 0; k < n_; ++k) {
            if (state[k].sds == model_.space.n_sds()) {
                mask |= std::uint32_t{1} << k;
            }
        }
        return mask;
    }

    void add_snapshot(RunRecord& rec, int year, double amount) const {
        for (std::size_t i = 0; i < options_.snapshot_years.size(); ++i) {
            if (options_.snapshot_years[i] == year) {
                rec.snapshot_loss[i] += amount;
            }
        }
    }

    void choose_actions(int t, const std::vector<ComponentState>& state, std::vector<std::size_t>& local_state,
                        std::vector<std::size_t>& local_action) const {
        switch (policy_.kind) {
        case PolicySpec::Kind::NoAction:
            std::fill(local_action.begin(), local_action.end(), 0);
            return;
        case PolicySpec::Kind::Cbm:
            for (std::size_t k = 0; k < n_; ++k) {
                local_action[k] = static_cast<std::size_t>(policy_.rule.action(state[k].cds, state[k].sds));
            }
            return;
        case PolicySpec::Kind::Optimal: {
            for (std::size_t k = 0; k < n_; ++k) {
                local_state[k] = model_.space.encode(state[k]);
            }
            const std::size_t joint = model_.mdp.encode_state(local_state);
            local_action = model_.mdp.decode_action(policy_.lookup(t, joint));
            return;
        }
        }
    }

    void append_rows(RunRecord& rec, std::size_t run, int year, const std::vector<ComponentState>& state,
                     const std::vector<std::size_t>& local_action, int concurrent, double fc, bool final) const {
        const double factor = 1.0 - model_.inputs.costs.discount_for(concurrent);
        for (std::size_t k = 0; k < n_; ++k) {
            TrajectoryRow row;
            row.run = run;
            row.year = year;
            row.component = k;
            row.state = state[k];
            row.action = final ? MaintenanceAction::DoNothing : static_cast<MaintenanceAction>(local_action[k]);
            row.action_cost = final ? 0.0 : unit_cost_[k][local_action[k]] * factor;
            row.failure_cost = fc;
            rec.rows.push_back(row);
        }
    }

    void step(std::vector<ComponentState>& state, const std::vector<std::size_t>& local_action, Rng& rng,
              std::uniform_real_distribution<double>& unif) const {
        const auto& space = model_.space;
        if (options_.hazard == HazardSampling::MdpConsistent) {
            for (std::size_t k = 0; k < n_; ++k) {
                const double u = unif(rng);
                const auto action = static_cast<MaintenanceAction>(local_action[k]);
                if (action != MaintenanceAction::DoNothing) {
                    state[k] = apply_repair(action, state[k], model_.inputs.tau_reduction);
                } else {
                    state[k] = space.decode(samplers_[k].sample(space.encode(state[k]), u));
                }
            }
            return;
        }
        // One regional event per year; sites whose own rate is lower are thinned.
        const bool event = unif(rng) < p_event_;
        std::vector<double> im;
        std::vector<bool> shaken(n_, false);
        if (event) {
            im = field_->sample(rng);
            for (std::size_t k = 0; k < n_; ++k) {
                shaken[k] = unif(rng) * p_event_ < model_.event_probability[k];
            }
        }
        for (std::size_t k = 0; k < n_; ++k) {
            const double u_cds = unif(rng);
            const double u_sds = unif(rng);
            const auto action = static_cast<MaintenanceAction>(local_action[k]);
            if (action != MaintenanceAction::DoNothing) {
                state[k] = apply_repair(action, state[k], model_.inputs.tau_reduction);
                continue;
            }
            ComponentState next = state[k];
            const Matrix& det = model_.deterioration.matrices[static_cast<std::size_t>(state[k].tau - 1)];
            next.cds = sample_index(det.row(static_cast<std::size_t>(state[k].cds - 1)), u_cds) + 1;
            if (event && shaken[k]) {
                const auto p = transition_prob(model_.inputs.components[k].fragility, state[k].sds, next.cds, im[k]);
                next.sds = sample_index(p, u_sds) + 1;
            }
            next.tau = std::min(state[k].tau + 1, space.n_tau());
            state[k] = next;
        }
    }

    const CaseStudyModel& model_;
    const PolicySpec& policy_;
    const SimulationOptions& options_;
    std::size_t n_;
    std::vector<RowSampler> samplers_;
    std::optional<CorrelatedFieldSampler> field_;
    double p_event_ = 0.0;
    std::vector<std::array<double, 3>> unit_cost_;
};

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v, double mean) {
    if (v.size() < 2) {
        return 0.0;
    }
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << std::setprecision(12);
    return out;
}

} // namespace

LifecycleMetrics simulate_lifecycle(const CaseStudyModel& model, const PolicySpec& policy,
                                    const SimulationOptions& options) {
    const Engine engine(model, policy, options);
    const std::size_t n_runs = options.n_runs;
    std::vector<RunRecord> records(n_runs);
#pragma omp parallel for schedule(dynamic, 16)
    for (long long r = 0; r < static_cast<long long>(n_runs); ++r) {
        records[static_cast<std::size_t>(r)] = engine.run(static_cast<std::size_t>(r));
    }

    const std::size_t n = model.mdp.components.size();
    const auto years = static_cast<std::size_t>(model.mdp.horizon) + 1;
    const std::uint32_t all = (std::uint32_t{1} << n) - 1;
    LifecycleMetrics m;
    m.policy = policy.name;
    m.n_runs = n_runs;
    m.cumulative_failure.assign(n, std::vector<double>(years, 0.0));
    m.annual_failure.assign(n, std::vector<double>(years, 0.0));
    m.system_any_annual.assign(years, 0.0);
    m.system_any_cumulative.assign(years, 0.0);
    m.system_all_annual.assign(years, 0.0);
    std::vector<double> mr(n_runs), risk(n_runs), total(n_runs);
    for (std::size_t r = 0; r < n_runs; ++r) {
        const auto& rec = records[r];
        mr[r] = rec.mr;
        risk[r] = rec.risk;
        total[r] = rec.mr + rec.risk;
        std::uint32_t ever = 0;
        for (std::size_t y = 0; y < years; ++y) {
            const std::uint32_t mask = rec.masks[y];
            ever |= mask;
            for (std::size_t k = 0; k < n; ++k) {
                m.annual_failure[k][y] += (mask >> k) & 1u;
                m.cumulative_failure[k][y] += (ever >> k) & 1u;
            }
            m.system_any_annual[y] += mask != 0 ? 1.0 : 0.0;
            m.system_any_cumulative[y] += ever != 0 ? 1.0 : 0.0;
            m.system_all_annual[y] += mask == all ? 1.0 : 0.0;
        }
        m.trajectories.insert(m.trajectories.end(), rec.rows.begin(), rec.rows.end());
    }
    const double inv = n_runs == 0 ? 0.0 : 1.0 / static_cast<double>(n_runs);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t y = 0; y < years; ++y) {
            m.annual_failure[k][y] *= inv;
            m.cumulative_failure[k][y] *= inv;
        }
    }
    for (std::size_t y = 0; y < years; ++y) {
        m.system_any_annual[y] *= inv;
        m.system_any_cumulative[y] *= inv;
        m.system_all_annual[y] *= inv;
    }
    for (std::size_t i = 0; i < options.snapshot_years.size() && !options.loss_grid.empty(); ++i) {
        AepCurve curve{options.snapshot_years[i], options.loss_grid, {}};
        for (double x : options.loss_grid) {
            std::size_t count = 0;
            for (const auto& rec : records) {
                count += rec.snapshot_loss[i] > x ? 1 : 0;
            }
            curve.exceedance.push_back(static_cast<double>(count) * inv);
        }
        m.aep.push_back(std::move(curve));
    }
    m.costs.policy = policy.name;
    m.costs.mr_cost = mean_of(mr);
    m.costs.risk_cost = mean_of(risk);
    m.costs.total = mean_of(total);
    m.costs.mr_se = se_of(mr, m.costs.mr_cost);
    m.costs.risk_se = se_of(risk, m.costs.risk_cost);
    m.costs.total_se = se_of(total, m.costs.total);
    return m;
}

std::vector<double> aep_loss_curve(const CaseStudyModel& model, const PolicySpec& policy, int year,
                                   const std::vector<double>& loss_grid, const SimulationOptions& options) {
    SimulationOptions o = options;
    o.snapshot_years = {year};
    o.loss_grid = loss_grid;
    o.trajectory_runs = 0;
    return simulate_lifecycle(model, policy, o).aep.front().exceedance;
}

std::vector<double> static_baseline_curve(const CaseStudyModel& model, const std::vector<double>& loss_grid) {
    const auto& mdp = model.mdp;
    const std::size_t n = mdp.components.size();
    const std::size_t pristine = model.space.encode({1, 1, 1});
    std::vector<double> p_fail(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const auto row = mdp.components[k].transitions[0].row(pristine);
        for (std::size_t s = 0; s < row.size(); ++s) {
            if (model.space.decode(s).sds == model.space.n_sds()) {
                p_fail[k] += row[s];
            }
        }
    }
    std::vector<double> curve(loss_grid.size(), 0.0);
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double prob = 1.0;
        for (std::size_t k = 0; k < n; ++k) {
            prob *= ((mask >> k) & 1u) != 0 ? p_fail[k] : 1.0 - p_fail[k];
        }
        const double loss = mdp.scenario_cost.empty() ? 0.0 : mdp.scenario_cost[mask];
        for (std::size_t i = 0; i < loss_grid.size(); ++i) {
            if (loss > loss_grid[i]) {
                curve[i] += prob;
            }
        }
    }
    return curve;
}

std::vector<CostSummary> cost_comparison(const CaseStudyModel& model, const std::vector<PolicySpec>& policies,
                                         const SimulationOptions& options) {
    if (policies.empty()) {
        throw ValidationError("cost comparison needs at least one policy");
    }
    SimulationOptions o = options;
    o.loss_grid.clear();
    o.trajectory_runs = 0;
    std::vector<CostSummary> out;
    for (const auto& p : policies) {
        out.push_back(simulate_lifecycle(model, p, o).costs);
    }
    return out;
}

void write_failure_csv(const std::filesystem::path& path, const std::vector<LifecycleMetrics>& metrics,
                       const std::vector<std::string>& component_names) {
    auto out = open_csv(path);
    out << "year,component,policy,probability\n";
    for (const auto& m : metrics) {
        for (std::size_t k = 0; k < m.cumulative_failure.size(); ++k) {
            for (std::size_t y = 0; y < m.cumulative_failure[k].size(); ++y) {
                out << y << ',' << component_names.at(k) << ',' << m.policy << ',' << m.cumulative_failure[k][y]
                    << '\n';
            }
        }
    }
}

void write_system_risk_csv(const std::filesystem::path& path, const std::vector<LifecycleMetrics>& metrics) {
    auto out = open_csv(path);
    out << "year,policy,measure,probability\n";
    for (const auto& m : metrics) {
        for (std::size_t y = 0; y < m.system_any_annual.size(); ++y) {
            out << y << ',' << m.policy << ",any_annual," << m.system_any_annual[y] << '\n';
            out << y << ',' << m.policy << ",any_cumulative," << m.system_any_cumulative[y] << '\n';
            out << y << ',' << m.policy << ",all_annual," << m.system_all_annual[y] << '\n';
        }
    }
}

void write_aep_csv(const std::filesystem::path& path, const std::vector<LifecycleMetrics>& metrics,
                   const std::vector<double>& loss_grid, const std::vector<double>& static_curve) {
    auto out = open_csv(path);
    out << "year,loss,policy,probability\n";
    for (std::size_t i = 0; i < static_curve.size(); ++i) {
        out << 1 << ',' << loss_grid.at(i) << ",StaticBaseline," << static_curve[i] << '\n';
    }
    for (const auto& m : metrics) {
        for (const auto& c : m.aep) {
            for (std::size_t i = 0; i < c.loss_grid.size(); ++i) {
                out << c.year << ',' << c.loss_grid[i] << ',' << m.policy << ',' << c.exceedance[i] << '\n';
            }
        }
    }
}

void write_costs_csv(const std::filesystem::path& path, const std::vector<CostSummary>& costs) {
    auto out = open_csv(path);
    out << "policy,mr_cost,risk_cost,total,total_se\n";
    for (const auto& c : costs) {
        out << c.policy << ',' << c.mr_cost << ',' << c.risk_cost << ',' << c.total << ',' << c.total_se << '\n';
    }
}

void write_trajectory_csv(const std::filesystem::path& path, const std::vector<LifecycleMetrics>& metrics,
                          const std::vector<std::string>& component_names) {
    auto out = open_csv(path);
    out << "policy,run,year,component,sds,cds,tau,action,action_cost,failure_cost\n";
    for (const auto& m : metrics) {
        for (const auto& r : m.trajectories) {
            out << m.policy << ',' << r.run << ',' << r.year << ',' << component_names.at(r.component) << ','
                << r.state.sds << ',' << r.state.cds << ',' << r.state.tau << ',' << to_string(r.action) << ','
                << r.action_cost << ',' << r.failure_cost << '\n';
        }
    }
}

} // namespace lcmdp
