// Acceptance gates. Prints one PASS/FAIL line per criterion and exits
// non-zero when any gate fails.

#include "lcmdp/config.hpp"
#include "lcmdp/errors.hpp"
#include "lcmdp/policy_io.hpp"
#include "lcmdp/simulator.hpp"
#include "lcmdp/solver.hpp"
#include "random_mdp.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <omp.h>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace lcmdp;
using lcmdp::testing::random_factored_mdp;
using lcmdp::testing::random_stochastic;

namespace {

const fs::path data_dir{LCMDP_DATA_DIR};
const std::string cli{LCMDP_CLI};

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d = std::max(d, std::abs(a[i] - b[i]));
    }
    return d;
}

int run_cli(const std::string& args, const fs::path& log) {
    const std::string cmd = "\"" + cli + "\" " + args + " >> \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string fmt(double x, int precision = 4) {
    std::ostringstream s;
    s << std::setprecision(precision) << x;
    return s.str();
}

// 1. Tensor solver against the naive oracle.
Outcome solver_exactness() {
    std::mt19937_64 rng(1001);
    double worst = 0.0;
    std::size_t policy_mismatch = 0;
    const int instances = 120;
    for (int i = 0; i < instances; ++i) {
        const std::size_t n = 2 + static_cast<std::size_t>(i % 2);
        const int horizon = 3 + i % 13;
        // Integer costs on every fifth instance exercise exact ties.
        const auto mdp = random_factored_mdp(rng, n, 6, 3, horizon, i % 5 == 0);
        const auto t = tensor_value_iteration(mdp, {.keep_all_values = true});
        const auto v = naive_value_iteration(mdp, 100000, true);
        for (std::size_t e = 0; e < t.values.size(); ++e) {
            worst = std::max(worst, max_abs_diff(t.values[e], v.values[e]));
        }
        for (int e = 0; e < mdp.horizon; ++e) {
            for (std::size_t s = 0; s < mdp.joint_state_count(); ++s) {
                policy_mismatch += t.policy.action(e, s) != v.policy.action(e, s);
            }
        }
    }
    return {worst <= 1e-10 && policy_mismatch == 0,
            std::to_string(instances) + " MDPs, max |dV| = " + fmt(worst) + ", policy mismatches = " +
                std::to_string(policy_mismatch)};
}

// 2. Mode-k chain against the materialized Kronecker product.
Outcome kronecker_identity() {
    std::mt19937_64 rng(1002);
    std::uniform_int_distribution<std::size_t> ncomp(1, 4), dim(2, 12);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    double worst = 0.0;
    std::size_t largest = 0;
    int done = 0;
    while (done < 50) {
        const auto n = ncomp(rng);
        std::vector<Matrix> ps;
        std::size_t size = 1;
        for (std::size_t k = 0; k < n; ++k) {
            ps.push_back(random_stochastic(dim(rng), rng, 0.3));
            size *= ps.back().rows();
        }
        if (size > 10000) {
            continue;
        }
        std::vector<double> v(size);
        for (double& x : v) {
            x = u(rng);
        }
        std::vector<const Matrix*> ptrs;
        for (const auto& p : ps) {
            ptrs.push_back(&p);
        }
        const auto fast = expected_future_values(ptrs, v);
        std::vector<double> ref;
        if (size <= 2500) {
            Matrix k = ps[0];
            for (std::size_t i = 1; i < n; ++i) {
                k = kronecker(k, ps[i]);
            }
            ref = multiply(k, v);
        } else {
            // Rows of the Kronecker matrix expanded one at a time.
            FactoredMdp m;
            for (const auto& p : ps) {
                m.components.push_back({"k", {p}, {}, {}});
            }
            m.joint_action_cost = {0.0};
            ref = naive_expected_values(m, 0, v);
        }
        worst = std::max(worst, max_abs_diff(fast, ref));
        largest = std::max(largest, size);
        ++done;
    }
    return {worst <= 1e-12, "50 instances up to " + std::to_string(largest) + " joint states, max error " + fmt(worst)};
}

FactoredMdp homogeneous(std::size_t n, std::mt19937_64& rng) {
    FactoredMdp mdp;
    for (std::size_t k = 0; k < n; ++k) {
        FactoredComponent c;
        c.name = "h" + std::to_string(k);
        for (int a = 0; a < 4; ++a) {
            c.transitions.push_back(random_stochastic(16, rng));
        }
        c.state_cost.assign(16, 1.0);
        mdp.components.push_back(std::move(c));
    }
    std::uniform_real_distribution<double> cost(0.0, 5.0);
    mdp.joint_action_cost.resize(static_cast<std::size_t>(std::pow(4.0, static_cast<double>(n))));
    for (double& c : mdp.joint_action_cost) {
        c = cost(rng);
    }
    mdp.discount = 0.95;
    mdp.horizon = 1;
    return mdp;
}

template <class F>
double min_time(int repeats, F&& f) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

// 3. Scaling of one backward step on homogeneous systems (16 states, 4 actions).
Outcome complexity_separation() {
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    std::mt19937_64 rng(1003);
    std::vector<double> ratio;
    std::ostringstream detail;
    double step_speedup_n3 = 0.0;
    volatile double sink = 0.0;
    for (std::size_t n = 2; n <= 4; ++n) {
        const auto mdp = homogeneous(n, rng);
        std::vector<double> v(mdp.joint_state_count());
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (double& x : v) {
            x = u(rng);
        }
        const std::size_t action = mdp.joint_action_count() / 2;
        const int repeats = n == 4 ? 2 : 5;
        const double t_tensor = min_time(repeats * 4, [&] { sink = sink + expected_future_values(mdp, action, v)[0]; });
        const double t_naive = min_time(repeats, [&] { sink = sink + naive_expected_values(mdp, action, v)[0]; });
        ratio.push_back(t_tensor / t_naive);
        detail << "N=" << n << " per-action tensor " << fmt(t_tensor) << "s naive " << fmt(t_naive)
               << "s ratio " << fmt(ratio.back()) << "; ";
        if (n == 3) {
            const double step_tensor = min_time(3, [&] { sink = sink + tensor_value_iteration(mdp).initial_values[0]; });
            const double step_naive = min_time(1, [&] { sink = sink + naive_value_iteration(mdp).initial_values[0]; });
            step_speedup_n3 = step_naive / step_tensor;
            detail << "N=3 full step tensor " << fmt(step_tensor) << "s naive " << fmt(step_naive) << "s speedup "
                   << fmt(step_speedup_n3) << "x; ";
        }
    }
    omp_set_num_threads(saved);
    const bool monotone = ratio[1] < ratio[0] && ratio[2] < ratio[1];
    detail << (monotone ? "ratio decreases monotonically" : "ratio NOT monotone");
    return {monotone && step_speedup_n3 >= 5.0, detail.str()};
}

// 4. Calibration against simulated paths, plus occupancy consistency.
Outcome calibration() {
    const auto p = calibrate_from_moments(0.4, 0.075, 1.5, 50.0);
    Rng rng(1004);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = sample_path(p, 50.0, 1.0, rng).back();
        sum += x;
        sum2 += x * x;
    }
    const double mean = sum / n;
    const double sd = std::sqrt((sum2 - n * mean * mean) / (n - 1));
    const CdsScheme scheme({0.1, 0.4});
    double worst = 0.0;
    for (int tau = 1; tau <= 49; ++tau) {
        const auto pushed = left_multiply(state_occupancy(p, scheme, tau), transition_matrix(p, scheme, tau, 1.0));
        const auto next = state_occupancy(p, scheme, tau + 1.0);
        worst = std::max(worst, max_abs_diff(pushed, next));
    }
    const bool ok = std::abs(mean - 0.4) <= 0.003 && std::abs(sd - 0.075) <= 0.003 &&
                    worst <= 2.0 * transition_quadrature_tolerance;
    return {ok, "a = " + fmt(p.a, 9) + ", beta = " + fmt(p.beta, 8) + ", path mean " + fmt(mean, 6) + ", sd " +
                    fmt(sd, 6) + ", occupancy defect " + fmt(worst)};
}

// 5. Transition matrices against conditional sampling.
Outcome transition_oracle() {
    std::mt19937_64 rng(1005);
    std::uniform_real_distribution<double> mean_d(0.3, 0.5), sd_d(0.05, 0.1), b_d(1.0, 2.0), tau_d(5.0, 45.0);
    const CdsScheme scheme({0.1, 0.4});
    const std::vector<double> cuts{0.0, 0.1, 0.4, std::numeric_limits<double>::infinity()};
    double worst = 0.0;
    int rows = 0;
    std::ostringstream detail;
    for (int set = 0; set < 5; ++set) {
        const auto p = calibrate_from_moments(mean_d(rng), sd_d(rng), b_d(rng), 50.0);
        const double tau = std::round(tau_d(rng));
        const double shape_now = p.a * std::pow(tau, p.b);
        const double shape_inc = p.a * std::pow(tau + 1.0, p.b) - shape_now;
        const auto result = transition_matrix_detailed(p, scheme, tau, 1.0);
        std::gamma_distribution<double> inc(shape_inc, 1.0 / p.beta);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 1; i <= 3; ++i) {
            if (std::find(result.fallback_rows.begin(), result.fallback_rows.end(), i) != result.fallback_rows.end()) {
                continue;
            }
            // X(tau) drawn from its marginal restricted to state i by inverting the upper tail.
            const double q_hi = boost::math::gamma_q(shape_now, p.beta * cuts[static_cast<std::size_t>(i - 1)]);
            const double q_lo = std::isinf(cuts[static_cast<std::size_t>(i)])
                                    ? 0.0
                                    : boost::math::gamma_q(shape_now, p.beta * cuts[static_cast<std::size_t>(i)]);
            if (q_hi - q_lo < 1e-12) {
                continue;
            }
            std::vector<double> freq(3, 0.0);
            const int n = 1000000;
            for (int k = 0; k < n; ++k) {
                double q = q_lo + u(rng) * (q_hi - q_lo);
                q = std::clamp(q, 1e-300, 1.0);
                const double x = (q >= 1.0 ? 0.0 : boost::math::gamma_q_inv(shape_now, q) / p.beta) + inc(rng);
                freq[static_cast<std::size_t>(scheme.classify(x) - 1)] += 1.0 / n;
            }
            for (std::size_t j = 0; j < 3; ++j) {
                worst = std::max(worst, std::abs(freq[j] - result.matrix(static_cast<std::size_t>(i - 1), j)));
            }
            ++rows;
        }
        detail << "(b " << fmt(p.b, 3) << ", tau " << tau << ") ";
    }
    detail << rows << " rows checked, max deviation " << fmt(worst);
    return {worst <= 0.005 && rows >= 10, detail.str()};
}

FragilityModel generating_model() {
    FragilityModel m(3, 3);
    for (int l = 1; l <= 3; ++l) {
        m.coefficients(1, l, 2) = {-0.8 + 0.3 * l, 1.3};
        m.coefficients(1, l, 3) = {-2.2 + 0.4 * l, 1.9};
        m.coefficients(2, l, 3) = {-1.0 + 0.3 * l, 1.6};
    }
    return m;
}

std::vector<TransitionRecord> draw_records(const FragilityModel& m, int per_context, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<TransitionRecord> out;
    out.reserve(static_cast<std::size_t>(per_context) * 6);
    for (int i = 1; i <= 2; ++i) {
        for (int l = 1; l <= 3; ++l) {
            for (int k = 0; k < per_context; ++k) {
                const double im = std::exp(std::log(0.05) + u(rng) * (std::log(2.0) - std::log(0.05)));
                const auto p = transition_prob(m, i, l, im);
                const double r = u(rng);
                int j = 3;
                double cum = 0.0;
                for (int c = 1; c <= 3; ++c) {
                    cum += p[static_cast<std::size_t>(c - 1)];
                    if (r < cum) {
                        j = c;
                        break;
                    }
                }
                out.push_back({k, 0, i, j, l, im});
            }
        }
    }
    return out;
}

// 6. Fragility recovery and gradient.
Outcome fragility_recovery() {
    const auto truth = generating_model();
    const auto records = draw_records(truth, 100000, 1006);
    const auto fit = fit_mle(records, 3, 3);
    double worst = 0.0;
    for (int i = 1; i <= 2; ++i) {
        for (int l = 1; l <= 3; ++l) {
            for (int g = 0; g < 20; ++g) {
                const double im = std::exp(std::log(0.05) + g * (std::log(2.0) - std::log(0.05)) / 19.0);
                worst = std::max(worst, max_abs_diff(transition_prob(truth, i, l, im), transition_prob(fit.model, i, l, im)));
            }
        }
    }
    const auto small = draw_records(truth, 300, 1007);
    FragilityModel probe = truth;
    auto theta = probe.flat_parameters();
    for (std::size_t k = 0; k < theta.size(); ++k) {
        theta[k] += 0.05 * static_cast<double>(k % 3);
    }
    probe.set_flat_parameters(theta);
    const auto grad = log_likelihood_gradient(probe, small);
    double grad_err = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
        auto up = theta, down = theta;
        up[k] += 1e-5;
        down[k] -= 1e-5;
        FragilityModel mu = probe, md = probe;
        mu.set_flat_parameters(up);
        md.set_flat_parameters(down);
        const double fd = (log_likelihood(mu, small) - log_likelihood(md, small)) / 2e-5;
        grad_err = std::max(grad_err, std::abs(fd - grad[k]) / std::max(1.0, std::abs(grad[k])));
    }
    return {fit.all_converged() && worst <= 0.02 && grad_err <= 1e-6,
            "6 contexts x 1e5 records, max probability error " + fmt(worst) + ", gradient relative error " +
                fmt(grad_err)};
}

// 7. Case-study sizes and the failure-scenario table.
Outcome case_study_sizing() {
    const auto cfg = RunConfig::load(data_dir / "config.json");
    const auto det = calibrate_from_moments(cfg.deterioration.mean, cfg.deterioration.sd, cfg.deterioration.b,
                                            cfg.deterioration.T);
    const auto model =
        build_case_study(make_case_study_inputs(cfg, det, std::vector<FragilityModel>(3, FragilityModel(3, 3))));
    const auto table = model.mdp.scenario_cost;
    // Mask bit k is component k of (A, B, C).
    const std::map<std::uint32_t, double> expected{{1, 550}, {2, 960}, {4, 1190}, {3, 1990},
                                                   {5, 2430}, {6, 3250}, {7, 5700}};
    bool totals = table.size() == 8 && table[0] == 0.0;
    for (const auto& [mask, total] : expected) {
        totals = totals && table[mask] == total;
    }
    const bool sizes = model.space.size() == 450 && model.joint_state_count() == 91125000 &&
                       model.mdp.joint_action_count() == 27;
    return {sizes && totals, std::to_string(model.space.size()) + " states per component, " +
                                 std::to_string(model.joint_state_count()) + " joint states, {A} -> " +
                                 fmt(table[1]) + "k, {A,B,C} -> " + fmt(table[7]) + "k"};
}

// Shared by 8 and 9: the reduced bundle produced by the command-line pipeline.
struct Reduced {
    RunConfig config;
    CaseStudyModel model;
    Policy policy;
    double v0_pristine = 0.0;
};

std::optional<Reduced> reduced_bundle(const fs::path& work, std::string& error) {
    const auto cfg_path = data_dir / "config_reduced.json";
    const std::string common = "--config \"" + cfg_path.string() + "\" --out \"" + work.string() + "\"";
    fs::create_directories(work);
    const auto log = work / "pipeline.log";
    for (const char* cmd : {"calibrate", "fit-fragility", "build", "solve"}) {
        if (const int rc = run_cli(std::string(cmd) + " " + common, log); rc != 0) {
            error = std::string(cmd) + " exited with " + std::to_string(rc) + " (see " + log.string() + ")";
            return std::nullopt;
        }
    }
    Reduced r;
    r.config = RunConfig::load(cfg_path);
    std::vector<FragilityModel> frag;
    for (const auto& c : r.config.components) {
        frag.push_back(FragilityModel::load(work / ("fragility_" + c.name + ".json")));
    }
    r.model = build_case_study(
        make_case_study_inputs(r.config, load_deterioration_params(work / "deterioration.json"), frag));
    r.policy = read_policy(work / "policy.bin");
    const std::size_t pristine = r.model.mdp.encode_state(std::vector<std::size_t>(3, 0));
    std::ifstream values(work / "values_t0.csv");
    std::string line;
    std::getline(values, line);
    for (std::size_t s = 0; s <= pristine; ++s) {
        std::getline(values, line);
    }
    r.v0_pristine = std::stod(line.substr(line.find(',') + 1));
    return r;
}

// 8. Policy ordering on the reduced bundle in correlated-hazard mode.
Outcome policy_ordering(const Reduced& r) {
    SimulationOptions o;
    o.n_runs = r.config.simulation.runs;
    o.seed = r.config.seed;
    o.hazard = HazardSampling::CorrelatedField;
    o.snapshot_years = r.config.simulation.snapshot_years;
    o.loss_grid = r.config.simulation.loss_grid;
    std::vector<PolicySpec> specs{PolicySpec::optimal(r.policy)};
    for (const auto& rule : r.config.cbm_rules) {
        specs.push_back(PolicySpec::cbm(rule));
    }
    specs.push_back(PolicySpec::no_action());
    std::vector<LifecycleMetrics> m;
    for (const auto& s : specs) {
        m.push_back(simulate_lifecycle(r.model, s, o));
    }
    std::ostringstream detail;
    bool costs_ok = true;
    const auto& opt = m.front();
    detail << "totals:";
    for (const auto& x : m) {
        detail << ' ' << x.policy << ' ' << fmt(x.costs.total, 6) << "+-" << fmt(x.costs.total_se, 2);
        const double tol = 2.0 * std::hypot(opt.costs.total_se, x.costs.total_se);
        costs_ok = costs_ok && opt.costs.total <= x.costs.total + tol;
    }
    const auto& none = m.back();
    bool failure_ok = true;
    std::size_t worst_year = 0;
    double worst_gap = -1.0;
    for (std::size_t k = 0; k < opt.cumulative_failure.size(); ++k) {
        for (std::size_t y = 0; y < opt.cumulative_failure[k].size(); ++y) {
            const double a = opt.cumulative_failure[k][y], b = none.cumulative_failure[k][y];
            const double tol = 2.0 * std::hypot(proportion_se(a, o.n_runs), proportion_se(b, o.n_runs));
            failure_ok = failure_ok && a <= b + tol;
            if (a - b > worst_gap) {
                worst_gap = a - b;
                worst_year = y;
            }
        }
    }
    const auto baseline = static_baseline_curve(r.model, o.loss_grid);
    const auto year25 = std::find_if(none.aep.begin(), none.aep.end(), [](const AepCurve& c) { return c.year == 25; });
    bool aep_ok = year25 != none.aep.end();
    if (aep_ok) {
        for (std::size_t i = 0; i < baseline.size(); ++i) {
            aep_ok = aep_ok && baseline[i] <= year25->exceedance[i];
        }
    }
    detail << "; cumulative failure Optimal - NoAction max " << fmt(worst_gap) << " (year " << worst_year << ")"
           << "; static baseline " << (aep_ok ? "<=" : "NOT <=") << " NoAction year-25 AEP";
    return {costs_ok && failure_ok && aep_ok, detail.str()};
}

// 9. Simulated optimal cost against V0 in MDP-consistent mode.
Outcome simulator_consistency(const Reduced& r) {
    SimulationOptions o;
    o.n_runs = 10000;
    o.seed = r.config.seed + 9;
    o.hazard = HazardSampling::MdpConsistent;
    o.snapshot_years = r.config.simulation.snapshot_years;
    const auto m = simulate_lifecycle(r.model, PolicySpec::optimal(r.policy), o);
    const double gap = std::abs(m.costs.total - r.v0_pristine);
    return {gap <= 3.0 * m.costs.total_se, "simulated " + fmt(m.costs.total, 8) + " +- " + fmt(m.costs.total_se, 3) +
                                               ", V0(pristine) " + fmt(r.v0_pristine, 8) + ", gap " +
                                               fmt(gap / m.costs.total_se, 3) + " SE"};
}

std::vector<char> bytes_of(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 10. Two full command-line runs on the tiny configuration.
Outcome determinism(const fs::path& work) {
    const auto cfg = data_dir / "config_tiny.json";
    fs::create_directories(work);
    for (const char* dir : {"run1", "run2"}) {
        const auto out = work / dir;
        const std::string common = "--config \"" + cfg.string() + "\" --out \"" + out.string() + "\" --seed 99 --threads 4";
        for (const char* cmd : {"calibrate", "fit-fragility", "build", "solve", "simulate", "compare"}) {
            if (const int rc = run_cli(std::string(cmd) + " " + common, work / "determinism.log"); rc != 0) {
                return {false, std::string(cmd) + " exited with " + std::to_string(rc)};
            }
        }
    }
    std::size_t files = 0, differing = 0;
    for (const auto& e : fs::recursive_directory_iterator(work / "run1")) {
        if (!e.is_regular_file()) {
            continue;
        }
        const auto other = work / "run2" / fs::relative(e.path(), work / "run1");
        ++files;
        if (!fs::exists(other) || bytes_of(e.path()) != bytes_of(other)) {
            ++differing;
            std::cout << "  differs: " << fs::relative(e.path(), work / "run1").string() << '\n';
        }
    }
    std::size_t files2 = 0;
    for (const auto& e : fs::recursive_directory_iterator(work / "run2")) {
        files2 += e.is_regular_file();
    }
    return {files > 0 && differing == 0 && files == files2,
            std::to_string(files) + " output files compared, " + std::to_string(differing) + " differ"};
}

} // namespace

int main() {
    const fs::path work = fs::temp_directory_path() / "lcmdp_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    int failures = 0;
    auto report = [&](int id, const std::function<Outcome()>& gate) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = gate();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << " ["
                  << fmt(seconds_since(t0), 3) << " s]" << std::endl;
    };

    report(1, solver_exactness);
    report(2, kronecker_identity);
    report(3, complexity_separation);
    report(4, calibration);
    report(5, transition_oracle);
    report(6, fragility_recovery);
    report(7, case_study_sizing);

    std::string error;
    std::optional<Reduced> reduced;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        reduced = reduced_bundle(work / "reduced", error);
    } catch (const std::exception& e) {
        error = e.what();
    }
    std::cout << "reduced bundle pipeline: " << fmt(seconds_since(t0), 3) << " s" << std::endl;
    report(8, [&]() -> Outcome {
        return reduced ? policy_ordering(*reduced) : Outcome{false, "reduced bundle unavailable: " + error};
    });
    report(9, [&]() -> Outcome {
        return reduced ? simulator_consistency(*reduced) : Outcome{false, "reduced bundle unavailable: " + error};
    });
    reduced.reset();
    report(10, [&] { return determinism(work / "determinism"); });

    fs::remove_all(work);
    return failures == 0 ? 0 : 1;
}
