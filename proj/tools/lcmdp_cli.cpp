#include "commands.hpp"

#include "lcmdp/errors.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace lcmdp::cli;
    CLI::App app{"Life-cycle maintenance planning with factored MDPs"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions g;
    std::string config;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out;
    app.add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "master seed (overrides the config)");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads; 0 uses all cores");
    auto* out_opt = app.add_option("--out", out, "output directory (overrides the config)");
    app.add_flag("--oracle", g.oracle, "solve: cross-check against the naive solver when small enough");

    struct Verb {
        const char* name;
        const char* help;
        int (*run)(const GlobalOptions&, std::ostream&);
    };
    const Verb verbs[] = {
        {"calibrate", "fit gamma-process parameters to the deterioration targets", cmd_calibrate},
        {"fit-fragility", "simulate fragility data and fit the multinomial logit models", cmd_fit_fragility},
        {"build", "assemble the factored MDP and write a model summary", cmd_build},
        {"solve", "tensor value iteration; writes policy.bin and values", cmd_solve},
        {"simulate", "Monte Carlo life cycles under the optimal policy", cmd_simulate},
        {"compare", "optimal vs CBM rules vs no action", cmd_compare},
    };
    const Verb* chosen = nullptr;
    for (const auto& v : verbs) {
        app.add_subcommand(v.name, v.help)->callback([&chosen, &v] { chosen = &v; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    g.config = config;
    if (*seed_opt) {
        g.seed = seed;
    }
    if (*threads_opt) {
        g.threads = threads;
    }
    if (*out_opt) {
        g.out = out;
    }

    try {
        return chosen->run(g, std::cout);
    } catch (const lcmdp::ValidationError& e) {
        std::cerr << "validation error: " << e.what() << '\n';
        return 2;
    } catch (const lcmdp::ResourceError& e) {
        std::cerr << "resource refusal: " << e.what() << '\n';
        return 3;
    } catch (const lcmdp::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 4;
    } catch (const lcmdp::DecompositionError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
