#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace lcmdp::cli {

struct GlobalOptions {
    std::filesystem::path config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::filesystem::path> out;
    bool oracle = false;
};

int cmd_calibrate(const GlobalOptions& g, std::ostream& log);
int cmd_fit_fragility(const GlobalOptions& g, std::ostream& log);
int cmd_build(const GlobalOptions& g, std::ostream& log);
int cmd_solve(const GlobalOptions& g, std::ostream& log);
int cmd_simulate(const GlobalOptions& g, std::ostream& log);
int cmd_compare(const GlobalOptions& g, std::ostream& log);

} // namespace lcmdp::cli
