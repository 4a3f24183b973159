#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "io.hpp"

namespace freesub::cli {

struct GridSpec {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t points = 0;
};

struct Tolerances {
    double location = 0.10;
    double edge = 0.05;
    double overlap = 0.05;
    double ks = 0.05;
    double count_fraction = 0.9;
};

struct RunConfig {
    std::string command;
    io::json model_json;
    DeformedModel model = DeformedModel::additive(Measure::dirac(0.0), 1.0);
    std::vector<Spike> spikes;
    SpikeSide side = SpikeSide::A;
    std::optional<GridSpec> grid;
    SolverConfig solver;
    std::optional<io::SimSettings> sim;
    Tolerances tolerances;
    std::string output = "freesub_out";
    std::string format = "csv";
    std::size_t threads = 1;
};

/// Parses a config document; throws io::ConfigError on invalid fields.
[[nodiscard]] RunConfig parse_config(const io::json& doc);

enum ExitCode : int { kSuccess = 0, kUsage = 1, kNoConvergence = 2, kFailedVerdict = 3 };

/// Runs the configured command and writes its outputs; returns the exit code.
[[nodiscard]] int run(const RunConfig& cfg);

}  // namespace freesub::cli
