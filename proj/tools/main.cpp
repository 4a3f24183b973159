#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "commands.hpp"
#include "freesub/errors.hpp"

namespace {

using freesub::io::json;

void report(const std::string& kind, const std::string& message, const json& extra = json::object()) {
    json doc = freesub::io::error_json(kind, message);
    for (const auto& [k, v] : extra.items()) doc["error"][k] = v;
    std::cerr << doc.dump() << "\n";
}

json load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw freesub::io::ConfigError("cannot open config '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw freesub::io::ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deformed random matrix spectra: limit laws, supports, outliers and simulation"};
    std::string command;
    std::string config_path;
    std::optional<std::string> output;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> format;
    app.add_option("command", command, "convolve | support | outliers | simulate | compare; overrides the config command")
        ->check(CLI::IsMember({"convolve", "support", "outliers", "simulate", "compare"}));
    app.add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    app.add_option("--output", output, "Output path prefix");
    app.add_option("--seed", seed, "Override sim.seed");
    app.add_option("--threads", threads, "Worker cap for trials")->check(CLI::PositiveNumber);
    app.add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        report("UsageError", e.what());
        return freesub::cli::kUsage;
    }

    try {
        auto cfg = freesub::cli::parse_config(load(config_path));
        if (!command.empty()) cfg.command = command;
        if (cfg.command.empty()) throw freesub::io::ConfigError("no command given");
        if (output) cfg.output = *output;
        if (format) cfg.format = *format;
        if (threads) cfg.threads = *threads;
        if (seed) {
            if (!cfg.sim) throw freesub::io::ConfigError("--seed needs a 'sim' section");
            cfg.sim->seed = *seed;
        }
        return freesub::cli::run(cfg);
    } catch (const freesub::NoConvergence& e) {
        report(e.kind(), e.what(), {{"residual", e.residual()}, {"iterations", e.iterations()}});
        return freesub::cli::kNoConvergence;
    } catch (const freesub::Error& e) {
        report(e.kind(), e.what());
        return freesub::cli::kUsage;
    } catch (const std::exception& e) {
        report("Error", e.what());
        return freesub::cli::kUsage;
    }
}
