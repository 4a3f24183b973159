#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "freesub/errors.hpp"

namespace freesub::cli {

namespace {

using io::json;

constexpr std::size_t kMinGridPoints = 64;
constexpr std::size_t kDefaultGridPoints = 2001;
constexpr double kDensityHeight = 1e-6;

/// Limit-law predictions shared by the simulate and compare commands.
struct Prediction {
    SupportDescription support;
    Measure law;
    std::vector<std::vector<double>> rho;
    std::vector<std::vector<double>> overlap;
};

std::string path_for(const RunConfig& cfg, const std::string& suffix) { return cfg.output + suffix; }

void write_file(const std::string& path, const std::string& body) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw io::ConfigError("cannot write '" + path + "'");
    out << body;
    if (!out) throw io::ConfigError("failed writing '" + path + "'");
}

void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

json spikes_json(std::span<const Spike> spikes) {
    json a = json::array();
    for (const auto& s : spikes) a.push_back({{"theta", s.theta}, {"multiplicity", s.multiplicity}});
    return a;
}

std::string spec_hash(const RunConfig& cfg) {
    json canon{{"model", cfg.model_json}, {"spikes", spikes_json(cfg.spikes)}, {"side", cfg.side == SpikeSide::A ? "A" : "B"}};
    if (cfg.sim) canon["sim"] = io::to_json(*cfg.sim);
    return io::content_hash(canon);
}

json header(const RunConfig& cfg) {
    json h{{"command", cfg.command}, {"spec_hash", spec_hash(cfg)}};
    if (cfg.sim) h["seed"] = cfg.sim->seed;
    return h;
}

double support_top(const SupportDescription& s) {
    double hi = -std::numeric_limits<double>::infinity();
    for (const auto& iv : s.intervals) hi = std::max(hi, iv.hi);
    if (s.atom_at_zero) hi = std::max(hi, 0.0);
    return hi;
}

std::vector<double> grid_for(const RunConfig& cfg, const SupportDescription& support) {
    if (cfg.grid) return uniform_grid(cfg.grid->lo, cfg.grid->hi, cfg.grid->points);
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& iv : support.intervals) lo = std::min(lo, iv.lo);
    if (support.atom_at_zero) lo = std::min(lo, 0.0);
    const double hi = support_top(support);
    const double pad = std::max(0.1 * (hi - lo), 0.05);
    return uniform_grid(lo - pad, hi + pad, kDefaultGridPoints);
}

json isotropic_report(const RunConfig& cfg, std::vector<std::vector<double>>* rho_out,
                      std::vector<std::vector<double>>* overlap_out) {
    json spikes = json::array();
    for (const auto& s : cfg.spikes) {
        const auto found = isotropic_outliers(cfg.model, s.theta, cfg.side, std::nullopt, cfg.solver);
        std::vector<double> ov;
        for (double r : found.rho) ov.push_back(isotropic_overlap(cfg.model, s.theta, r, cfg.side, cfg.solver));
        spikes.push_back({{"theta", s.theta},
                          {"multiplicity", s.multiplicity},
                          {"classification", found.rho.empty() ? "none" : "outlier"},
                          {"rho", found.rho},
                          {"overlap", ov},
                          {"extrapolated", found.extrapolated}});
        if (rho_out) rho_out->push_back(found.rho);
        if (overlap_out) overlap_out->push_back(ov);
    }
    return {{"spikes", spikes}, {"side", cfg.side == SpikeSide::A ? "A" : "B"}};
}

Prediction predict(const RunConfig& cfg) {
    auto support = support_intervals(cfg.model, cfg.solver);
    auto law = convolve_density(cfg.model, grid_for(cfg, support), kDensityHeight, cfg.solver);
    Prediction p{std::move(support), std::move(law), {}, {}};
    if (cfg.model.isotropic()) {
        (void)isotropic_report(cfg, &p.rho, &p.overlap);
    } else {
        const auto report = classify_spikes({cfg.model, cfg.spikes, cfg.side}, cfg.solver);
        for (const auto& s : report.spikes) {
            const bool out = s.classification == SpikeClass::Outlier;
            p.rho.push_back(out ? s.rho_values : std::vector<double>{});
            p.overlap.push_back(out ? s.predicted_overlap : std::vector<double>{});
        }
    }
    return p;
}

const io::SimSettings& require_sim(const RunConfig& cfg) {
    if (!cfg.sim) throw io::ConfigError("command '" + cfg.command + "' needs a 'sim' section");
    return *cfg.sim;
}

std::vector<SimResult> simulate_trials(const RunConfig& cfg, const Prediction& pred) {
    const auto& sim = require_sim(cfg);
    const auto spec = io::make_ensemble(cfg.model, cfg.spikes, sim);
    SimPrediction sp;
    sp.law = pred.law;
    sp.support = pred.support;
    sp.spike_outliers = pred.rho;
    return run_trials(spec, sp, sim.trials, cfg.threads);
}

int cmd_convolve(const RunConfig& cfg) {
    const auto support = cfg.grid ? SupportDescription{} : support_intervals(cfg.model, cfg.solver);
    const auto grid = grid_for(cfg, support);
    const auto law = convolve_density(cfg.model, grid, kDensityHeight, cfg.solver);
    const auto& g = *law.as<GridDensityKind>();
    if (cfg.format == "csv") {
        std::string body = "x,density\n";
        for (std::size_t k = 0; k < g.grid.size(); ++k)
            body += io::format_number(g.grid[k]) + "," + io::format_number(g.values[k]) + "\n";
        write_file(path_for(cfg, "_density.csv"), body);
    } else {
        write_json(path_for(cfg, "_density.json"), {{"x", g.grid}, {"density", g.values}});
    }
    json summary = header(cfg);
    summary["model"] = cfg.model_json;
    summary["grid"] = {{"lo", grid.front()}, {"hi", grid.back()}, {"points", grid.size()}};
    summary["mass"] = law.total_mass();
    json mom = json::array();
    for (int k = 1; k <= 4; ++k) mom.push_back(moments(law, k));
    summary["moments"] = mom;
    summary["atoms"] = io::to_json(law)["atoms"];
    write_json(path_for(cfg, "_summary.json"), summary);
    return kSuccess;
}

int cmd_support(const RunConfig& cfg) {
    const auto s = support_intervals(cfg.model, cfg.solver);
    if (cfg.format == "csv") {
        std::string body = "lo,hi,mass,lo_regular,hi_regular\n";
        for (const auto& iv : s.intervals)
            body += io::format_number(iv.lo) + "," + io::format_number(iv.hi) + "," + io::format_number(iv.mass) + "," +
                    (iv.lo_regular ? "1" : "0") + "," + (iv.hi_regular ? "1" : "0") + "\n";
        write_file(path_for(cfg, "_support.csv"), body);
    }
    json doc = header(cfg);
    doc["support"] = io::to_json(s);
    write_json(path_for(cfg, "_support.json"), doc);
    return kSuccess;
}

int cmd_outliers(const RunConfig& cfg) {
    json doc = header(cfg);
    if (cfg.model.isotropic()) {
        doc["report"] = isotropic_report(cfg, nullptr, nullptr);
    } else {
        doc["report"] = io::to_json(classify_spikes({cfg.model, cfg.spikes, cfg.side}, cfg.solver));
    }
    write_json(path_for(cfg, "_outliers.json"), doc);
    return kSuccess;
}

int cmd_simulate(const RunConfig& cfg) {
    const auto pred = predict(cfg);
    const auto results = simulate_trials(cfg, pred);
    if (cfg.format == "csv") {
        std::string body = "# spec_hash=" + spec_hash(cfg) + " seed=" + std::to_string(cfg.sim->seed) +
                           " generated=" + utc_timestamp() + "\n";
        for (const auto& r : results) {
            for (std::size_t k = 0; k < r.eigenvalues.size(); ++k)
                body += (k ? "," : "") + io::format_number(r.eigenvalues[k]);
            body += "\n";
        }
        write_file(path_for(cfg, "_eigenvalues.csv"), body);
    }
    json doc = header(cfg);
    doc["model"] = cfg.model_json;
    doc["sim"] = io::to_json(*cfg.sim);
    json trials = json::array();
    for (const auto& r : results) trials.push_back(io::to_json(r));
    doc["trials"] = trials;
    write_json(path_for(cfg, "_simulation.json"), doc);
    return kSuccess;
}

json check(const std::string& name, double predicted, double measured, double tolerance) {
    const bool pass = std::isfinite(measured) && std::abs(measured - predicted) <= tolerance;
    return {{"name", name}, {"predicted", predicted}, {"measured", measured}, {"tolerance", tolerance}, {"pass", pass}};
}

int cmd_compare(const RunConfig& cfg) {
    const auto pred = predict(cfg);
    const auto results = simulate_trials(cfg, pred);
    const auto& tol = cfg.tolerances;
    const double trials = static_cast<double>(results.size());
    json checks = json::array();

    // Eigenvalue nearest each predicted outlier, assigned in the same order as the overlaps.
    std::vector<std::vector<double>> loc_sum(pred.rho.size());
    std::vector<std::vector<double>> ov_sum(pred.rho.size());
    for (std::size_t j = 0; j < pred.rho.size(); ++j) {
        loc_sum[j].assign(pred.rho[j].size(), 0.0);
        ov_sum[j].assign(pred.rho[j].size(), 0.0);
    }
    std::size_t predicted_count = 0;
    for (const auto& v : pred.rho) predicted_count += v.size();
    std::size_t count_ok = 0;
    double top_sum = 0.0;
    double ks_sum = 0.0;
    for (const auto& r : results) {
        std::vector<bool> used(r.eigenvalues.size(), false);
        for (std::size_t j = 0; j < pred.rho.size(); ++j) {
            for (std::size_t k = 0; k < pred.rho[j].size(); ++k) {
                std::size_t best = 0;
                double dist = std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < r.eigenvalues.size(); ++i) {
                    if (!used[i] && std::abs(r.eigenvalues[i] - pred.rho[j][k]) < dist) {
                        dist = std::abs(r.eigenvalues[i] - pred.rho[j][k]);
                        best = i;
                    }
                }
                used[best] = true;
                loc_sum[j][k] += r.eigenvalues[best];
                if (j < r.overlaps.size() && k < r.overlaps[j].size()) ov_sum[j][k] += r.overlaps[j][k];
            }
        }
        count_ok += r.outliers.size() == predicted_count ? 1 : 0;
        top_sum += r.eigenvalues.front();
        ks_sum += r.ks_distance;
    }

    const double top = support_top(pred.support);
    bool outlier_above = false;
    for (std::size_t j = 0; j < pred.rho.size(); ++j) {
        for (std::size_t k = 0; k < pred.rho[j].size(); ++k) {
            const std::string tag = "spike " + std::to_string(j) + " outlier " + std::to_string(k);
            checks.push_back(check(tag + " location", pred.rho[j][k], loc_sum[j][k] / trials, tol.location));
            checks.push_back(check(tag + " overlap", pred.overlap[j][k], ov_sum[j][k] / trials, tol.overlap));
            outlier_above = outlier_above || pred.rho[j][k] > top;
        }
    }
    if (!outlier_above) checks.push_back(check("largest eigenvalue at the right edge", top, top_sum / trials, tol.edge));
    const double fraction = static_cast<double>(count_ok) / trials;
    checks.push_back({{"name", "outlier count"},
                      {"predicted", predicted_count},
                      {"measured", fraction},
                      {"tolerance", tol.count_fraction},
                      {"pass", fraction >= tol.count_fraction}});
    const double ks = ks_sum / trials;
    checks.push_back({{"name", "spectral distribution KS"}, {"predicted", 0.0}, {"measured", ks}, {"tolerance", tol.ks}, {"pass", ks <= tol.ks}});

    const bool pass = std::all_of(checks.begin(), checks.end(), [](const json& c) { return c["pass"].get<bool>(); });
    json doc = header(cfg);
    doc["pass"] = pass;
    doc["trials"] = results.size();
    doc["checks"] = checks;
    write_json(path_for(cfg, "_verdict.json"), doc);
    return pass ? kSuccess : kFailedVerdict;
}

}  // namespace

RunConfig parse_config(const json& doc) {
    if (!doc.is_object()) throw io::ConfigError("config must be a JSON object");
    RunConfig cfg;
    try {
        cfg.command = doc.value("command", std::string{});
        if (!doc.contains("model")) throw io::ConfigError("missing field 'model'");
        cfg.model_json = doc["model"];
        cfg.model = io::model_from_json(cfg.model_json);
        cfg.spikes = io::spikes_from_json(doc.value("spikes", json()));
        cfg.side = io::side_from_json(doc.value("spike_side", json()));
        if (doc.contains("grid")) {
            const auto& g = doc["grid"];
            cfg.grid = GridSpec{g.at("lo").get<double>(), g.at("hi").get<double>(), g.at("points").get<std::size_t>()};
            if (cfg.grid->points < kMinGridPoints) throw io::ConfigError("grid.points must be at least 64");
            if (!(cfg.grid->hi > cfg.grid->lo)) throw io::ConfigError("grid.hi must exceed grid.lo");
        }
        cfg.solver = io::solver_from_json(doc.value("solver", json()));
        if (doc.contains("sim")) cfg.sim = io::sim_from_json(doc["sim"]);
        if (doc.contains("tolerances")) {
            const auto& t = doc["tolerances"];
            cfg.tolerances.location = t.value("location", cfg.tolerances.location);
            cfg.tolerances.edge = t.value("edge", cfg.tolerances.edge);
            cfg.tolerances.overlap = t.value("overlap", cfg.tolerances.overlap);
            cfg.tolerances.ks = t.value("ks", cfg.tolerances.ks);
            cfg.tolerances.count_fraction = t.value("count_fraction", cfg.tolerances.count_fraction);
        }
        cfg.output = doc.value("output", cfg.output);
        cfg.format = doc.value("format", cfg.format);
        cfg.threads = doc.value("threads", static_cast<std::size_t>(std::max(1u, std::thread::hardware_concurrency())));
    } catch (const json::exception& e) {
        throw io::ConfigError(e.what());
    }
    if (cfg.format != "csv" && cfg.format != "json") throw io::ConfigError("format must be 'csv' or 'json'");
    return cfg;
}

int run(const RunConfig& cfg) {
    if (cfg.command == "convolve") return cmd_convolve(cfg);
    if (cfg.command == "support") return cmd_support(cfg);
    if (cfg.command == "outliers") return cmd_outliers(cfg);
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    if (cfg.command == "compare") return cmd_compare(cfg);
    throw io::ConfigError("unknown command '" + cfg.command + "'");
}

}  // namespace freesub::cli
