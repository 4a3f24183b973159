#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "freesub/errors.hpp"
#include "freesub/freeconv.hpp"
#include "freesub/measure.hpp"
#include "freesub/model.hpp"
#include "freesub/simlab.hpp"
#include "freesub/spiked.hpp"
#include "freesub/support.hpp"

namespace freesub::io {

using json = nlohmann::ordered_json;

/// Format and schema errors in input documents.
class ConfigError : public Error {
public:
    using Error::Error;
    [[nodiscard]] const char* kind() const noexcept override { return "ConfigError"; }
};

[[nodiscard]] Measure measure_from_json(const json& j);
[[nodiscard]] json to_json(const Measure& m);

[[nodiscard]] DeformedModel model_from_json(const json& j);
[[nodiscard]] json to_json(const DeformedModel& m);

[[nodiscard]] SolverConfig solver_from_json(const json& j);
[[nodiscard]] json to_json(const SolverConfig& c);

[[nodiscard]] std::vector<Spike> spikes_from_json(const json& j);
[[nodiscard]] SpikeSide side_from_json(const json& j);

[[nodiscard]] json to_json(const SupportDescription& s);
[[nodiscard]] json to_json(const OutlierReport& r);
[[nodiscard]] json to_json(const SimResult& r);
[[nodiscard]] json to_json(const FluctuationTable& t);

/// Simulation section of a run config.
struct SimSettings {
    std::size_t n = 0;
    std::optional<std::size_t> p;
    EntryDist entries = EntryDist::Gaussian;
    std::size_t trials = 1;
    std::uint64_t seed = 0;
    std::optional<std::vector<double>> bulk;
    std::optional<std::vector<double>> b_spectrum;
};

[[nodiscard]] SimSettings sim_from_json(const json& j);
[[nodiscard]] json to_json(const SimSettings& s);

/// Ensemble for a model and its spikes. The bulk of A~ (and the spectrum of B for isotropic
/// kinds) defaults to quantile samples of nu (and mu); for the rectangular kinds p defaults to
/// round(n / c) and an explicit p must reproduce c within 1e-9.
[[nodiscard]] EnsembleSpec make_ensemble(const DeformedModel& model, std::span<const Spike> spikes,
                                         const SimSettings& sim);

/// Structured error document.
[[nodiscard]] json error_json(const std::string& kind, const std::string& message);

/// 64-bit FNV-1a of the compact dump, as 16 hex digits.
[[nodiscard]] std::string content_hash(const json& j);

/// 17 significant digits.
[[nodiscard]] std::string format_number(double x);

}  // namespace freesub::io
