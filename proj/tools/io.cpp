#include "io.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "freesub/errors.hpp"

namespace freesub::io {

namespace {

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json numbers(std::span<const double> xs) {
    json a = json::array();
    for (double x : xs) a.push_back(number(x));
    return a;
}

const json& field(const json& j, const char* key) {
    if (!j.is_object()) throw ConfigError("expected an object");
    const auto it = j.find(key);
    if (it == j.end()) throw ConfigError(std::string("missing field '") + key + "'");
    return *it;
}

template <class T>
T get(const json& j, const char* key) {
    try {
        return field(j, key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return get<T>(j, key);
}

std::vector<Atom> atoms_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("atoms must be an array");
    std::vector<Atom> out;
    for (const auto& a : j) out.push_back({get<double>(a, "location"), get<double>(a, "weight")});
    return out;
}

json atoms_to_json(std::span<const Atom> atoms) {
    json a = json::array();
    for (const auto& at : atoms) a.push_back({{"location", at.location}, {"weight", at.weight}});
    return a;
}

json spike_report(const SpikeReport& s) {
    return {{"theta", s.theta},
            {"multiplicity", s.multiplicity},
            {"classification", std::string(to_string(s.classification))},
            {"rho", numbers(s.rho_values)},
            {"limit", number(s.limit)},
            {"alpha", number(s.alpha)},
            {"overlap", numbers(s.predicted_overlap)},
            {"critical", s.critical},
            {"unverified", s.unverified}};
}

}  // namespace

Measure measure_from_json(const json& j) {
    const auto type = get<std::string>(j, "type");
    if (type == "atomic") return Measure::atomic(atoms_from_json(field(j, "atoms")));
    if (type == "dirac") return Measure::dirac(get<double>(j, "location"));
    if (type == "semicircle") return Measure::semicircle(get<double>(j, "sigma"));
    if (type == "marchenko_pastur") return Measure::marchenko_pastur(get<double>(j, "c"));
    if (type == "grid_density") {
        std::vector<Atom> atoms;
        if (j.contains("atoms")) atoms = atoms_from_json(j["atoms"]);
        return Measure::grid_density(get<std::vector<double>>(j, "grid"), get<std::vector<double>>(j, "density"),
                                     std::move(atoms), get_or<double>(j, "mass_tol", 1e-6));
    }
    if (type == "mixture") {
        std::vector<WeightedMeasure> parts;
        for (const auto& p : field(j, "parts")) parts.push_back({get<double>(p, "weight"), measure_from_json(field(p, "measure"))});
        return Measure::mixture(std::move(parts));
    }
    throw ConfigError("unknown measure type '" + type + "'");
}

json to_json(const Measure& m) {
    json j{{"type", std::string(m.kind_name())}};
    if (const auto* a = m.as<AtomicKind>()) {
        j["atoms"] = atoms_to_json(a->atoms);
    } else if (const auto* g = m.as<GridDensityKind>()) {
        j["grid"] = numbers(g->grid);
        j["density"] = numbers(g->values);
        j["atoms"] = atoms_to_json(g->atoms);
    } else if (const auto* s = m.as<SemicircleKind>()) {
        j["sigma"] = s->sigma;
    } else if (const auto* mp = m.as<MarchenkoPasturKind>()) {
        j["c"] = mp->c;
    } else if (const auto* mix = m.as<MixtureKind>()) {
        json parts = json::array();
        for (const auto& p : mix->parts) parts.push_back({{"weight", p.weight}, {"measure", to_json(p.measure)}});
        j["parts"] = parts;
    }
    return j;
}

DeformedModel model_from_json(const json& j) {
    const auto kind_name = get<std::string>(j, "kind");
    ModelKind kind{};
    try {
        kind = model_kind_from_string(kind_name);
    } catch (const DomainError&) {
        throw ConfigError("unknown model kind '" + kind_name + "'");
    }
    switch (kind) {
        case ModelKind::Additive:
            return DeformedModel::additive(measure_from_json(field(j, "nu")), get<double>(j, "sigma"));
        case ModelKind::Multiplicative:
            return DeformedModel::multiplicative(measure_from_json(field(j, "nu")), get<double>(j, "c"));
        case ModelKind::InfoPlusNoise:
            return DeformedModel::info_plus_noise(measure_from_json(field(j, "nu")), get<double>(j, "c"),
                                                  get<double>(j, "sigma"));
        case ModelKind::IsotropicAdditive:
            return DeformedModel::isotropic_additive(measure_from_json(field(j, "mu")), measure_from_json(field(j, "nu")));
        case ModelKind::IsotropicMultiplicative:
            return DeformedModel::isotropic_multiplicative(measure_from_json(field(j, "mu")),
                                                           measure_from_json(field(j, "nu")));
    }
    throw ConfigError("unknown model kind");
}

json to_json(const DeformedModel& m) {
    json j{{"kind", std::string(to_string(m.kind))}};
    if (m.mu && m.isotropic()) j["mu"] = to_json(*m.mu);
    j["nu"] = to_json(m.nu);
    if (m.kind == ModelKind::Additive || m.kind == ModelKind::InfoPlusNoise) j["sigma"] = m.sigma;
    if (m.kind == ModelKind::Multiplicative || m.kind == ModelKind::InfoPlusNoise) j["c"] = m.c;
    return j;
}

SolverConfig solver_from_json(const json& j) {
    SolverConfig c;
    if (j.is_null()) return c;
    c.tol = get_or(j, "tol", c.tol);
    c.max_iter = get_or(j, "max_iter", c.max_iter);
    c.damping = get_or(j, "damping", c.damping);
    c.validate();
    return c;
}

json to_json(const SolverConfig& c) { return {{"tol", c.tol}, {"max_iter", c.max_iter}, {"damping", c.damping}}; }

std::vector<Spike> spikes_from_json(const json& j) {
    std::vector<Spike> out;
    if (j.is_null()) return out;
    if (!j.is_array()) throw ConfigError("spikes must be an array");
    for (const auto& s : j) {
        if (s.is_number()) out.push_back({s.get<double>(), 1});
        else out.push_back({get<double>(s, "theta"), get_or(s, "multiplicity", 1)});
    }
    return out;
}

SpikeSide side_from_json(const json& j) {
    if (j.is_null()) return SpikeSide::A;
    const auto s = j.get<std::string>();
    if (s == "A") return SpikeSide::A;
    if (s == "B") return SpikeSide::B;
    throw ConfigError("spike side must be 'A' or 'B'");
}

json to_json(const SupportDescription& s) {
    json iv = json::array();
    for (std::size_t k = 0; k < s.intervals.size(); ++k) {
        const auto& i = s.intervals[k];
        json e{{"lo", i.lo}, {"hi", i.hi}, {"mass", i.mass}, {"lo_regular", i.lo_regular}, {"hi_regular", i.hi_regular}};
        if (k < s.preimage_intervals.size())
            e["preimage"] = {{"u", number(s.preimage_intervals[k].u)}, {"v", number(s.preimage_intervals[k].v)}};
        iv.push_back(e);
    }
    return {{"intervals", iv},
            {"atom_at_zero", s.atom_at_zero ? json(*s.atom_at_zero) : json(nullptr)},
            {"total_mass", s.total_mass()},
            {"leftmost_edge_unverified", s.leftmost_edge_unverified}};
}

json to_json(const OutlierReport& r) {
    json a = json::array();
    for (const auto& s : r.spikes) a.push_back(spike_report(s));
    return {{"spikes", a}};
}

json to_json(const SimResult& r) {
    json outl = json::array();
    for (const auto& o : r.outliers)
        outl.push_back({{"value", o.value},
                        {"nearest_prediction", number(o.nearest_prediction)},
                        {"gap", number(o.gap)},
                        {"matched", o.matched},
                        {"ambiguous", o.ambiguous}});
    json ov = json::array();
    for (const auto& v : r.overlaps) ov.push_back(numbers(v));
    return {{"seed", r.seed},       {"trial", r.trial},         {"eigenvalues", numbers(r.eigenvalues)},
            {"outliers", outl},     {"overlaps", ov},           {"ks_distance", r.ks_distance},
            {"wallclock", r.wallclock}};
}

json to_json(const FluctuationTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows) rows.push_back({{"n", r.n}, {"mean", r.mean}, {"stddev", r.stddev}});
    return {{"rows", rows}, {"exponent", t.exponent}};
}

SimSettings sim_from_json(const json& j) {
    SimSettings s;
    s.n = get<std::size_t>(j, "n");
    if (j.contains("p")) s.p = get<std::size_t>(j, "p");
    const auto entries = get_or<std::string>(j, "entries", "gaussian");
    if (entries == "gaussian") s.entries = EntryDist::Gaussian;
    else if (entries == "rademacher") s.entries = EntryDist::Rademacher;
    else throw ConfigError("entries must be 'gaussian' or 'rademacher'");
    s.trials = get_or<std::size_t>(j, "trials", 1);
    s.seed = get_or<std::uint64_t>(j, "seed", 0);
    if (j.contains("bulk")) s.bulk = get<std::vector<double>>(j, "bulk");
    if (j.contains("b_spectrum")) s.b_spectrum = get<std::vector<double>>(j, "b_spectrum");
    if (s.trials == 0) throw ConfigError("trials must be positive");
    return s;
}

json to_json(const SimSettings& s) {
    json j{{"n", s.n}};
    if (s.p) j["p"] = *s.p;
    j["entries"] = s.entries == EntryDist::Gaussian ? "gaussian" : "rademacher";
    j["trials"] = s.trials;
    j["seed"] = s.seed;
    if (s.bulk) j["bulk"] = *s.bulk;
    if (s.b_spectrum) j["b_spectrum"] = *s.b_spectrum;
    return j;
}

EnsembleSpec make_ensemble(const DeformedModel& model, std::span<const Spike> spikes, const SimSettings& sim) {
    EnsembleSpec e;
    e.kind = model.kind;
    e.n = sim.n;
    e.entries = sim.entries;
    e.seed = sim.seed;
    e.sigma = model.kind == ModelKind::Additive || model.kind == ModelKind::InfoPlusNoise ? model.sigma : 1.0;
    e.spikes.assign(spikes.begin(), spikes.end());
    if (model.kind == ModelKind::Multiplicative || model.kind == ModelKind::InfoPlusNoise) {
        const double ideal = static_cast<double>(sim.n) / model.c;
        e.p = sim.p ? *sim.p : static_cast<std::size_t>(std::llround(ideal));
        if (std::abs(static_cast<double>(sim.n) / static_cast<double>(e.p) - model.c) > 1e-9)
            throw ShapeError("n / p does not reproduce the model ratio c");
    }
    const std::size_t rank = e.spike_rank();
    if (rank > e.n) throw ShapeError("spike multiplicities exceed n");
    e.bulk = sim.bulk ? *sim.bulk : quantile_sample(model.nu, e.n - rank);
    if (model.isotropic()) e.b_spectrum = sim.b_spectrum ? *sim.b_spectrum : quantile_sample(*model.mu, e.n);
    e.validate();
    return e;
}

json error_json(const std::string& kind, const std::string& message) {
    return {{"error", {{"kind", kind}, {"message", message}}}};
}

std::string content_hash(const json& j) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_number(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace freesub::io
