#include "freesub/support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "freesub/errors.hpp"

namespace freesub {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kProbesPerGap = 512;
// Probe count per gap for information-plus-noise deterministic equivalents with many atoms.
constexpr int kProbesManyAtoms = 64;
constexpr std::size_t kMaxMobileAtoms = 10000;
constexpr double kProbeFloor = 1e-8;
constexpr double kEdgeStep = 1e-4;
constexpr double kInsideImag = 1e-6;
constexpr int kIsotropicGrid = 4001;
constexpr double kIsotropicFloor = 1e-9;

void require_iid(const DeformedModel& m) {
    if (m.isotropic()) throw DomainError("phi has no closed form for the isotropic model kinds");
}

struct PhiValue {
    double phi;
    double dphi;
    double g;
};

PhiValue phi_value(const DeformedModel& m, double u) {
    if (!std::isfinite(u)) throw DomainError("u must be finite");
    if (m.nu.distance_to_support(u) < kSupportGuard) throw DomainError("u lies on the support of nu");
    const auto p = stieltjes_with_derivative(m.nu, cplx(u, 0.0));
    const double g = p.g.real();
    const double dg = p.dg.real();
    switch (m.kind) {
        case ModelKind::Additive: {
            const double s2 = m.sigma * m.sigma;
            return {u + s2 * g, 1.0 + s2 * dg, g};
        }
        case ModelKind::Multiplicative: {
            const double c = m.c;
            return {u * (1.0 - c + c * u * g), 1.0 - c + 2.0 * c * u * g + c * u * u * dg, g};
        }
        case ModelKind::InfoPlusNoise: {
            const double s2 = m.sigma * m.sigma;
            const double c = m.c;
            const double q = 1.0 + c * s2 * g;
            const double dq = c * s2 * dg;
            return {u * q * q + s2 * (1.0 - c) * q, q * q + 2.0 * u * q * dq + s2 * (1.0 - c) * dq, g};
        }
        default: require_iid(m);
    }
    throw DomainError("unknown model kind");
}

// Positive exactly on the admissible set.
double admissibility(const DeformedModel& m, double u) {
    try {
        const auto v = phi_value(m, u);
        if (m.kind == ModelKind::InfoPlusNoise) return std::min(v.dphi, v.g + 1.0 / (m.c * m.sigma * m.sigma));
        return v.dphi;
    } catch (const DomainError&) {
        return -1.0;
    }
}

double radius(const Measure& m) { return std::max(std::abs(m.support_lo()), std::abs(m.support_hi())); }

// Distance beyond the outermost component of supp(nu) past which phi is increasing.
double ray_length(const DeformedModel& m) {
    const double r = radius(m.nu);
    switch (m.kind) {
        case ModelKind::Additive: return 2.0 * m.sigma + 1e-3 * (1.0 + r);
        case ModelKind::Multiplicative: return 2.0 * std::sqrt(m.c) * r + 1e-3 * (1.0 + r);
        default: return 4.0 * (1.0 + m.sigma * m.sigma) * (1.0 + r);
    }
}

double bisect(const DeformedModel& m, double l, double r) {
    const bool l_pos = admissibility(m, l) > 0.0;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (l + r);
        if (mid <= l || mid >= r || r - l <= 1e-13 * std::max(1.0, std::abs(mid))) break;
        if ((admissibility(m, mid) > 0.0) == l_pos) {
            l = mid;
        } else {
            r = mid;
        }
    }
    return 0.5 * (l + r);
}

// Admissible runs inside the gap (a, b). A support end is approached by extra probes at
// geometric distances; a virtual end (the far end of a ray) is probed directly.
std::vector<Interval> scan_gap(const DeformedModel& m, double a, double b, bool a_support, bool b_support,
                               int probes) {
    const double w = b - a;
    std::vector<double> pts;
    pts.reserve(static_cast<std::size_t>(probes) + 10);
    for (int k = 0; k < probes; ++k) {
        const double t = std::cos(std::numbers::pi * (k + 0.5) / probes);
        pts.push_back(0.5 * (a + b) - 0.5 * w * t);
    }
    for (double f = 1e-6; w * f > kProbeFloor; f *= 0.1) {
        if (a_support) pts.push_back(a + w * f);
        if (b_support) pts.push_back(b - w * f);
    }
    if (!a_support) pts.push_back(a);
    if (!b_support) pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    std::vector<bool> pos(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) pos[i] = admissibility(m, pts[i]) > 0.0;

    std::vector<Interval> runs;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!pos[i]) continue;
        const double lo = (i == 0) ? a : bisect(m, pts[i - 1], pts[i]);
        std::size_t j = i;
        while (j + 1 < pts.size() && pos[j + 1]) ++j;
        const double hi = (j + 1 == pts.size()) ? b : bisect(m, pts[j], pts[j + 1]);
        runs.push_back({lo, hi});
        i = j;
    }
    return runs;
}

bool is_atom(const Interval& c) { return c.lo == c.hi; }

// True when phi is decreasing on the whole gap between two neighbouring atoms. Uses the
// minimum over u of wa/(u-a)^2 + wb/(u-b)^2, which is (wa^(1/3) + wb^(1/3))^3 / (b-a)^2.
bool gap_rejected(const DeformedModel& m, const Interval& left, const Interval& right) {
    if (!is_atom(left) || !is_atom(right)) return false;
    const double a = left.lo;
    const double b = right.lo;
    double wa = m.nu.atom_mass(a);
    double wb = m.nu.atom_mass(b);
    double scale = 0.0;
    if (m.kind == ModelKind::Additive) {
        scale = m.sigma * m.sigma;
    } else if (m.kind == ModelKind::Multiplicative) {
        scale = m.c;
        wa *= a * a;
        wb *= b * b;
    } else {
        return false;
    }
    const double s = std::cbrt(wa) + std::cbrt(wb);
    return scale * s * s * s > (b - a) * (b - a) * (1.0 + 1e-9);
}

std::vector<Interval> compute_admissible(const DeformedModel& m, const std::vector<Interval>& comps, int probes,
                                         bool quick_reject) {
    std::vector<Interval> out;
    double len = ray_length(m);
    const double lo = comps.front().lo;
    const double hi = comps.back().hi;
    for (int k = 0; k < 60 && !(admissibility(m, lo - len) > 0.0 && admissibility(m, hi + len) > 0.0); ++k)
        len *= 2.0;
    if (!(admissibility(m, lo - len) > 0.0 && admissibility(m, hi + len) > 0.0))
        throw EvaluationError("phi is not increasing far from the support of nu");

    auto left = scan_gap(m, lo - len, lo, false, true, probes);
    left.front().lo = -kInf;
    out.insert(out.end(), left.begin(), left.end());
    for (std::size_t k = 0; k + 1 < comps.size(); ++k) {
        if (quick_reject && gap_rejected(m, comps[k], comps[k + 1])) continue;
        const auto runs = scan_gap(m, comps[k].hi, comps[k + 1].lo, true, true, probes);
        out.insert(out.end(), runs.begin(), runs.end());
    }
    auto right = scan_gap(m, hi, hi + len, true, false, probes);
    right.back().hi = kInf;
    out.insert(out.end(), right.begin(), right.end());
    return out;
}

double lagrange_at_zero(const double h[3], const double f[3]) {
    const double l0 = h[1] * h[2] / ((h[0] - h[1]) * (h[0] - h[2]));
    const double l1 = h[0] * h[2] / ((h[1] - h[0]) * (h[1] - h[2]));
    const double l2 = h[0] * h[1] / ((h[2] - h[0]) * (h[2] - h[1]));
    return l0 * f[0] + l1 * f[1] + l2 * f[2];
}

// One-sided limit of phi at u from direction dir (-1 from the left), through the admissible
// interval of the given width.
double one_sided_phi(const DeformedModel& m, double u, double dir, double room) {
    const double s = std::min(kEdgeStep, 0.1 * room);
    double h[3];
    double f[3];
    for (int k = 0; k < 3; ++k) {
        h[k] = s * std::pow(0.1, k);
        f[k] = phi_value(m, u + dir * h[k]).phi;
    }
    return lagrange_at_zero(h, f);
}

SupportDescription describe(const DeformedModel& m, const std::vector<Interval>& adm) {
    if (adm.empty() || adm.front().lo != -kInf || adm.back().hi != kInf)
        throw EvaluationError("admissible set must contain both unbounded rays");
    SupportDescription d;
    const double zero_atom = m.kind == ModelKind::Multiplicative ? m.nu.atom_mass(0.0) : 0.0;
    if (zero_atom > 0.0) d.atom_at_zero = zero_atom;
    for (std::size_t k = 0; k + 1 < adm.size(); ++k) {
        const double u = adm[k].hi;
        const double v = adm[k + 1].lo;
        double mass = m.nu.mass_of(u, v);
        if (zero_atom > 0.0 && u <= 0.0 && 0.0 <= v) {
            mass -= zero_atom;
            if (u == v) continue;
        }
        SupportInterval iv;
        iv.lo = one_sided_phi(m, u, -1.0, adm[k].hi - adm[k].lo);
        iv.hi = one_sided_phi(m, v, 1.0, adm[k + 1].hi - adm[k + 1].lo);
        iv.mass = mass;
        iv.lo_regular = m.nu.distance_to_support(u) > kSupportGuard;
        iv.hi_regular = m.nu.distance_to_support(v) > kSupportGuard;
        // phi(u) = 0 with phi'(u) = 0 is the hard edge at zero of the square case.
        if (m.kind == ModelKind::Multiplicative && m.c == 1.0 && std::abs(iv.lo) <= 1e-9) iv.lo_regular = false;
        d.intervals.push_back(iv);
        d.preimage_intervals.push_back({u, v});
    }
    for (std::size_t k = 0; k < d.intervals.size(); ++k) {
        const auto& iv = d.intervals[k];
        const bool ordered = iv.lo <= iv.hi && (k == 0 || d.intervals[k - 1].hi < iv.lo);
        if (!ordered) throw EvaluationError("support edges are not strictly increasing");
    }
    if (m.kind == ModelKind::InfoPlusNoise && m.c < 1.0 && !d.intervals.empty() &&
        std::abs(d.intervals.front().lo) > 1e-9)
        d.leftmost_edge_unverified = true;
    return d;
}

double density_at(const DeformedModel& m, double x, const SolverConfig& cfg) {
    return -model_stieltjes(m, cplx(x, 0.0), cfg).imag() / std::numbers::pi;
}

// Edge between an outside point and an inside point, by bisection on the real-axis density.
double refine_edge(const DeformedModel& m, double outside, double inside, const SolverConfig& cfg) {
    for (int k = 0; k < 60; ++k) {
        const double mid = 0.5 * (outside + inside);
        if (std::abs(inside - outside) <= 1e-12 * std::max(1.0, std::abs(mid))) break;
        double p = 0.0;
        try {
            p = density_at(m, mid, cfg);
        } catch (const NoConvergence&) {
            p = 1.0;
        }
        (p > kIsotropicFloor ? inside : outside) = mid;
    }
    return 0.5 * (outside + inside);
}

// Isotropic kinds: the support is read off the density on a covering grid.
SupportDescription isotropic_support(const DeformedModel& m, const SolverConfig& cfg) {
    const Measure& mu = *m.mu;
    const Measure& nu = m.nu;
    double lo = 0.0;
    double hi = 0.0;
    if (m.kind == ModelKind::IsotropicAdditive) {
        lo = mu.support_lo() + nu.support_lo();
        hi = mu.support_hi() + nu.support_hi();
    } else {
        lo = mu.support_lo() * nu.support_lo();
        hi = mu.support_hi() * nu.support_hi();
    }
    const double pad = 0.05 * (hi - lo) + 1e-3 * (1.0 + std::abs(hi));
    std::vector<double> grid(kIsotropicGrid);
    for (int i = 0; i < kIsotropicGrid; ++i)
        grid[static_cast<std::size_t>(i)] = (lo - pad) + (hi - lo + 2.0 * pad) * i / (kIsotropicGrid - 1);
    const Measure law = convolve_density(m, grid, 1e-6, cfg);
    const auto* gd = law.as<GridDensityKind>();
    const double step = grid[1] - grid[0];

    SupportDescription d;
    std::vector<Interval> runs;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (gd->values[i] <= kIsotropicFloor) continue;
        std::size_t j = i;
        while (j + 1 < grid.size() && gd->values[j + 1] > kIsotropicFloor) ++j;
        const double a = i == 0 ? grid[0] : refine_edge(m, grid[i - 1], grid[i], cfg);
        const double b = j + 1 == grid.size() ? grid[j] : refine_edge(m, grid[j + 1], grid[j], cfg);
        if (!runs.empty() && a - runs.back().hi < 2.0 * step) {
            runs.back().hi = b;
        } else {
            runs.push_back({a, b});
        }
        i = j;
    }
    const auto atoms = model_atoms(m);
    for (const auto& r : runs) d.intervals.push_back({r.lo, r.hi, law.mass_of(r.lo, r.hi), true, true});
    for (const auto& at : atoms) {
        const bool covered = std::any_of(runs.begin(), runs.end(),
                                         [&](const Interval& r) { return at.location >= r.lo && at.location <= r.hi; });
        if (covered) continue;
        if (m.kind == ModelKind::IsotropicMultiplicative && at.location == 0.0) {
            d.atom_at_zero = at.weight;
            continue;
        }
        d.intervals.push_back({at.location, at.location, at.weight, true, true});
    }
    std::sort(d.intervals.begin(), d.intervals.end(),
              [](const SupportInterval& a, const SupportInterval& b) { return a.lo < b.lo; });
    return d;
}

}  // namespace

double SupportDescription::total_mass() const noexcept {
    double s = atom_at_zero.value_or(0.0);
    for (const auto& iv : intervals) s += iv.mass;
    return s;
}

double phi(const DeformedModel& model, double u) {
    require_iid(model);
    return phi_value(model, u).phi;
}

double phi_prime(const DeformedModel& model, double u) {
    require_iid(model);
    return phi_value(model, u).dphi;
}

std::vector<Interval> admissible_set(const DeformedModel& model) {
    require_iid(model);
    const auto& comps = model.nu.components();
    if (comps.size() > static_cast<std::size_t>(kMaxComponents))
        throw ComponentOverflow("supp(nu) has " + std::to_string(comps.size()) + " components; at most " +
                                std::to_string(kMaxComponents) + " are supported");
    return compute_admissible(model, comps, kProbesPerGap, false);
}

SupportDescription support_intervals(const DeformedModel& model, const SolverConfig& cfg) {
    cfg.validate();
    if (model.isotropic()) return isotropic_support(model, cfg);
    return describe(model, admissible_set(model));
}

double varphi(const DeformedModel& model, double x, const SolverConfig& cfg) {
    if (!std::isfinite(x)) throw DomainError("x must be finite");
    for (const auto& a : model_atoms(model))
        if (a.location == x) throw DomainError("x is an atom of the limit law");
    const cplx w = nu_subordination(model, cplx(x, 0.0), cfg);
    if (std::abs(w.imag()) > kInsideImag * (1.0 + std::abs(w)))
        throw DomainError("x lies inside the support of the limit law");
    return w.real();
}

SupportDescription mobile_edges(const DeformedModel& model) {
    require_iid(model);
    const auto* atoms = model.nu.as<AtomicKind>();
    if (atoms == nullptr) throw DomainError("mobile edges need an atomic nu");
    if (atoms->atoms.size() > kMaxMobileAtoms) throw DomainError("mobile edges accept at most 10^4 atoms");
    const auto& comps = model.nu.components();
    const int probes = (model.kind == ModelKind::InfoPlusNoise && comps.size() > static_cast<std::size_t>(kMaxComponents))
                           ? kProbesManyAtoms
                           : kProbesPerGap;
    return describe(model, compute_admissible(model, comps, probes, true));
}

}  // namespace freesub
