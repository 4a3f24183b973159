#include "freesub/spiked.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "freesub/errors.hpp"

namespace freesub {

namespace {

constexpr int kScanPoints = 1024;
constexpr double kBoundaryTol = 1e-9;
constexpr double kRootTol = 1e-6;
constexpr double kInsideImag = 1e-6;
constexpr double kOverlapStep = 1e-5;
constexpr int kQuantileGrid = 8001;

bool multiplicative_kind(ModelKind k) { return k == ModelKind::Multiplicative || k == ModelKind::InfoPlusNoise; }

double alpha_of(const DeformedModel& m, double theta) {
    const double dphi = phi_prime(m, theta);
    switch (m.kind) {
        case ModelKind::Additive: return dphi;
        case ModelKind::Multiplicative: return theta * dphi / phi(m, theta);
        case ModelKind::InfoPlusNoise: {
            const double g = stieltjes(m.nu, cplx(theta, 0.0)).real();
            return dphi / (1.0 + m.sigma * m.sigma * m.c * g);
        }
        default: break;
    }
    throw DomainError("overlap formula needs an i.i.d. model kind");
}

double quantile_of_law(const DeformedModel& m, const SupportDescription& d, double alpha, const SolverConfig& cfg) {
    double lo = d.intervals.front().lo;
    double hi = d.intervals.back().hi;
    if (d.atom_at_zero) lo = std::min(lo, 0.0);
    const double pad = 0.02 * (hi - lo) + 1e-6;
    std::vector<double> grid(kQuantileGrid);
    for (int i = 0; i < kQuantileGrid; ++i)
        grid[static_cast<std::size_t>(i)] = (lo - pad) + (hi - lo + 2.0 * pad) * i / (kQuantileGrid - 1);
    return quantile(convolve_density(m, grid, 1e-6, cfg), alpha);
}

DeformedModel spiked_factor_model(const DeformedModel& model, SpikeSide side) {
    if (!model.isotropic()) throw DomainError("isotropic outliers need an isotropic model kind");
    if (side == SpikeSide::A) return model;
    if (model.kind == ModelKind::IsotropicAdditive) return DeformedModel::isotropic_additive(model.nu, *model.mu);
    return DeformedModel::isotropic_multiplicative(model.nu, *model.mu);
}

// Real value of omega at rho, or nullopt inside the support or on solver failure.
std::optional<double> omega_real(const DeformedModel& m, double rho, const SolverConfig& cfg) {
    try {
        const cplx w = nu_subordination(m, cplx(rho, 0.0), cfg);
        if (!std::isfinite(w.real()) || std::abs(w.imag()) > kInsideImag * (1.0 + std::abs(w))) return std::nullopt;
        return w.real();
    } catch (const NoConvergence&) {
        return std::nullopt;
    } catch (const DivisionByZero&) {
        return std::nullopt;
    } catch (const DomainError&) {
        return std::nullopt;
    }
}

double omega_at(const DeformedModel& m, double rho, const SolverConfig& cfg) {
    const auto w = omega_real(m, rho, cfg);
    if (!w) throw EvaluationError("subordination function undefined at " + std::to_string(rho));
    return *w;
}

// Roots of omega - theta on the open interval (a, b) from sign changes on a Chebyshev scan.
// Sign changes across poles are dropped by the residual check.
void scan_roots(const DeformedModel& m, double theta, double a, double b, const SolverConfig& cfg,
                std::vector<double>& out) {
    std::vector<double> x;
    std::vector<std::optional<double>> f;
    for (int k = 0; k < kScanPoints; ++k) {
        const double t = std::cos(std::numbers::pi * (k + 0.5) / kScanPoints);
        x.push_back(0.5 * (a + b) - 0.5 * (b - a) * t);
    }
    std::sort(x.begin(), x.end());
    for (double xi : x) {
        const auto w = omega_real(m, xi, cfg);
        f.push_back(w ? std::optional<double>(*w - theta) : std::nullopt);
    }
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        if (!f[i] || !f[i + 1]) continue;
        if (*f[i] == 0.0) {
            out.push_back(x[i]);
            continue;
        }
        if ((*f[i] > 0.0) == (*f[i + 1] > 0.0)) continue;
        double l = x[i];
        double r = x[i + 1];
        const bool l_pos = *f[i] > 0.0;
        bool ok = true;
        for (int it = 0; it < 200 && r - l > 1e-14 * std::max(1.0, std::abs(l)); ++it) {
            const double mid = 0.5 * (l + r);
            if (mid <= l || mid >= r) break;
            const auto fm = omega_real(m, mid, cfg);
            if (!fm) {
                ok = false;
                break;
            }
            ((*fm - theta > 0.0) == l_pos ? l : r) = mid;
        }
        const double root = 0.5 * (l + r);
        const auto fr = omega_real(m, root, cfg);
        if (ok && fr && std::abs(*fr - theta) < kRootTol * (1.0 + std::abs(theta))) out.push_back(root);
    }
}

std::vector<Atom> empirical_atoms(const SpikedDeformation& sd, std::size_t n) {
    const auto* bulk = sd.model.nu.as<AtomicKind>();
    if (bulk == nullptr) throw DomainError("separation needs an atomic nu");
    std::size_t r = 0;
    for (const auto& s : sd.spikes) r += static_cast<std::size_t>(s.multiplicity);
    if (n <= r) throw DomainError("matrix size must exceed the number of spikes");
    const double nn = static_cast<double>(n);
    std::vector<Atom> atoms;
    for (const auto& a : bulk->atoms) atoms.push_back({a.location, a.weight * (1.0 - static_cast<double>(r) / nn)});
    for (const auto& s : sd.spikes) atoms.push_back({s.theta, s.multiplicity / nn});
    std::sort(atoms.begin(), atoms.end(), [](const Atom& x, const Atom& y) { return x.location < y.location; });
    std::vector<Atom> merged;
    for (const auto& a : atoms) {
        if (!merged.empty() && merged.back().location == a.location) {
            merged.back().weight += a.weight;
        } else {
            merged.push_back(a);
        }
    }
    return merged;
}

}  // namespace

std::string_view to_string(SpikeClass c) noexcept {
    switch (c) {
        case SpikeClass::Outlier: return "outlier";
        case SpikeClass::StickRight: return "stick_right";
        case SpikeClass::StickLeft: return "stick_left";
        case SpikeClass::Quantile: return "quantile";
    }
    return "unknown";
}

void SpikedDeformation::validate() const {
    for (std::size_t j = 0; j < spikes.size(); ++j) {
        const auto& s = spikes[j];
        if (!std::isfinite(s.theta)) throw DomainError("spike values must be finite");
        if (s.multiplicity < 1) throw DomainError("spike multiplicities must be positive");
        if (j > 0 && !(s.theta < spikes[j - 1].theta)) throw DomainError("spikes must be strictly decreasing");
        const Measure& carrier = (side == SpikeSide::B && model.mu) ? *model.mu : model.nu;
        if (carrier.distance_to_support(s.theta) < kSupportGuard)
            throw DomainError("spike " + std::to_string(s.theta) + " lies on the support of its factor");
        const bool positive_kind = multiplicative_kind(model.kind) || model.kind == ModelKind::IsotropicMultiplicative;
        if (positive_kind && !(s.theta > 0.0)) throw DomainError("spikes of a multiplicative model must be positive");
    }
    if (!model.isotropic() && side != SpikeSide::A) throw DomainError("i.i.d. models carry spikes on the A side");
}

OutlierReport classify_spikes(const SpikedDeformation& sd, const SolverConfig& cfg) {
    sd.validate();
    if (sd.model.isotropic()) throw DomainError("classify_spikes needs an i.i.d. model kind");
    const auto& m = sd.model;
    const auto adm = admissible_set(m);
    const auto desc = support_intervals(m, cfg);
    OutlierReport report;
    for (const auto& s : sd.spikes) {
        SpikeReport r;
        r.theta = s.theta;
        r.multiplicity = s.multiplicity;
        const double tol = kBoundaryTol * (1.0 + std::abs(s.theta));
        const auto inside = std::find_if(adm.begin(), adm.end(), [&](const Interval& o) {
            return s.theta > o.lo + tol && s.theta < o.hi - tol;
        });
        if (inside != adm.end()) {
            r.classification = SpikeClass::Outlier;
            r.limit = phi(m, s.theta);
            r.rho_values = {r.limit};
            r.predicted_overlap = {std::clamp(alpha_of(m, s.theta), 0.0, 1.0)};
            report.spikes.push_back(r);
            continue;
        }
        // Block [u, v] of R \ O holding theta.
        std::size_t block = 0;
        while (block < desc.preimage_intervals.size() && desc.preimage_intervals[block].v + tol < s.theta) ++block;
        if (block == desc.preimage_intervals.size()) throw EvaluationError("spike is not in any block of R \\ O");
        const auto [u, v] = desc.preimage_intervals[block];
        r.critical = std::abs(s.theta - u) <= tol || std::abs(s.theta - v) <= tol;
        const double nu_below = m.nu.mass_of(u, s.theta);
        const double nu_above = m.nu.mass_of(s.theta, v);
        if (nu_above == 0.0) {
            r.classification = SpikeClass::StickRight;
            r.limit = desc.intervals[block].hi;
        } else if (nu_below == 0.0) {
            r.classification = SpikeClass::StickLeft;
            r.limit = desc.intervals[block].lo;
            r.unverified = block == 0 && desc.leftmost_edge_unverified;
        } else {
            r.classification = SpikeClass::Quantile;
            r.alpha = cdf(m.nu, s.theta);
            r.limit = quantile_of_law(m, desc, r.alpha, cfg);
        }
        report.spikes.push_back(r);
    }
    return report;
}

double overlap(const SpikedDeformation& sd, double theta_j, double theta_l) {
    sd.validate();
    auto has = [&](double t) {
        return std::any_of(sd.spikes.begin(), sd.spikes.end(), [t](const Spike& s) { return s.theta == t; });
    };
    if (!has(theta_j) || !has(theta_l)) throw IndexError("theta is not a spike of the deformation");
    if (sd.model.isotropic()) throw DomainError("use isotropic_overlap for the isotropic model kinds");
    const auto adm = admissible_set(sd.model);
    const double tol = kBoundaryTol * (1.0 + std::abs(theta_j));
    const bool outlier = std::any_of(adm.begin(), adm.end(), [&](const Interval& o) {
        return theta_j > o.lo + tol && theta_j < o.hi - tol;
    });
    if (!outlier) throw NotAnOutlier("spike " + std::to_string(theta_j) + " does not generate an outlier");
    if (theta_j != theta_l) return 0.0;
    return std::clamp(alpha_of(sd.model, theta_j), 0.0, 1.0);
}

IsotropicOutliers isotropic_outliers(const DeformedModel& model, double theta, SpikeSide side,
                                     std::optional<Interval> scan, const SolverConfig& cfg) {
    cfg.validate();
    const DeformedModel m = spiked_factor_model(model, side);
    if (m.nu.distance_to_support(theta) < kSupportGuard)
        throw DomainError("spike lies on the support of its factor");
    const auto desc = support_intervals(m, cfg);
    const double reach = 10.0 * (1.0 + std::abs(theta));
    const Interval range = scan.value_or(Interval{desc.intervals.front().lo - reach, desc.intervals.back().hi + reach});
    // Open pieces of the range outside the support.
    std::vector<Interval> pieces;
    double cursor = range.lo;
    for (const auto& iv : desc.intervals) {
        if (iv.lo > cursor) pieces.push_back({cursor, std::min(iv.lo, range.hi)});
        cursor = std::max(cursor, iv.hi);
        if (cursor >= range.hi) break;
    }
    if (cursor < range.hi) pieces.push_back({cursor, range.hi});

    IsotropicOutliers out;
    out.extrapolated = m.kind == ModelKind::IsotropicMultiplicative;
    for (const auto& p : pieces) {
        if (p.hi - p.lo <= 0.0) continue;
        scan_roots(m, theta, p.lo, p.hi, cfg, out.rho);
    }
    std::sort(out.rho.begin(), out.rho.end());
    return out;
}

std::vector<double> isotropic_outliers(const Measure& mu, const Measure& nu, double theta, std::optional<Interval> scan,
                                       const SolverConfig& cfg) {
    return isotropic_outliers(DeformedModel::isotropic_additive(mu, nu), theta, SpikeSide::A, scan, cfg).rho;
}

double isotropic_overlap(const DeformedModel& model, double theta, double rho, SpikeSide side,
                         const SolverConfig& cfg) {
    cfg.validate();
    const DeformedModel m = spiked_factor_model(model, side);
    const double w = omega_at(m, rho, cfg);
    if (std::abs(w - theta) > kRootTol * (1.0 + std::abs(theta)))
        throw PreconditionError("rho is not a solution of omega(rho) = theta");
    auto diff = [&](double h) { return (omega_at(m, rho + h, cfg) - omega_at(m, rho - h, cfg)) / (2.0 * h); };
    const double h = kOverlapStep * std::max(1.0, std::abs(rho));
    const double d = (4.0 * diff(0.5 * h) - diff(h)) / 3.0;
    if (m.kind == ModelKind::IsotropicMultiplicative) return theta / (rho * d);
    return 1.0 / d;
}

SeparationMap separation_map(const SpikedDeformation& sd, std::size_t n, double a, double b,
                             const SolverConfig& cfg) {
    sd.validate();
    if (!(a < b)) throw DomainError("separation needs a < b");
    const DeformedModel mn = sd.model.with_nu(Measure::atomic(empirical_atoms(sd, n)));
    const auto k = mobile_edges(mn);
    for (const auto& iv : k.intervals)
        if (!(b < iv.lo || a > iv.hi)) throw GapError("[a, b] meets the deterministic-equivalent support");
    if (k.atom_at_zero && a <= 0.0 && 0.0 <= b) throw GapError("[a, b] contains the atom at zero");
    SeparationMap out;
    out.phi_a = varphi(mn, a, cfg);
    out.phi_b = varphi(mn, b, cfg);
    const double above = 1.0 - cdf(mn.nu, out.phi_b);
    out.count_above = static_cast<std::size_t>(std::llround(above * static_cast<double>(n)));
    return out;
}

}  // namespace freesub
