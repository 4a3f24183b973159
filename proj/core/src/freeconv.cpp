#include "freesub/freeconv.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fixed_point.hpp"
#include "freesub/errors.hpp"

namespace freesub {

using detail::FixedPointProblem;
using detail::MapValue;

void SolverConfig::validate() const {
    if (!(tol > 0.0) || !std::isfinite(tol)) throw DomainError("solver tol must be positive");
    if (max_iter < 1) throw DomainError("solver max_iter must be at least 1");
    if (!(damping > 0.0 && damping <= 1.0)) throw DomainError("solver damping must lie in (0, 1]");
}

namespace {

double radius(const Measure& m) { return std::max(std::abs(m.support_lo()), std::abs(m.support_hi())); }

void require_finite(cplx z) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw DomainError("non-finite argument");
}

// Slack for the half-plane membership tests.
double slack(cplx w) { return 1e-13 * (1.0 + std::abs(w)); }

bool nonpositive_imag(cplx, cplx g) { return g.imag() <= slack(g); }

// Evaluates a solver defined on the open upper half-plane anywhere off the
// real support: by conjugation below the axis and by Richardson extrapolation
// on the axis. The warm slot carries the last solution between calls.
template <class At>
cplx extend_to_plane(cplx z, At&& at) {
    require_finite(z);
    if (z.imag() > 0.0) return at(z);
    if (z.imag() < 0.0) return std::conj(at(std::conj(z)));
    cplx v[3];
    for (int k = 0; k < 3; ++k) v[k] = at(cplx(z.real(), detail::kRichardsonHeights[k]));
    return detail::richardson_limit(v[0], v[1], v[2]);
}

// ---------------------------------------------------------------------------
// Scalar equations for the three i.i.d. models.

FixedPointProblem vertical_problem(cplx z, double y_top) {
    FixedPointProblem p;
    const double x = z.real();
    p.param_at = [x](double y) { return cplx(x, y); };
    p.y_target = z.imag();
    p.y_top = y_top;
    p.admissible = nonpositive_imag;
    p.start = [](cplx) { return cplx(0.0, 0.0); };
    return p;
}

cplx wigner_at(const Measure& nu, double sigma, cplx z, const SolverConfig& cfg, std::optional<cplx>& warm) {
    auto p = vertical_problem(z, 2.0 * (1.0 + sigma + radius(nu)));
    const double s2 = sigma * sigma;
    p.map = [&nu, s2](cplx zz, cplx g) {
        const auto [gn, dgn] = stieltjes_with_derivative(nu, zz - s2 * g);
        return MapValue{gn, -s2 * dgn};
    };
    p.name = "deformed_wigner_g";
    const auto sol = detail::solve_fixed_point(p, cfg, warm);
    warm = sol.w;
    return sol.w;
}

MapValue sample_cov_map(const Measure& nu, double c, cplx z, cplx g) {
    const cplx s = 1.0 - c + c * z * g;
    if (s == cplx(0.0, 0.0)) {
        // Limit s -> 0 of (1/s) g_nu(z/s).
        return {1.0 / z, c * moments(nu, 1) / z};
    }
    const cplx w = z / s;
    const auto [gn, dgn] = stieltjes_with_derivative(nu, w);
    const cplx f = gn / s;
    const cplx df = c * z * (-gn / (s * s) - (z / (s * s * s)) * dgn);
    return {f, df};
}

cplx sample_cov_at(const Measure& nu, double c, cplx z, const SolverConfig& cfg, std::optional<cplx>& warm) {
    const double b = (1.0 + std::sqrt(c)) * (1.0 + std::sqrt(c));
    auto p = vertical_problem(z, 2.0 * (1.0 + radius(nu) * b));
    p.map = [&nu, c](cplx zz, cplx g) { return sample_cov_map(nu, c, zz, g); };
    p.name = "sample_cov_g";
    const auto sol = detail::solve_fixed_point(p, cfg, warm);
    warm = sol.w;
    return sol.w;
}

cplx info_noise_at(const Measure& nu, double c, double sigma, cplx z, const SolverConfig& cfg,
                   std::optional<cplx>& warm) {
    const double s2 = sigma * sigma;
    const double b = (1.0 + std::sqrt(c)) * (1.0 + std::sqrt(c));
    auto p = vertical_problem(z, 2.0 * (1.0 + (s2 + radius(nu)) * b));
    const double a = c * s2;
    const double bb = s2 * (1.0 - c);
    p.map = [&nu, a, bb](cplx zz, cplx g) {
        const cplx q = 1.0 - a * g;
        const cplx zeta = q * (q * zz - bb);
        const auto [gn, dgn] = stieltjes_with_derivative(nu, zeta);
        const cplx dq = gn + q * dgn * (2.0 * q * zz - bb);
        return MapValue{q * gn, -a * dq};
    };
    p.name = "info_noise_g";
    const auto sol = detail::solve_fixed_point(p, cfg, warm);
    warm = sol.w;
    return sol.w;
}

// ---------------------------------------------------------------------------
// Additive subordination: w = omega_1 is the fixed point of
// w -> J_nu(J_mu(w) - w + z) - (J_mu(w) - w).

struct JValue {
    cplx j;
    cplx dj;
};

JValue j_with_derivative(const Measure& m, cplx w) {
    const auto [g, dg] = stieltjes_with_derivative(m, w);
    if (g == cplx(0.0, 0.0)) throw DivisionByZero("Stieltjes transform vanishes");
    return {1.0 / g, -dg / (g * g)};
}

SubordinationResult additive_at(const Measure& mu, const Measure& nu, cplx z, const SolverConfig& cfg,
                                std::optional<cplx>& warm) {
    FixedPointProblem p;
    const double x = z.real();
    p.param_at = [x](double y) { return cplx(x, y); };
    p.y_target = z.imag();
    p.y_top = 2.0 * (1.0 + radius(mu) + radius(nu));
    p.start = [](cplx zz) { return zz; };
    p.map = [&mu, &nu](cplx zz, cplx w) {
        const auto jm = j_with_derivative(mu, w);
        const cplx h = jm.j - w;
        const auto jn = j_with_derivative(nu, h + zz);
        return MapValue{jn.j - h, (jn.dj - 1.0) * (jm.dj - 1.0)};
    };
    p.admissible = [&mu](cplx zz, cplx w) {
        const double floor = zz.imag() * (1.0 - 1e-9);
        if (w.imag() < floor - slack(w)) return false;
        try {
            const cplx w2 = j_transform(mu, w) - w + zz;
            return w2.imag() >= floor - slack(w2);
        } catch (const Error&) {
            return false;
        }
    };
    p.name = "additive_subordination";
    const auto sol = detail::solve_fixed_point(p, cfg, warm);
    warm = sol.w;
    SubordinationResult r;
    r.omega1 = sol.w;
    const cplx jm = j_transform(mu, r.omega1);
    r.omega2 = jm - r.omega1 + z;
    r.g = stieltjes(mu, r.omega1);
    r.iterations = sol.iterations;
    r.residual = std::abs(r.omega1 + r.omega2 - z - jm) + std::abs(jm - j_transform(nu, r.omega2));
    return r;
}

// ---------------------------------------------------------------------------
// Multiplicative subordination: w = F_1(z)/z is the fixed point of
// w -> (w / eta_mu(z w)) eta_nu(eta_mu(z w) / w). The path runs in 1/z.

MultSubordinationResult multiplicative_at(const Measure& mu, const Measure& nu, cplx z, const SolverConfig& cfg,
                                          std::optional<cplx>& warm) {
    const cplx zeta = 1.0 / z;  // Im zeta > 0
    FixedPointProblem p;
    const double x = zeta.real();
    p.param_at = [x](double y) { return 1.0 / cplx(x, y); };
    p.y_target = zeta.imag();
    p.y_top = 2.0 * (1.0 + mu.support_hi() * nu.support_hi() + mu.support_hi() + nu.support_hi());
    p.start = [](cplx) { return cplx(1.0, 0.0); };
    p.map = [&mu, &nu](cplx zz, cplx w) {
        const auto em = psi_eta_with_derivative(mu, zz * w);
        const cplx E = em.eta;
        if (E == cplx(0.0, 0.0)) throw DivisionByZero("eta vanishes");
        const cplx v = E / w;
        const auto en = psi_eta_with_derivative(nu, v);
        const cplx N = en.eta;
        const cplx dE = zz * em.deta;
        const cplx dv = (dE * w - E) / (w * w);
        const cplx f = w * N / E;
        const cplx df = N / E + w * en.deta * dv / E - w * N * dE / (E * E);
        return MapValue{f, df};
    };
    // For z in the lower half-plane both F_1 and F_2 stay there.
    p.admissible = [&mu](cplx zz, cplx w) {
        const cplx f1 = zz * w;
        if (f1.imag() > slack(f1)) return false;
        try {
            const cplx f2 = psi_eta(mu, f1).eta / w;
            return f2.imag() <= slack(f2);
        } catch (const Error&) {
            return false;
        }
    };
    p.name = "multiplicative_subordination";
    const auto sol = detail::solve_fixed_point(p, cfg, warm);
    warm = sol.w;
    MultSubordinationResult r;
    r.f1 = z * sol.w;
    const auto pm = psi_eta(mu, r.f1);
    r.f2 = pm.eta * z / r.f1;
    r.psi = pm.psi;
    r.iterations = sol.iterations;
    r.residual = std::abs(r.f1 * r.f2 / z - pm.eta) + std::abs(pm.eta - psi_eta(nu, r.f2).eta);
    return r;
}

}  // namespace

SubordinationResult additive_subordination(const Measure& mu, const Measure& nu, cplx z, const SolverConfig& cfg) {
    cfg.validate();
    require_finite(z);
    std::optional<cplx> warm;
    if (z.imag() > 0.0) return additive_at(mu, nu, z, cfg, warm);
    if (z.imag() < 0.0) {
        auto r = additive_at(mu, nu, std::conj(z), cfg, warm);
        r.omega1 = std::conj(r.omega1);
        r.omega2 = std::conj(r.omega2);
        r.g = std::conj(r.g);
        return r;
    }
    SubordinationResult s[3];
    for (int k = 0; k < 3; ++k) s[k] = additive_at(mu, nu, cplx(z.real(), detail::kRichardsonHeights[k]), cfg, warm);
    SubordinationResult r;
    r.omega1 = detail::richardson_limit(s[0].omega1, s[1].omega1, s[2].omega1);
    r.omega2 = detail::richardson_limit(s[0].omega2, s[1].omega2, s[2].omega2);
    r.g = detail::richardson_limit(s[0].g, s[1].g, s[2].g);
    r.iterations = s[0].iterations + s[1].iterations + s[2].iterations;
    r.residual = std::max({s[0].residual, s[1].residual, s[2].residual});
    return r;
}

MultSubordinationResult multiplicative_subordination(const Measure& mu, const Measure& nu, cplx z,
                                                     const SolverConfig& cfg) {
    cfg.validate();
    require_finite(z);
    if (mu.support_lo() < 0.0 || nu.support_lo() < 0.0)
        throw DomainError("multiplicative subordination needs measures on [0, inf)");
    if (mu.atom_mass(0.0) == 1.0 || nu.atom_mass(0.0) == 1.0)
        throw DomainError("multiplicative subordination with the point mass at zero");
    if (z.imag() == 0.0 && z.real() >= 0.0) throw DomainError("z must lie off [0, inf)");
    std::optional<cplx> warm;
    const cplx zeta = 1.0 / z;
    if (zeta.imag() > 0.0) return multiplicative_at(mu, nu, z, cfg, warm);
    if (zeta.imag() < 0.0) {
        auto r = multiplicative_at(mu, nu, std::conj(z), cfg, warm);
        r.f1 = std::conj(r.f1);
        r.f2 = std::conj(r.f2);
        r.psi = std::conj(r.psi);
        return r;
    }
    MultSubordinationResult s[3];
    for (int k = 0; k < 3; ++k)
        s[k] = multiplicative_at(mu, nu, 1.0 / cplx(zeta.real(), detail::kRichardsonHeights[k]), cfg, warm);
    MultSubordinationResult r;
    r.f1 = detail::richardson_limit(s[0].f1, s[1].f1, s[2].f1);
    r.f2 = detail::richardson_limit(s[0].f2, s[1].f2, s[2].f2);
    r.psi = detail::richardson_limit(s[0].psi, s[1].psi, s[2].psi);
    r.iterations = s[0].iterations + s[1].iterations + s[2].iterations;
    r.residual = std::max({s[0].residual, s[1].residual, s[2].residual});
    return r;
}

cplx deformed_wigner_g(const Measure& nu, double sigma, cplx z, const SolverConfig& cfg) {
    cfg.validate();
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    std::optional<cplx> warm;
    return extend_to_plane(z, [&](cplx zz) { return wigner_at(nu, sigma, zz, cfg, warm); });
}

cplx sample_cov_g(const Measure& nu, double c, cplx z, const SolverConfig& cfg) {
    cfg.validate();
    if (!(c > 0.0 && c <= 1.0)) throw DomainError("c must lie in (0, 1]");
    if (nu.support_lo() < 0.0) throw DomainError("nu must be supported on [0, inf)");
    std::optional<cplx> warm;
    return extend_to_plane(z, [&](cplx zz) { return sample_cov_at(nu, c, zz, cfg, warm); });
}

cplx info_noise_g(const Measure& nu, double c, double sigma, cplx z, const SolverConfig& cfg) {
    cfg.validate();
    if (!(c > 0.0 && c <= 1.0)) throw DomainError("c must lie in (0, 1]");
    if (!(sigma > 0.0)) throw DomainError("sigma must be positive");
    if (nu.support_lo() < 0.0) throw DomainError("nu must be supported on [0, inf)");
    std::optional<cplx> warm;
    return extend_to_plane(z, [&](cplx zz) { return info_noise_at(nu, c, sigma, zz, cfg, warm); });
}

cplx info_noise_omega(const Measure& nu, double c, double sigma, cplx z, const SolverConfig& cfg) {
    if (z == cplx(0.0, 0.0)) throw DomainError("Omega needs z != 0");
    const cplx g = info_noise_g(nu, c, sigma, 1.0 / z, cfg);
    const double s2 = sigma * sigma;
    const cplx q = 1.0 - c * s2 * g;
    return 1.0 / ((1.0 / z) * q * q - (1.0 - c) * s2 * q);
}

namespace detail {

// Stieltjes transform of a model's limit law with a warm-start slot, used
// for sweeps over neighbouring points.
cplx model_stieltjes_warm(const DeformedModel& model, cplx z, const SolverConfig& cfg, std::optional<cplx>& warm) {
    auto at = [&](cplx zz) -> cplx {
        switch (model.kind) {
            case ModelKind::Additive: return wigner_at(model.nu, model.sigma, zz, cfg, warm);
            case ModelKind::Multiplicative: return sample_cov_at(model.nu, model.c, zz, cfg, warm);
            case ModelKind::InfoPlusNoise: return info_noise_at(model.nu, model.c, model.sigma, zz, cfg, warm);
            case ModelKind::IsotropicAdditive: return additive_at(*model.mu, model.nu, zz, cfg, warm).g;
            case ModelKind::IsotropicMultiplicative: {
                const auto r = multiplicative_at(*model.mu, model.nu, 1.0 / zz, cfg, warm);
                return (r.psi + 1.0) / zz;
            }
        }
        throw DomainError("unknown model kind");
    };
    return extend_to_plane(z, at);
}

}  // namespace detail

cplx model_stieltjes(const DeformedModel& model, cplx z, const SolverConfig& cfg) {
    cfg.validate();
    std::optional<cplx> warm;
    return detail::model_stieltjes_warm(model, z, cfg, warm);
}

cplx nu_subordination(const DeformedModel& model, cplx z, const SolverConfig& cfg) {
    cfg.validate();
    std::optional<cplx> warm;
    switch (model.kind) {
        case ModelKind::Additive: {
            const cplx g = detail::model_stieltjes_warm(model, z, cfg, warm);
            return z - model.sigma * model.sigma * g;
        }
        case ModelKind::Multiplicative: {
            const cplx g = detail::model_stieltjes_warm(model, z, cfg, warm);
            const cplx den = model.c < 1.0 ? (1.0 - model.c) + model.c * z * g : z * g;
            if (den == cplx(0.0, 0.0)) throw DivisionByZero("subordination denominator vanishes");
            return z / den;
        }
        case ModelKind::InfoPlusNoise: {
            const cplx g = detail::model_stieltjes_warm(model, z, cfg, warm);
            const double s2 = model.sigma * model.sigma;
            const cplx q = 1.0 - model.c * s2 * g;
            return z * q * q - (1.0 - model.c) * s2 * q;
        }
        case ModelKind::IsotropicAdditive:
            return extend_to_plane(z, [&](cplx zz) { return additive_at(*model.mu, model.nu, zz, cfg, warm).omega2; });
        case ModelKind::IsotropicMultiplicative:
            if (z == cplx(0.0, 0.0)) throw DomainError("subordination at zero");
            return extend_to_plane(z, [&](cplx zz) {
                return 1.0 / multiplicative_at(*model.mu, model.nu, 1.0 / zz, cfg, warm).f2;
            });
    }
    throw DomainError("unknown model kind");
}

std::vector<Atom> model_atoms(const DeformedModel& model) {
    auto atoms_of = [](const Measure& m) {
        std::vector<Atom> out;
        if (const auto* a = m.as<AtomicKind>()) return a->atoms;
        if (const auto* g = m.as<GridDensityKind>()) return g->atoms;
        if (const auto* mx = m.as<MixtureKind>()) {
            for (const auto& part : mx->parts) {
                // Only the locations matter; masses are re-queried below.
                if (const auto* pa = part.measure.as<AtomicKind>()) {
                    for (const auto& at : pa->atoms) out.push_back(at);
                } else if (const auto* pg = part.measure.as<GridDensityKind>()) {
                    for (const auto& at : pg->atoms) out.push_back(at);
                }
            }
        }
        return out;
    };
    std::vector<Atom> result;
    switch (model.kind) {
        case ModelKind::Additive:
        case ModelKind::InfoPlusNoise: break;
        case ModelKind::Multiplicative: {
            const double w0 = model.nu.atom_mass(0.0);
            if (w0 > 0.0) result.push_back({0.0, w0});
            break;
        }
        case ModelKind::IsotropicAdditive: {
            // mu boxplus nu has an atom at a + b iff mu({a}) + nu({b}) > 1.
            for (const auto& a : atoms_of(*model.mu)) {
                const double wa = model.mu->atom_mass(a.location);
                for (const auto& b : atoms_of(model.nu)) {
                    const double w = wa + model.nu.atom_mass(b.location) - 1.0;
                    if (w > 0.0) result.push_back({a.location + b.location, w});
                }
            }
            break;
        }
        case ModelKind::IsotropicMultiplicative: {
            const double w0 = std::max(model.mu->atom_mass(0.0), model.nu.atom_mass(0.0));
            if (w0 > 0.0) result.push_back({0.0, w0});
            for (const auto& a : atoms_of(*model.mu)) {
                if (a.location == 0.0) continue;
                const double wa = model.mu->atom_mass(a.location);
                for (const auto& b : atoms_of(model.nu)) {
                    if (b.location == 0.0) continue;
                    const double w = wa + model.nu.atom_mass(b.location) - 1.0;
                    if (w > 0.0) result.push_back({a.location * b.location, w});
                }
            }
            break;
        }
    }
    std::sort(result.begin(), result.end(), [](const Atom& l, const Atom& r) { return l.location < r.location; });
    return result;
}

Measure convolve_density(const DeformedModel& model, std::span<const double> grid, double y, const SolverConfig& cfg) {
    cfg.validate();
    const auto atoms = model_atoms(model);
    std::optional<cplx> warm;
    auto g_cont = [&](cplx z) {
        cplx g = detail::model_stieltjes_warm(model, z, cfg, warm);
        for (const auto& a : atoms) g -= a.weight / (z - a.location);
        return g;
    };
    // Solver failures surface as NoConvergence rather than the generic evaluation error.
    std::optional<NoConvergence> failure;
    auto g_checked = [&](cplx z) {
        try {
            return g_cont(z);
        } catch (const NoConvergence& e) {
            failure = e;
            throw;
        }
    };
    GridDensity dens;
    try {
        dens = density_from_g(g_checked, grid, y);
    } catch (const EvaluationError& e) {
        if (failure) throw NoConvergence(e.what(), failure->residual(), failure->iterations());
        throw;
    }
    // At height y the density has Poisson tails of order y off the support. Low values are
    // replaced by the real-axis limit so that gaps and edges come out clean.
    constexpr double kTailRefine = 1e-2;
    for (std::size_t i = 0; i < dens.grid.size(); ++i) {
        if (dens.values[i] >= kTailRefine) continue;
        const double x = dens.grid[i];
        const bool on_atom = std::any_of(atoms.begin(), atoms.end(), [x](const Atom& a) { return a.location == x; });
        if (on_atom) continue;
        try {
            dens.values[i] = std::max(0.0, -g_cont(cplx(x, 0.0)).imag() / std::numbers::pi);
        } catch (const NoConvergence&) {
        }
    }
    double atom_mass = 0.0;
    for (const auto& a : atoms) atom_mass += a.weight;
    const double total = dens.mass() + atom_mass;
    constexpr double kMassTol = 2e-3;
    if (std::abs(total - 1.0) > kMassTol)
        throw EvaluationError("density mass " + std::to_string(total) + " differs from one; grid misses the support");
    return Measure::grid_density(std::move(dens.grid), std::move(dens.values), atoms, kMassTol);
}

std::vector<double> free_cumulant_oracle(const Measure& m, int order) {
    if (order < 1 || order > 8) throw RangeError("cumulant order must lie in [1, 8]");
    const double m0 = moments(m, 0);
    std::vector<double> mom(static_cast<std::size_t>(order) + 1);
    mom[0] = 1.0;
    for (int k = 1; k <= order; ++k) mom[static_cast<std::size_t>(k)] = moments(m, k) / m0;
    // pw[s][j] = [z^j] (sum_i m_i z^i)^s, truncated at degree order.
    const auto n = static_cast<std::size_t>(order);
    std::vector<std::vector<double>> pw(n + 1, std::vector<double>(n + 1, 0.0));
    pw[0][0] = 1.0;
    for (std::size_t s = 1; s <= n; ++s) {
        for (std::size_t j = 0; j <= n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i <= j; ++i) acc += mom[i] * pw[s - 1][j - i];
            pw[s][j] = acc;
        }
    }
    // m_k = sum_{s=1}^{k} kappa_s [z^{k-s}] M(z)^s.
    std::vector<double> kappa(n + 1, 0.0);
    for (std::size_t k = 1; k <= n; ++k) {
        double acc = mom[k];
        for (std::size_t s = 1; s < k; ++s) acc -= kappa[s] * pw[s][k - s];
        kappa[k] = acc;  // pw[k][0] = 1
    }
    return {kappa.begin() + 1, kappa.end()};
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
    if (points < 2 || !(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) throw DomainError("invalid grid");
    std::vector<double> g(points);
    const double step = (hi - lo) / static_cast<double>(points - 1);
    for (std::size_t k = 0; k < points; ++k) g[k] = lo + step * static_cast<double>(k);
    g.back() = hi;
    return g;
}

}  // namespace freesub
