#include "freesub/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <boost/math/quadrature/gauss.hpp>

#include "freesub/errors.hpp"

namespace freesub {

namespace {

constexpr double kUnitMassTol = 1e-12;
constexpr double kDensityFloor = 1e-12;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool finite(double x) { return std::isfinite(x); }

void validate_atoms(std::vector<Atom>& atoms) {
    for (const auto& a : atoms) {
        if (!finite(a.location) || !finite(a.weight) || a.weight <= 0.0)
            throw DomainError("atoms need finite locations and strictly positive weights");
    }
    std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.location < r.location; });
    for (std::size_t i = 1; i < atoms.size(); ++i) {
        if (atoms[i].location == atoms[i - 1].location) throw DomainError("atom locations must be distinct");
    }
}

double atom_total(const std::vector<Atom>& atoms) {
    double s = 0.0;
    for (const auto& a : atoms) s += a.weight;
    return s;
}

std::vector<Interval> merge(std::vector<Interval> v, double slack = 0.0) {
    std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    std::vector<Interval> out;
    for (const auto& iv : v) {
        if (!out.empty() && iv.lo <= out.back().hi + slack) {
            out.back().hi = std::max(out.back().hi, iv.hi);
        } else {
            out.push_back(iv);
        }
    }
    return out;
}

std::vector<Interval> grid_components(const GridDensityKind& gd) {
    const auto& x = gd.grid;
    const auto& v = gd.values;
    const std::size_t n = x.size();
    std::vector<Interval> cont;
    for (std::size_t i = 0; i < n; ++i) {
        if (v[i] <= kDensityFloor) continue;
        const double lo = x[i == 0 ? 0 : i - 1];
        const double hi = x[i + 1 == n ? n - 1 : i + 1];
        if (!cont.empty() && lo <= cont.back().hi) {
            cont.back().hi = hi;
        } else {
            cont.push_back({lo, hi});
        }
    }
    // Gaps narrower than two local grid steps are merged.
    std::vector<Interval> merged;
    for (const auto& iv : cont) {
        if (!merged.empty()) {
            auto it = std::lower_bound(x.begin(), x.end(), merged.back().hi);
            const std::size_t k = static_cast<std::size_t>(it - x.begin());
            const double step = (k + 1 < n) ? x[k + 1] - x[k] : x[k] - x[k - 1];
            if (iv.lo - merged.back().hi < 2.0 * step * (1.0 + 1e-9)) {
                merged.back().hi = iv.hi;
                continue;
            }
        }
        merged.push_back(iv);
    }
    for (const auto& a : gd.atoms) merged.push_back({a.location, a.location});
    return merge(std::move(merged));
}

}  // namespace

struct Measure::Data {
    Kind kind;
    double lo = 0.0;
    double hi = 0.0;
    double mass = 1.0;
    std::vector<Interval> components;
};

Measure::Measure(std::shared_ptr<const Data> data) : data_(std::move(data)) {}

Measure Measure::atomic(std::vector<Atom> atoms) {
    if (atoms.empty()) throw DomainError("atomic measure needs at least one atom");
    validate_atoms(atoms);
    const double total = atom_total(atoms);
    if (std::abs(total - 1.0) > kUnitMassTol) throw DomainError("atomic weights must sum to one");
    auto d = std::make_shared<Data>();
    d->lo = atoms.front().location;
    d->hi = atoms.back().location;
    d->mass = total;
    for (const auto& a : atoms) d->components.push_back({a.location, a.location});
    d->kind = AtomicKind{std::move(atoms)};
    return Measure(std::move(d));
}

Measure Measure::dirac(double location) { return atomic({{location, 1.0}}); }

Measure Measure::grid_density(std::vector<double> grid, std::vector<double> values, std::vector<Atom> atoms,
                              double mass_tol) {
    if (grid.size() < 8) throw DomainError("grid density needs at least 8 grid points");
    if (values.size() != grid.size()) throw DomainError("grid and values differ in length");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!finite(grid[i]) || !finite(values[i])) throw DomainError("grid density entries must be finite");
        if (values[i] < 0.0) throw DomainError("grid density values must be nonnegative");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw DomainError("grid must be strictly increasing");
    }
    validate_atoms(atoms);
    GridDensityKind gd{std::move(grid), std::move(values), std::move(atoms), {}};
    gd.cumulative.assign(gd.grid.size(), 0.0);
    for (std::size_t i = 1; i < gd.grid.size(); ++i) {
        gd.cumulative[i] =
            gd.cumulative[i - 1] + 0.5 * (gd.values[i] + gd.values[i - 1]) * (gd.grid[i] - gd.grid[i - 1]);
    }
    const double total = gd.cumulative.back() + atom_total(gd.atoms);
    if (std::abs(total - 1.0) > mass_tol) throw DomainError("grid density mass differs from one");
    auto d = std::make_shared<Data>();
    d->components = grid_components(gd);
    if (d->components.empty()) throw DomainError("grid density has empty support");
    d->lo = d->components.front().lo;
    d->hi = d->components.back().hi;
    d->mass = total;
    d->kind = std::move(gd);
    return Measure(std::move(d));
}

Measure Measure::semicircle(double sigma) {
    if (!finite(sigma) || sigma <= 0.0) throw DomainError("semicircle needs sigma > 0");
    auto d = std::make_shared<Data>();
    d->kind = SemicircleKind{sigma};
    d->lo = -2.0 * sigma;
    d->hi = 2.0 * sigma;
    d->components = {{d->lo, d->hi}};
    return Measure(std::move(d));
}

Measure Measure::marchenko_pastur(double c) {
    if (!finite(c) || c <= 0.0 || c > 1.0) throw DomainError("Marchenko-Pastur needs c in (0, 1]");
    auto d = std::make_shared<Data>();
    d->kind = MarchenkoPasturKind{c};
    const double r = std::sqrt(c);
    d->lo = (1.0 - r) * (1.0 - r);
    d->hi = (1.0 + r) * (1.0 + r);
    d->components = {{d->lo, d->hi}};
    return Measure(std::move(d));
}

Measure Measure::mixture(std::vector<WeightedMeasure> parts) {
    if (parts.empty()) throw DomainError("mixture needs at least one part");
    double total = 0.0;
    std::vector<Interval> comps;
    for (const auto& p : parts) {
        if (!finite(p.weight) || p.weight <= 0.0) throw DomainError("mixture weights must be positive");
        total += p.weight;
        const auto& c = p.measure.components();
        comps.insert(comps.end(), c.begin(), c.end());
    }
    if (std::abs(total - 1.0) > kUnitMassTol) throw DomainError("mixture weights must sum to one");
    auto d = std::make_shared<Data>();
    d->components = merge(std::move(comps));
    d->lo = d->components.front().lo;
    d->hi = d->components.back().hi;
    d->mass = 0.0;
    for (const auto& p : parts) d->mass += p.weight * p.measure.total_mass();
    d->kind = MixtureKind{std::move(parts)};
    return Measure(std::move(d));
}

const Measure::Kind& Measure::kind() const noexcept { return data_->kind; }

std::string_view Measure::kind_name() const noexcept {
    return std::visit(overloaded{[](const AtomicKind&) { return std::string_view("atomic"); },
                                 [](const GridDensityKind&) { return std::string_view("grid_density"); },
                                 [](const SemicircleKind&) { return std::string_view("semicircle"); },
                                 [](const MarchenkoPasturKind&) { return std::string_view("marchenko_pastur"); },
                                 [](const MixtureKind&) { return std::string_view("mixture"); }},
                      data_->kind);
}

double Measure::support_lo() const noexcept { return data_->lo; }
double Measure::support_hi() const noexcept { return data_->hi; }
const std::vector<Interval>& Measure::components() const noexcept { return data_->components; }
double Measure::total_mass() const noexcept { return data_->mass; }

double Measure::atom_mass(double x) const {
    return std::visit(overloaded{[&](const AtomicKind& a) {
                                     for (const auto& at : a.atoms)
                                         if (at.location == x) return at.weight;
                                     return 0.0;
                                 },
                                 [&](const GridDensityKind& g) {
                                     for (const auto& at : g.atoms)
                                         if (at.location == x) return at.weight;
                                     return 0.0;
                                 },
                                 [](const SemicircleKind&) { return 0.0; },
                                 [](const MarchenkoPasturKind&) { return 0.0; },
                                 [&](const MixtureKind& m) {
                                     double s = 0.0;
                                     for (const auto& p : m.parts) s += p.weight * p.measure.atom_mass(x);
                                     return s;
                                 }},
                      data_->kind);
}

double Measure::mass_of(double a, double b) const {
    if (b < a) return 0.0;
    return cdf(*this, b) - cdf_left(*this, a);
}

double Measure::distance_to_support(double x) const noexcept {
    double best = std::numeric_limits<double>::infinity();
    const auto& comps = data_->components;
    auto it = std::lower_bound(comps.begin(), comps.end(), x, [](const Interval& c, double v) { return c.hi < v; });
    const auto idx = static_cast<std::ptrdiff_t>(it - comps.begin());
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(idx - 1, 0);
         j <= idx && j < static_cast<std::ptrdiff_t>(comps.size()); ++j) {
        const auto& c = comps[static_cast<std::size_t>(j)];
        double d = 0.0;
        if (x < c.lo) d = c.lo - x;
        else if (x > c.hi) d = x - c.hi;
        best = std::min(best, d);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Stieltjes transform

namespace {

void require_off_support(const Measure& m, cplx z) {
    if (!finite(z.real()) || !finite(z.imag())) throw DomainError("non-finite argument");
    if (z.imag() == 0.0 && m.distance_to_support(z.real()) <= kSupportGuard)
        throw DomainError("real argument on the support");
}

// log(1 + d) accurate for small |d|.
cplx log1p_c(cplx d) {
    const cplx u = 1.0 + d;
    if (u == cplx(1.0, 0.0)) return d;
    return std::log(u) * d / (u - 1.0);
}

StieltjesPair grid_stieltjes(const GridDensityKind& gd, cplx z) {
    const bool real_axis = z.imag() == 0.0;
    cplx g = 0.0;
    cplx dg = 0.0;
    const auto& x = gd.grid;
    const auto& v = gd.values;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) {
        const double p0 = v[i];
        const double p1 = v[i + 1];
        if (real_axis ? std::max(p0, p1) <= kDensityFloor : (p0 == 0.0 && p1 == 0.0)) continue;
        const double h = x[i + 1] - x[i];
        const double s = (p1 - p0) / h;
        const cplx a = z - x[i];
        const cplx b = z - x[i + 1];
        const cplx L = log1p_c(h / b);
        const cplx P = p0 + s * a;
        g += P * L - s * h;
        dg += s * L - P * h / (a * b);
    }
    for (const auto& at : gd.atoms) {
        const cplx r = 1.0 / (z - at.location);
        g += at.weight * r;
        dg -= at.weight * r * r;
    }
    return {g, dg};
}

StieltjesPair stieltjes_impl(const Measure& m, cplx z) {
    return std::visit(
        overloaded{[&](const AtomicKind& a) {
                       StieltjesPair r{0.0, 0.0};
                       for (const auto& at : a.atoms) {
                           const cplx q = 1.0 / (z - at.location);
                           r.g += at.weight * q;
                           r.dg -= at.weight * q * q;
                       }
                       return r;
                   },
                   [&](const GridDensityKind& gd) { return grid_stieltjes(gd, z); },
                   [&](const SemicircleKind& sc) {
                       const double e = 2.0 * sc.sigma;
                       const cplx s = std::sqrt(z - e) * std::sqrt(z + e);
                       const cplx g = 2.0 / (z + s);
                       return StieltjesPair{g, -g / s};
                   },
                   [&](const MarchenkoPasturKind& mp) {
                       const double c = mp.c;
                       const double r = std::sqrt(c);
                       const double a = (1.0 - r) * (1.0 - r);
                       const double b = (1.0 + r) * (1.0 + r);
                       const cplx s = std::sqrt(z - a) * std::sqrt(z - b);
                       const cplx g = 2.0 / ((z + c - 1.0) + s);
                       return StieltjesPair{g, -(g - c * g * g) / s};
                   },
                   [&](const MixtureKind& mx) {
                       StieltjesPair r{0.0, 0.0};
                       for (const auto& p : mx.parts) {
                           const auto q = stieltjes_impl(p.measure, z);
                           r.g += p.weight * q.g;
                           r.dg += p.weight * q.dg;
                       }
                       return r;
                   }},
        m.kind());
}

}  // namespace

StieltjesPair stieltjes_with_derivative(const Measure& m, cplx z) {
    require_off_support(m, z);
    auto r = stieltjes_impl(m, z);
    if (z.imag() == 0.0) {
        r.g = {r.g.real(), 0.0};
        r.dg = {r.dg.real(), 0.0};
    }
    return r;
}

cplx stieltjes(const Measure& m, cplx z) { return stieltjes_with_derivative(m, z).g; }

cplx stieltjes_derivative(const Measure& m, cplx z) { return stieltjes_with_derivative(m, z).dg; }

cplx j_transform(const Measure& m, cplx z) {
    const cplx g = stieltjes(m, z);
    if (g == cplx(0.0, 0.0)) throw DivisionByZero("Stieltjes transform vanishes");
    return 1.0 / g;
}

PsiEtaDerivative psi_eta_with_derivative(const Measure& m, cplx z) {
    if (z == cplx(0.0, 0.0)) throw DomainError("psi/eta need z != 0");
    const cplx w = 1.0 / z;
    const auto [g, dg] = stieltjes_with_derivative(m, w);
    const cplx psi = w * g - 1.0;
    const cplx dpsi = -(g + w * dg) * w * w;
    const cplx one_psi = 1.0 + psi;
    if (one_psi == cplx(0.0, 0.0)) throw DivisionByZero("1 + psi vanishes");
    return {psi, dpsi, psi / one_psi, dpsi / (one_psi * one_psi)};
}

PsiEta psi_eta(const Measure& m, cplx z) {
    const auto r = psi_eta_with_derivative(m, z);
    return {r.psi, r.eta};
}

cplx h_c_transform(const Measure& m, double c, cplx z) {
    if (!(c > 0.0 && c <= 1.0)) throw DomainError("c must lie in (0, 1]");
    if (z == cplx(0.0, 0.0)) throw DomainError("H transform needs z != 0");
    const cplx g = stieltjes(m, 1.0 / z);
    return (c / z) * g * g + (1.0 - c) * g;
}

double GridDensity::mass() const noexcept {
    double s = 0.0;
    for (std::size_t i = 1; i < grid.size(); ++i) s += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    return s;
}

GridDensity density_from_g(const std::function<cplx(cplx)>& g_eval, std::span<const double> grid, double y) {
    if (!(y > 0.0)) throw DomainError("inversion height must be positive");
    GridDensity out;
    out.grid.assign(grid.begin(), grid.end());
    out.values.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        cplx g;
        try {
            g = g_eval(cplx(grid[i], y));
        } catch (const std::exception& e) {
            throw EvaluationError(std::string("evaluation failed at x = ") + std::to_string(grid[i]) + ": " + e.what());
        }
        if (!finite(g.real()) || !finite(g.imag()))
            throw EvaluationError("non-finite transform at x = " + std::to_string(grid[i]));
        out.values[i] = std::max(0.0, -g.imag() / std::numbers::pi);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distribution function, quantiles, moments

namespace {

// Closed forms evaluated in extended precision so that rounding to double
// keeps the result monotone in practice.
double semicircle_cdf(double sigma, double x) {
    const long double e = 2.0L * sigma;
    if (x <= -e) return 0.0;
    if (x >= e) return 1.0;
    const long double s2 = static_cast<long double>(sigma) * sigma;
    const long double xl = x;
    const long double pi_l = std::numbers::pi_v<long double>;
    return static_cast<double>(0.5L + xl * std::sqrt(4.0L * s2 - xl * xl) / (4.0L * pi_l * s2) +
                               std::asin(xl / e) / pi_l);
}

// Antiderivative of sqrt((b-x)(x-a))/x, normalised so that F(a) = 0.
double mp_cdf(double c, double x) {
    const long double rc = std::sqrt(static_cast<long double>(c));
    const long double a = (1.0L - rc) * (1.0L - rc);
    const long double b = (1.0L + rc) * (1.0L + rc);
    if (x <= a) return 0.0;
    if (x >= b) return 1.0;
    const long double xl = x;
    const long double pi_l = std::numbers::pi_v<long double>;
    const long double r = std::sqrt((b - xl) * (xl - a));
    const long double t1 = std::asin(std::clamp((2.0L * xl - a - b) / (b - a), -1.0L, 1.0L));
    long double anti = r + 0.5L * (a + b) * (t1 + 0.5L * pi_l);
    if (a > 0.0L) {
        const long double t2 = std::asin(std::clamp(((a + b) * xl - 2.0L * a * b) / ((b - a) * xl), -1.0L, 1.0L));
        anti -= std::sqrt(a * b) * (t2 + 0.5L * pi_l);
    }
    return std::clamp(static_cast<double>(anti / (2.0L * pi_l * c)), 0.0, 1.0);
}

double atoms_up_to(const std::vector<Atom>& atoms, double x, bool inclusive) {
    double s = 0.0;
    for (const auto& a : atoms) {
        if (inclusive ? a.location <= x : a.location < x) s += a.weight;
        else break;
    }
    return s;
}

double grid_continuous_cdf(const GridDensityKind& gd, double x) {
    const auto& g = gd.grid;
    if (x <= g.front()) return 0.0;
    if (x >= g.back()) return gd.cumulative.back();
    const auto it = std::upper_bound(g.begin(), g.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - g.begin()) - 1;
    const double h = g[i + 1] - g[i];
    const double t = x - g[i];
    const double s = (gd.values[i + 1] - gd.values[i]) / h;
    return gd.cumulative[i] + gd.values[i] * t + 0.5 * s * t * t;
}

double cdf_impl(const Measure& m, double x, bool inclusive) {
    return std::visit(overloaded{[&](const AtomicKind& a) { return atoms_up_to(a.atoms, x, inclusive); },
                                 [&](const GridDensityKind& gd) {
                                     const double total = gd.cumulative.back() + atom_total(gd.atoms);
                                     return (grid_continuous_cdf(gd, x) + atoms_up_to(gd.atoms, x, inclusive)) / total;
                                 },
                                 [&](const SemicircleKind& sc) { return semicircle_cdf(sc.sigma, x); },
                                 [&](const MarchenkoPasturKind& mp) { return mp_cdf(mp.c, x); },
                                 [&](const MixtureKind& mx) {
                                     double s = 0.0;
                                     for (const auto& p : mx.parts) s += p.weight * cdf_impl(p.measure, x, inclusive);
                                     return s;
                                 }},
                      m.kind());
}

double catalan(int k) {
    double c = 1.0;
    for (int i = 0; i < k; ++i) c = c * 2.0 * (2.0 * i + 1.0) / (i + 2.0);
    return c;
}

double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

double grid_moment(const GridDensityKind& gd, int k) {
    using boost::math::quadrature::gauss;
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < gd.grid.size(); ++i) {
        const double p0 = gd.values[i];
        const double p1 = gd.values[i + 1];
        if (p0 == 0.0 && p1 == 0.0) continue;
        const double x0 = gd.grid[i];
        const double h = gd.grid[i + 1] - x0;
        // Ten-point Gauss rule is exact for the degree k + 1 <= 17 integrand.
        auto f = [&](double x) { return (p0 + (p1 - p0) * (x - x0) / h) * std::pow(x, k); };
        s += gauss<double, 10>::integrate(f, x0, x0 + h);
    }
    for (const auto& a : gd.atoms) s += a.weight * std::pow(a.location, k);
    return s;
}

}  // namespace

double cdf(const Measure& m, double x) { return cdf_impl(m, x, true); }

double cdf_left(const Measure& m, double x) { return cdf_impl(m, x, false); }

double quantile(const Measure& m, double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw RangeError("quantile level outside [0, 1]");
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (const auto* a = m.as<AtomicKind>()) {
        double s = 0.0;
        for (const auto& at : a->atoms) {
            s += at.weight;
            if (s >= p) return at.location;
        }
        return a->atoms.back().location;
    }
    double lo = m.support_lo() - 1.0;
    double hi = m.support_hi();
    if (cdf(m, hi) < p) return hi;
    // Bisect down to adjacent doubles so the Galois inequality holds exactly.
    while (true) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        if (cdf(m, mid) >= p) hi = mid;
        else lo = mid;
    }
    return hi;
}

double moments(const Measure& m, int k) {
    if (k < 0 || k > 16) throw RangeError("moment order must lie in [0, 16]");
    if (k == 0) return m.total_mass();
    return std::visit(overloaded{[&](const AtomicKind& a) {
                                     double s = 0.0;
                                     for (const auto& at : a.atoms) s += at.weight * std::pow(at.location, k);
                                     return s;
                                 },
                                 [&](const GridDensityKind& gd) { return grid_moment(gd, k); },
                                 [&](const SemicircleKind& sc) {
                                     if (k % 2 != 0) return 0.0;
                                     return catalan(k / 2) * std::pow(sc.sigma, k);
                                 },
                                 [&](const MarchenkoPasturKind& mp) {
                                     double s = 0.0;
                                     for (int j = 0; j < k; ++j)
                                         s += std::pow(mp.c, j) / (j + 1.0) * binomial(k, j) * binomial(k - 1, j);
                                     return s;
                                 },
                                 [&](const MixtureKind& mx) {
                                     double s = 0.0;
                                     for (const auto& p : mx.parts) s += p.weight * moments(p.measure, k);
                                     return s;
                                 }},
                      m.kind());
}

}  // namespace freesub
