#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace freesub {

using cplx = std::complex<double>;

struct Atom {
    double location;
    double weight;
};

/// Closed real interval; lo == hi for a point component.
struct Interval {
    double lo;
    double hi;
};

class Measure;

struct WeightedMeasure;

struct AtomicKind {
    std::vector<Atom> atoms;  // sorted by location
};

/// Piecewise-linear density on a grid plus separately carried atoms.
struct GridDensityKind {
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<Atom> atoms;
    std::vector<double> cumulative;  // continuous mass left of each node
};

struct SemicircleKind {
    double sigma;
};

struct MarchenkoPasturKind {
    double c;
};

struct MixtureKind {
    std::vector<WeightedMeasure> parts;
};

/// Immutable compactly supported probability measure. Copies share storage.
class Measure {
public:
    using Kind = std::variant<AtomicKind, GridDensityKind, SemicircleKind, MarchenkoPasturKind, MixtureKind>;

    static Measure atomic(std::vector<Atom> atoms);
    static Measure dirac(double location);
    /// @param mass_tol accepted deviation of the total mass from one.
    /// Computed densities pass a looser value; the default is strict.
    static Measure grid_density(std::vector<double> grid, std::vector<double> values,
                                std::vector<Atom> atoms = {}, double mass_tol = 1e-12);
    static Measure semicircle(double sigma);
    static Measure marchenko_pastur(double c);
    static Measure mixture(std::vector<WeightedMeasure> parts);

    [[nodiscard]] const Kind& kind() const noexcept;
    [[nodiscard]] std::string_view kind_name() const noexcept;
    template <class T>
    [[nodiscard]] const T* as() const noexcept {
        return std::get_if<T>(&kind());
    }

    [[nodiscard]] double support_lo() const noexcept;
    [[nodiscard]] double support_hi() const noexcept;
    /// Connected components of the support in increasing order.
    [[nodiscard]] const std::vector<Interval>& components() const noexcept;
    [[nodiscard]] double total_mass() const noexcept;
    /// Mass of the point {x}.
    [[nodiscard]] double atom_mass(double x) const;
    /// mu([a, b]) for a <= b.
    [[nodiscard]] double mass_of(double a, double b) const;
    /// Distance from a real x to the support.
    [[nodiscard]] double distance_to_support(double x) const noexcept;

private:
    struct Data;
    explicit Measure(std::shared_ptr<const Data> data);
    std::shared_ptr<const Data> data_;
};

struct WeightedMeasure {
    double weight;
    Measure measure;
};

/// Guard margin for real arguments near the support.
inline constexpr double kSupportGuard = 1e-9;

struct StieltjesPair {
    cplx g;
    cplx dg;
};

/// g(z) = int dmu(x)/(z - x).
[[nodiscard]] cplx stieltjes(const Measure& m, cplx z);
[[nodiscard]] cplx stieltjes_derivative(const Measure& m, cplx z);
[[nodiscard]] StieltjesPair stieltjes_with_derivative(const Measure& m, cplx z);

/// J(z) = 1/g(z).
[[nodiscard]] cplx j_transform(const Measure& m, cplx z);

struct PsiEta {
    cplx psi;
    cplx eta;
};

/// psi(z) = g(1/z)/z - 1, eta = psi/(1 + psi).
[[nodiscard]] PsiEta psi_eta(const Measure& m, cplx z);

/// Value and z-derivative of psi and eta.
struct PsiEtaDerivative {
    cplx psi;
    cplx dpsi;
    cplx eta;
    cplx deta;
};
[[nodiscard]] PsiEtaDerivative psi_eta_with_derivative(const Measure& m, cplx z);

/// H(z) = (c/z) g(1/z)^2 + (1 - c) g(1/z).
[[nodiscard]] cplx h_c_transform(const Measure& m, double c, cplx z);

/// Sampled density, not necessarily of unit mass.
struct GridDensity {
    std::vector<double> grid;
    std::vector<double> values;

    /// Trapezoid mass.
    [[nodiscard]] double mass() const noexcept;
};

/// density(x) = max(0, -Im g(x + iy)/pi) on each grid point.
[[nodiscard]] GridDensity density_from_g(const std::function<cplx(cplx)>& g_eval, std::span<const double> grid,
                                         double y = 1e-6);

/// Right-continuous distribution function.
[[nodiscard]] double cdf(const Measure& m, double x);
/// mu((-inf, x)).
[[nodiscard]] double cdf_left(const Measure& m, double x);
/// inf{x : cdf(x) >= p}; returns -infinity for p = 0.
[[nodiscard]] double quantile(const Measure& m, double p);
/// int x^k dmu, k <= 16.
[[nodiscard]] double moments(const Measure& m, int k);

}  // namespace freesub
