#pragma once

#include <span>
#include <vector>

#include "freesub/measure.hpp"
#include "freesub/model.hpp"

namespace freesub {

struct SolverConfig {
    double tol = 1e-12;
    int max_iter = 10000;
    double damping = 1.0;

    /// Throws DomainError when a field is out of range.
    void validate() const;
};

struct SubordinationResult {
    cplx omega1;  // g = g_mu(omega1)
    cplx omega2;  // g = g_nu(omega2)
    cplx g;
    int iterations = 0;
    double residual = 0.0;
};

struct MultSubordinationResult {
    cplx f1;
    cplx f2;
    cplx psi;
    int iterations = 0;
    double residual = 0.0;
};

/// Subordination functions of mu boxplus nu at z.
/// Real z outside the support is reached as a limit from above.
[[nodiscard]] SubordinationResult additive_subordination(const Measure& mu, const Measure& nu, cplx z,
                                                         const SolverConfig& cfg = {});

/// Subordination functions of mu boxtimes nu at z in C \ [0, inf).
[[nodiscard]] MultSubordinationResult multiplicative_subordination(const Measure& mu, const Measure& nu, cplx z,
                                                                   const SolverConfig& cfg = {});

/// g of semicircle(sigma) boxplus nu.
[[nodiscard]] cplx deformed_wigner_g(const Measure& nu, double sigma, cplx z, const SolverConfig& cfg = {});

/// g of Marchenko-Pastur(c) boxtimes nu.
[[nodiscard]] cplx sample_cov_g(const Measure& nu, double c, cplx z, const SolverConfig& cfg = {});

/// g of the information-plus-noise limit law.
[[nodiscard]] cplx info_noise_g(const Measure& nu, double c, double sigma, cplx z, const SolverConfig& cfg = {});

/// Rectangular subordination value Omega(z), from g of the same law at 1/z.
[[nodiscard]] cplx info_noise_omega(const Measure& nu, double c, double sigma, cplx z, const SolverConfig& cfg = {});

/// g of the limiting spectral law of any model kind.
[[nodiscard]] cplx model_stieltjes(const DeformedModel& model, cplx z, const SolverConfig& cfg = {});

/// Subordination function on the nu side: g_law(z) = g_nu(omega(z)) for the additive kinds and
/// the inverse of the real map phi for the multiplicative kinds. Real z off the support is reached
/// as a limit from above.
[[nodiscard]] cplx nu_subordination(const DeformedModel& model, cplx z, const SolverConfig& cfg = {});

/// Atoms of the limiting spectral law.
[[nodiscard]] std::vector<Atom> model_atoms(const DeformedModel& model);

/// points equally spaced nodes from lo to hi inclusive; throws DomainError for fewer than 2 points or hi <= lo.
[[nodiscard]] std::vector<double> uniform_grid(double lo, double hi, std::size_t points);

/// Limit law sampled on a grid by Stieltjes inversion at height y.
[[nodiscard]] Measure convolve_density(const DeformedModel& model, std::span<const double> grid, double y = 1e-6,
                                       const SolverConfig& cfg = {});

/// Free cumulants kappa_1..kappa_order from moments.
[[nodiscard]] std::vector<double> free_cumulant_oracle(const Measure& m, int order);

}  // namespace freesub
