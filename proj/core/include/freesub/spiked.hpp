#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "freesub/freeconv.hpp"
#include "freesub/model.hpp"
#include "freesub/support.hpp"

namespace freesub {

struct Spike {
    double theta = 0.0;
    int multiplicity = 1;
};

/// Which factor of an isotropic model carries the spikes. The i.i.d. kinds only have the A side.
enum class SpikeSide { A, B };

struct SpikedDeformation {
    DeformedModel model;
    std::vector<Spike> spikes;
    SpikeSide side = SpikeSide::A;

    /// Throws DomainError unless spikes are strictly decreasing, off supp(nu), positive for the
    /// multiplicative kinds, with positive multiplicities.
    void validate() const;
};

enum class SpikeClass { Outlier, StickRight, StickLeft, Quantile };

[[nodiscard]] std::string_view to_string(SpikeClass c) noexcept;

struct SpikeReport {
    double theta = 0.0;
    int multiplicity = 1;
    SpikeClass classification = SpikeClass::Outlier;
    /// Outlier locations; one entry for the i.i.d. kinds.
    std::vector<double> rho_values;
    /// Support edge for the sticking classes, quantile for Quantile.
    double limit = 0.0;
    /// nu((-inf, theta]) for Quantile.
    double alpha = 0.0;
    /// One overlap per rho.
    std::vector<double> predicted_overlap;
    /// Spike on the boundary of the admissible set.
    bool critical = false;
    /// Left edge of an information-plus-noise model away from zero.
    bool unverified = false;
};

struct OutlierReport {
    std::vector<SpikeReport> spikes;
};

/// Limit of the eigenvalues generated by each spike, for the i.i.d. model kinds.
[[nodiscard]] OutlierReport classify_spikes(const SpikedDeformation& sd, const SolverConfig& cfg = {});

/// Limit of the squared projection of a unit eigenvector for the outlier of spike theta_j
/// onto the eigenspace of spike theta_l. Throws NotAnOutlier when theta_j is not an outlier
/// and IndexError when either value is not a spike.
[[nodiscard]] double overlap(const SpikedDeformation& sd, double theta_j, double theta_l);

struct IsotropicOutliers {
    std::vector<double> rho;
    /// Set for the multiplicative isotropic kind, which reuses the additive recipe.
    bool extrapolated = false;
};

/// All rho outside the support with omega(rho) = theta, where omega is the subordination
/// function of the spiked factor (nu on the A side, mu on the B side). The scan covers
/// 1024 points per gap and ray; the default range extends 10 (1 + |theta|) beyond the support.
[[nodiscard]] IsotropicOutliers isotropic_outliers(const DeformedModel& model, double theta,
                                                   SpikeSide side = SpikeSide::A,
                                                   std::optional<Interval> scan = std::nullopt,
                                                   const SolverConfig& cfg = {});

/// Additive isotropic shorthand: spike of nu in mu boxplus nu.
[[nodiscard]] std::vector<double> isotropic_outliers(const Measure& mu, const Measure& nu, double theta,
                                                     std::optional<Interval> scan = std::nullopt,
                                                     const SolverConfig& cfg = {});

/// Overlap 1 / omega'(rho) for an isotropic outlier rho of spike theta.
[[nodiscard]] double isotropic_overlap(const DeformedModel& model, double theta, double rho,
                                       SpikeSide side = SpikeSide::A, const SolverConfig& cfg = {});

struct SeparationMap {
    double phi_a = 0.0;
    double phi_b = 0.0;
    /// Eigenvalues of A_N above phi_b.
    std::size_t count_above = 0;
};

/// Exact separation for A_N of size n with spectrum (1 - r/n) nu plus the spikes, where nu is
/// atomic. Throws GapError if [a, b] meets the deterministic-equivalent support.
[[nodiscard]] SeparationMap separation_map(const SpikedDeformation& sd, std::size_t n, double a, double b,
                                           const SolverConfig& cfg = {});

}  // namespace freesub
