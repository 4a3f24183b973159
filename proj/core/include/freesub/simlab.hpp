#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "freesub/measure.hpp"
#include "freesub/model.hpp"
#include "freesub/spiked.hpp"
#include "freesub/support.hpp"

namespace freesub {

using CMatrix = Eigen::MatrixXcd;

enum class EntryDist { Gaussian, Rademacher };

/// Largest matrix size simulated densely.
inline constexpr std::size_t kMaxDenseSize = 4096;

/// One random matrix ensemble. The diagonal of A~ lists the spikes first (each repeated by
/// its multiplicity), then the bulk values, so spike eigenspaces are coordinate subspaces.
/// For InfoPlusNoise the values are eigenvalues of A A^* and A carries their square roots.
struct EnsembleSpec {
    ModelKind kind = ModelKind::Additive;
    std::size_t n = 0;
    /// Second dimension of the rectangular kinds; c = n / p.
    std::size_t p = 0;
    EntryDist entries = EntryDist::Gaussian;
    double sigma = 1.0;
    std::vector<double> bulk;
    std::vector<Spike> spikes;
    /// Spectrum of the Haar-rotated factor B for the isotropic kinds.
    std::vector<double> b_spectrum;
    std::uint64_t seed = 0;

    /// Throws ShapeError or DomainError on an inconsistent spec.
    void validate() const;
    /// Diagonal of A~: spikes first, then bulk.
    [[nodiscard]] std::vector<double> a_diagonal() const;
    /// Coordinates of the eigenspace of spike j.
    [[nodiscard]] std::vector<std::size_t> spike_coordinates(std::size_t j) const;
    /// Total spike multiplicity.
    [[nodiscard]] std::size_t spike_rank() const;
};

/// count deterministic samples of m at the midpoint quantiles (k + 1/2) / count, ascending.
[[nodiscard]] std::vector<double> quantile_sample(const Measure& m, std::size_t count);

/// Generator for trial t of a seed. Streams of distinct (seed, trial) pairs are independent
/// of evaluation order.
[[nodiscard]] std::mt19937_64 trial_stream(std::uint64_t seed, std::uint64_t trial);

/// The random factor of the ensemble: the Wigner matrix W (Additive), the n x p entry
/// matrix X with unit-variance entries (Multiplicative, InfoPlusNoise), or a Haar unitary
/// (isotropic kinds).
[[nodiscard]] CMatrix sample_matrix(const EnsembleSpec& spec, std::uint64_t trial = 0);

/// Haar-distributed n x n unitary.
[[nodiscard]] CMatrix haar_unitary(std::size_t n, std::mt19937_64& rng);

/// The deformed matrix M_N of the spec's kind.
[[nodiscard]] CMatrix build_deformed(const EnsembleSpec& spec, std::uint64_t trial = 0);

struct Eigensystem {
    /// Descending.
    std::vector<double> values;
    /// Column k belongs to values[k].
    CMatrix vectors;
};

/// Full eigendecomposition of a Hermitian matrix. Residuals and orthonormality are checked
/// with random probe vectors on every call.
[[nodiscard]] Eigensystem hermitian_eig(const CMatrix& m);

/// Eigenvalues only, descending.
[[nodiscard]] std::vector<double> hermitian_eigvals(const CMatrix& m);

/// Largest k eigenvalues, descending.
[[nodiscard]] std::vector<double> hermitian_top_eigvals(const CMatrix& m, std::size_t k);

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
};

struct EmpiricalStats {
    double ks_distance = 0.0;
    Histogram histogram;
};

/// Kolmogorov distance between the empirical law of eigs and the predicted law, over the
/// eigenvalues and, for grid densities, the grid points.
[[nodiscard]] EmpiricalStats empirical_stats(std::span<const double> eigs, const Measure& predicted,
                                             std::size_t bins = 64);

/// Kolmogorov distance between two empirical laws.
[[nodiscard]] double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Squared norms of the projections of the selected eigenvectors onto a coordinate subspace.
[[nodiscard]] std::vector<double> measure_overlaps(const CMatrix& eigvectors, std::span<const std::size_t> columns,
                                                   std::span<const std::size_t> coordinates);

/// Eigenvalues farther than margin from every support interval, descending.
[[nodiscard]] std::vector<double> outlier_extract(std::span<const double> eigs, const SupportDescription& support,
                                                  double margin = 0.05);

struct MatchedOutlier {
    double value = 0.0;
    /// Nearest predicted location; NaN when there are no predictions.
    double nearest_prediction = 0.0;
    double gap = 0.0;
    /// The gap is within the threshold.
    bool matched = false;
    /// Several predictions lie within the threshold, or another outlier claims the same one.
    bool ambiguous = false;
};

/// Nearest-prediction matching with the given gap threshold.
[[nodiscard]] std::vector<MatchedOutlier> match_outliers(std::span<const double> outliers,
                                                         std::span<const double> predictions,
                                                         double threshold = 0.15);

/// What a simulation is compared against.
struct SimPrediction {
    std::optional<Measure> law;
    std::optional<SupportDescription> support;
    /// Predicted outlier locations per spike of the spec; empty when the spike sticks.
    std::vector<std::vector<double>> spike_outliers;
    double margin = 0.05;
};

struct SimResult {
    /// Descending.
    std::vector<double> eigenvalues;
    std::vector<MatchedOutlier> outliers;
    /// Per spike with a predicted outlier: projection of the eigenvector closest to each
    /// predicted location onto the spike eigenspace.
    std::vector<std::vector<double>> overlaps;
    double ks_distance = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
    double wallclock = 0.0;
};

[[nodiscard]] SimResult simulate(const EnsembleSpec& spec, const SimPrediction& prediction = {},
                                 std::uint64_t trial = 0);

/// Trials 0..count-1 of the spec on up to threads workers; results are in trial order.
[[nodiscard]] std::vector<SimResult> run_trials(const EnsembleSpec& spec, const SimPrediction& prediction,
                                                std::size_t count, std::size_t threads = 1);

struct FluctuationRow {
    std::size_t n = 0;
    double mean = 0.0;
    double stddev = 0.0;
};

struct FluctuationTable {
    std::vector<FluctuationRow> rows;
    /// Slope of log std against log n.
    double exponent = 0.0;
};

/// Mean and spread of the largest eigenvalue over trials for each n of a family of specs.
/// Needs at least two distinct sizes and 50 trials; throws PreconditionError otherwise.
[[nodiscard]] FluctuationTable fluctuation_scan(const std::function<EnsembleSpec(std::size_t)>& family,
                                                std::span<const std::size_t> sizes, std::size_t trials,
                                                std::size_t threads = 1);

}  // namespace freesub
