#pragma once

#include <optional>
#include <vector>

#include "freesub/freeconv.hpp"
#include "freesub/measure.hpp"
#include "freesub/model.hpp"

namespace freesub {

/// A connected component of the limit law's support.
struct SupportInterval {
    double lo = 0.0;
    double hi = 0.0;
    double mass = 0.0;
    bool lo_regular = true;
    bool hi_regular = true;
};

/// Block [u, v] of R \ O whose image under phi is a support interval.
struct PreimageInterval {
    double u = 0.0;
    double v = 0.0;
};

struct SupportDescription {
    std::vector<SupportInterval> intervals;
    std::optional<double> atom_at_zero;
    /// One block per interval; empty for the isotropic kinds.
    std::vector<PreimageInterval> preimage_intervals;
    /// Set for information-plus-noise with c < 1 when the left-most edge is away from zero.
    bool leftmost_edge_unverified = false;

    [[nodiscard]] double total_mass() const noexcept;
};

/// Largest number of components of supp(nu) accepted by admissible_set and support_intervals.
inline constexpr int kMaxComponents = 16;

/// The real map phi of the model at u outside supp(nu). Isotropic kinds have no closed form
/// and raise DomainError.
[[nodiscard]] double phi(const DeformedModel& model, double u);
[[nodiscard]] double phi_prime(const DeformedModel& model, double u);

/// Open set O of points u outside supp(nu) where phi is increasing (and, for
/// information-plus-noise, 1 + c sigma^2 g_nu(u) > 0). Unbounded ends are infinite.
[[nodiscard]] std::vector<Interval> admissible_set(const DeformedModel& model);

/// Support of the limit law with masses and edge regularity.
[[nodiscard]] SupportDescription support_intervals(const DeformedModel& model, const SolverConfig& cfg = {});

/// Inverse of phi: maps x outside the support of the limit law into O.
[[nodiscard]] double varphi(const DeformedModel& model, double x, const SolverConfig& cfg = {});

/// Deterministic-equivalent support for an empirical atomic nu.
[[nodiscard]] SupportDescription mobile_edges(const DeformedModel& model);

}  // namespace freesub
