#pragma once

// Fixed-point engine shared by the subordination and deformed-model solvers.
//
// A problem is a family of maps w -> f_z(w) indexed by a parameter z that
// moves along a vertical path z(y). The solution at the target height is
// found by, in order:
//   1. Newton from a caller-supplied warm start (accepted only if the root
//      is admissible and attracting, |f'| < 1);
//   2. damped Picard iteration from the canonical start, with a stall
//      detector;
//   3. Newton continuation in y from a height where Picard contracts fast.

#include <complex>
#include <functional>
#include <optional>

#include "freesub/freeconv.hpp"

namespace freesub::detail {

struct MapValue {
    cplx f;
    cplx df;
};

struct FixedPointProblem {
    std::function<MapValue(cplx param, cplx w)> map;
    std::function<cplx(double y)> param_at;
    std::function<bool(cplx param, cplx w)> admissible;
    std::function<cplx(cplx param)> start;
    double y_target = 0.0;
    double y_top = 1.0;
    const char* name = "fixed point";
};

struct FixedPointSolution {
    cplx w;
    int iterations = 0;
};

FixedPointSolution solve_fixed_point(const FixedPointProblem& problem, const SolverConfig& cfg,
                                     std::optional<cplx> warm = std::nullopt);

/// Heights used to extrapolate boundary values to the real axis.
inline constexpr double kRichardsonHeights[3] = {1e-6, 1e-7, 1e-8};

/// Quadratic extrapolation to y = 0 of samples at kRichardsonHeights.
template <class T>
T richardson_limit(const T& v1, const T& v2, const T& v3) {
    const double y1 = kRichardsonHeights[0];
    const double y2 = kRichardsonHeights[1];
    const double y3 = kRichardsonHeights[2];
    const double w1 = y2 * y3 / ((y1 - y2) * (y1 - y3));
    const double w2 = y1 * y3 / ((y2 - y1) * (y2 - y3));
    const double w3 = y1 * y2 / ((y3 - y1) * (y3 - y2));
    return v1 * w1 + v2 * w2 + v3 * w3;
}

}  // namespace freesub::detail
