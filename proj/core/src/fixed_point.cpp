#include "fixed_point.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "freesub/errors.hpp"

namespace freesub::detail {

namespace {

constexpr int kStallWarmup = 50;
constexpr int kStallPatience = 25;
constexpr double kStallRatio = 0.9;
constexpr int kNewtonMaxIter = 60;
constexpr double kMinShrink = 0.05;
// Rounding in the map grows like |w|^3, so near a pole of the solution the
// iteration can stall far above tol. Transforms read off w move like 1/w^2
// there, so a step that has stopped shrinking for kFloorPatience rounds is
// accepted once it is below kNoiseFloor * |w|^2.
constexpr double kNoiseFloor = 1e-8;
constexpr int kFloorPatience = 2;

bool finite(cplx w) { return std::isfinite(w.real()) && std::isfinite(w.imag()); }

std::optional<MapValue> evaluate(const FixedPointProblem& p, cplx param, cplx w) {
    try {
        auto v = p.map(param, w);
        if (!finite(v.f) || !finite(v.df)) return std::nullopt;
        return v;
    } catch (const DomainError&) {
        return std::nullopt;
    } catch (const DivisionByZero&) {
        return std::nullopt;
    }
}

bool small_step(double step, cplx w, const SolverConfig& cfg) { return step <= cfg.tol * std::max(1.0, std::abs(w)); }

struct FloorTracker {
    double prev = std::numeric_limits<double>::infinity();
    int stuck = 0;

    bool reached(double step, cplx w) {
        stuck = step >= 0.5 * prev ? stuck + 1 : 0;
        prev = step;
        const double scale = std::max(1.0, std::abs(w));
        return stuck >= kFloorPatience && step <= kNoiseFloor * scale * scale;
    }
};

struct Engine {
    const FixedPointProblem& p;
    const SolverConfig& cfg;
    int iterations = 0;
    double last_residual = std::numeric_limits<double>::infinity();

    // max_iter bounds the map evaluations of one solve over all stages.
    bool exhausted() const { return iterations >= cfg.max_iter; }

    std::optional<cplx> newton(cplx param, cplx w, bool require_attracting) {
        FloorTracker stall;
        for (int k = 0; k < kNewtonMaxIter; ++k) {
            if (exhausted()) return std::nullopt;
            const auto v = evaluate(p, param, w);
            ++iterations;
            if (!v) return std::nullopt;
            const cplx F = v->f - w;
            const cplx d = v->df - 1.0;
            last_residual = std::abs(F);
            if (d == cplx(0.0, 0.0)) return std::nullopt;
            const cplx next = w - F / d;
            if (!finite(next)) return std::nullopt;
            if (small_step(std::abs(F), w, cfg) || stall.reached(std::abs(F), w)) {
                if (require_attracting && !(std::abs(v->df) < 1.0)) return std::nullopt;
                if (!p.admissible(param, next)) return std::nullopt;
                return next;
            }
            w = next;
        }
        return std::nullopt;
    }

    std::optional<cplx> picard(cplx param, cplx w, int budget) {
        double prev = std::numeric_limits<double>::infinity();
        int slow = 0;
        FloorTracker stall;
        for (int k = 0; k < budget; ++k) {
            if (exhausted()) return std::nullopt;
            const auto v = evaluate(p, param, w);
            ++iterations;
            if (!v) return std::nullopt;
            const cplx step = v->f - w;
            const double a = std::abs(step);
            last_residual = a;
            if (small_step(a, v->f, cfg) || stall.reached(a, v->f)) {
                cplx out = v->f;
                // Newton polish removes the 1/(1 - rate) bias of the Picard stopping rule.
                if (auto pol = newton(param, out, false)) out = *pol;
                if (!p.admissible(param, out)) return std::nullopt;
                return out;
            }
            w += cfg.damping * step;
            if (k >= kStallWarmup) {
                slow = (a > kStallRatio * prev) ? slow + 1 : 0;
                if (slow >= kStallPatience) return std::nullopt;
            }
            prev = a;
        }
        return std::nullopt;
    }

    [[noreturn]] void fail(const char* stage) const {
        throw NoConvergence(std::string(p.name) + ": no convergence (" + stage + ")", last_residual, iterations);
    }

    cplx continuation() {
        double y = std::max(p.y_top, p.y_target);
        cplx param = p.param_at(y);
        auto top = picard(param, p.start(param), cfg.max_iter);
        if (!top && exhausted()) fail("iteration budget");
        if (!top) top = newton(param, p.start(param), false);
        if (!top) fail("start of the continuation path");
        cplx w = *top;
        double shrink = 0.25;
        cplx prev_w = w;
        double prev_y = y;
        bool have_prev = false;
        while (y > p.y_target) {
            const double yn = std::max(p.y_target, y * shrink);
            const cplx pn = p.param_at(yn);
            // Linear predictor in y from the two previous accepted points.
            cplx guess = w;
            if (have_prev && prev_y > y) guess = w + (w - prev_w) * ((yn - y) / (y - prev_y));
            auto r = newton(pn, guess, false);
            if (!r && guess != w) r = newton(pn, w, false);
            if (r && p.admissible(pn, *r)) {
                prev_w = w;
                prev_y = y;
                have_prev = true;
                w = *r;
                y = yn;
                shrink = std::max(shrink * shrink, kMinShrink);
            } else {
                shrink = std::sqrt(shrink);
                if (shrink > 0.9999) fail("continuation step underflow");
            }
            if (exhausted()) fail("iteration budget");
        }
        return w;
    }
};

}  // namespace

FixedPointSolution solve_fixed_point(const FixedPointProblem& problem, const SolverConfig& cfg,
                                     std::optional<cplx> warm) {
    Engine e{problem, cfg};
    const cplx param = problem.param_at(problem.y_target);
    if (warm && finite(*warm)) {
        if (auto r = e.newton(param, *warm, true)) return {*r, e.iterations};
    }
    if (auto r = e.picard(param, problem.start(param), std::max(1, cfg.max_iter / 2))) return {*r, e.iterations};
    const cplx w = e.continuation();
    return {w, e.iterations};
}

}  // namespace freesub::detail
