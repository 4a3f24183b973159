#include "freesub/simlab.hpp"

#include <cblas.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <thread>

#include "freesub/errors.hpp"

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace freesub {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kHermitianTol = 1e-10;
constexpr double kResidualTol = 1e-8;
constexpr double kOrthoTol = 1e-10;
constexpr int kProbes = 2;
constexpr std::uint64_t kProbeSeed = 0x9e3779b97f4a7c15ULL;

bool rectangular(ModelKind k) { return k == ModelKind::Multiplicative || k == ModelKind::InfoPlusNoise; }

lapack_int as_lapack(std::size_t n) { return static_cast<lapack_int>(n); }

/// Unit-variance complex entry.
class EntrySampler {
public:
    EntrySampler(EntryDist d, std::mt19937_64& rng) : dist_(d), rng_(rng) {}

    cplx complex() {
        if (dist_ == EntryDist::Gaussian) return {normal_(rng_), normal_(rng_)};
        return {sign() * std::numbers::sqrt2 / 2.0, sign() * std::numbers::sqrt2 / 2.0};
    }

    double real() { return dist_ == EntryDist::Gaussian ? std::numbers::sqrt2 * normal_(rng_) : sign(); }

private:
    double sign() { return (rng_() >> 63) != 0 ? 1.0 : -1.0; }

    EntryDist dist_;
    std::mt19937_64& rng_;
    std::normal_distribution<double> normal_{0.0, std::sqrt(0.5)};
};

CMatrix wigner(const EnsembleSpec& spec, std::mt19937_64& rng) {
    const auto n = static_cast<Eigen::Index>(spec.n);
    const double scale = spec.sigma / std::sqrt(static_cast<double>(spec.n));
    EntrySampler s(spec.entries, rng);
    CMatrix w(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        w(j, j) = scale * s.real();
        for (Eigen::Index i = j + 1; i < n; ++i) {
            w(i, j) = scale * s.complex();
            w(j, i) = std::conj(w(i, j));
        }
    }
    return w;
}

CMatrix entry_matrix(const EnsembleSpec& spec, std::mt19937_64& rng) {
    EntrySampler s(spec.entries, rng);
    CMatrix x(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.p));
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = s.complex();
    return x;
}

/// alpha X X^* with both triangles filled.
CMatrix gram(const CMatrix& x, double alpha) {
    const auto n = x.rows();
    CMatrix out = CMatrix::Zero(n, n);
    cblas_zherk(CblasColMajor, CblasLower, CblasNoTrans, static_cast<blasint>(n), static_cast<blasint>(x.cols()), alpha,
                x.data(), static_cast<blasint>(n), 0.0, out.data(), static_cast<blasint>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        out(j, j) = out(j, j).real();
        for (Eigen::Index i = j + 1; i < n; ++i) out(j, i) = std::conj(out(i, j));
    }
    return out;
}

/// U diag(b) U^*.
CMatrix rotate(const CMatrix& u, std::span<const double> b) {
    const auto n = u.rows();
    CMatrix ub = u;
    for (Eigen::Index j = 0; j < n; ++j) ub.col(j) *= b[static_cast<std::size_t>(j)];
    CMatrix out(n, n);
    const cplx one{1.0, 0.0};
    const cplx zero{0.0, 0.0};
    cblas_zgemm(CblasColMajor, CblasNoTrans, CblasConjTrans, static_cast<blasint>(n), static_cast<blasint>(n),
                static_cast<blasint>(n), &one, ub.data(), static_cast<blasint>(n), u.data(), static_cast<blasint>(n),
                &zero, out.data(), static_cast<blasint>(n));
    return (out + out.adjoint()) / 2.0;
}

/// D M D for D = diag(sqrt(a)).
void conjugate_by_sqrt(CMatrix& m, std::span<const double> a) {
    std::vector<double> r(a.size());
    std::transform(a.begin(), a.end(), r.begin(), [](double v) { return std::sqrt(v); });
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) *= r[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(j)];
}

void check_hermitian(const CMatrix& m) {
    if (m.rows() != m.cols()) throw ShapeError("matrix is not square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asym = (m - m.adjoint()).cwiseAbs().maxCoeff();
    if (!(asym <= kHermitianTol * scale)) throw NotHermitian("matrix is not Hermitian: asymmetry " + std::to_string(asym));
}

std::vector<double> descending(std::span<const double> ascending) { return {ascending.rbegin(), ascending.rend()}; }

/// Eigenvalue sum and sum of squares against the trace and Frobenius norm.
void check_invariants(const CMatrix& m, std::span<const double> values) {
    const double norm = std::max(1.0, std::max(std::abs(values.front()), std::abs(values.back())));
    const double n = static_cast<double>(values.size());
    const double trace = m.diagonal().real().sum();
    const double sum = std::accumulate(values.begin(), values.end(), 0.0);
    const double frob = m.squaredNorm();
    const double sq = std::transform_reduce(values.begin(), values.end(), 0.0, std::plus<>(), [](double v) { return v * v; });
    if (std::abs(sum - trace) > kResidualTol * norm * n || std::abs(sq - frob) > kResidualTol * norm * norm * n)
        throw EvaluationError("eigenvalues inconsistent with trace or Frobenius norm");
}

/// Random probes of M V - V diag(values) and V^* V - I.
void check_eigensystem(const CMatrix& m, const Eigensystem& es) {
    const auto n = m.rows();
    const double norm = std::max(1.0, std::max(std::abs(es.values.front()), std::abs(es.values.back())));
    const Eigen::Map<const Eigen::VectorXd> lambda(es.values.data(), n);
    std::mt19937_64 rng(kProbeSeed);
    std::normal_distribution<double> normal;
    for (int probe = 0; probe < kProbes; ++probe) {
        Eigen::VectorXcd x(n);
        for (Eigen::Index i = 0; i < n; ++i) x(i) = {normal(rng), normal(rng)};
        const double xn = x.norm();
        const Eigen::VectorXcd vx = es.vectors * x;
        const double residual = (m * vx - es.vectors * (lambda.cast<cplx>().cwiseProduct(x))).norm();
        const double ortho = (es.vectors.adjoint() * vx - x).norm();
        if (!(residual <= kResidualTol * norm * xn)) throw EvaluationError("eigenpair residual check failed");
        if (!(ortho <= kOrthoTol * xn)) throw EvaluationError("eigenvector orthonormality check failed");
    }
}

/// Index of the value closest to target among those not yet used.
std::size_t nearest_unused(std::span<const double> values, double target, std::vector<bool>& used) {
    std::size_t best = values.size();
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (used[i]) continue;
        const double d = std::abs(values[i] - target);
        if (d < dist) {
            dist = d;
            best = i;
        }
    }
    if (best < values.size()) used[best] = true;
    return best;
}

template <class F>
void parallel_for(std::size_t count, std::size_t threads, F&& body) {
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        body(i);
                    } catch (...) {
                        const std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next = count;
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

void EnsembleSpec::validate() const {
    if (n < 8) throw ShapeError("matrix size must be at least 8");
    if (n > kMaxDenseSize) throw ShapeError("matrix size exceeds the dense limit " + std::to_string(kMaxDenseSize));
    if (rectangular(kind)) {
        if (p < n) throw ShapeError("second dimension must be at least the matrix size");
        if (p > 4 * kMaxDenseSize) throw ShapeError("second dimension exceeds the dense limit");
    }
    if (spike_rank() + bulk.size() != n) throw ShapeError("spikes and bulk must list exactly n eigenvalues");
    const bool iso = kind == ModelKind::IsotropicAdditive || kind == ModelKind::IsotropicMultiplicative;
    if (iso && b_spectrum.size() != n) throw ShapeError("isotropic kinds need n eigenvalues for B");
    if (!iso && !b_spectrum.empty()) throw ShapeError("B spectrum given for an i.i.d. kind");
    for (const auto& s : spikes)
        if (s.multiplicity < 1) throw DomainError("spike multiplicity must be positive");
    const auto diag = a_diagonal();
    if (!std::all_of(diag.begin(), diag.end(), [](double v) { return std::isfinite(v); }) ||
        !std::all_of(b_spectrum.begin(), b_spectrum.end(), [](double v) { return std::isfinite(v); }))
        throw DomainError("eigenvalues must be finite");
    const bool positive = kind != ModelKind::Additive && kind != ModelKind::IsotropicAdditive;
    if (positive && std::any_of(diag.begin(), diag.end(), [](double v) { return v < 0.0; }))
        throw DomainError("eigenvalues of A must be nonnegative for this kind");
    if (kind == ModelKind::IsotropicMultiplicative &&
        std::any_of(b_spectrum.begin(), b_spectrum.end(), [](double v) { return v < 0.0; }))
        throw DomainError("eigenvalues of B must be nonnegative");
    if ((kind == ModelKind::Additive || kind == ModelKind::InfoPlusNoise) && !(sigma > 0.0 && std::isfinite(sigma)))
        throw DomainError("sigma must be positive");
}

std::vector<double> EnsembleSpec::a_diagonal() const {
    std::vector<double> d;
    d.reserve(spike_rank() + bulk.size());
    for (const auto& s : spikes) d.insert(d.end(), static_cast<std::size_t>(std::max(s.multiplicity, 0)), s.theta);
    d.insert(d.end(), bulk.begin(), bulk.end());
    return d;
}

std::vector<std::size_t> EnsembleSpec::spike_coordinates(std::size_t j) const {
    if (j >= spikes.size()) throw IndexError("spike index out of range");
    std::size_t offset = 0;
    for (std::size_t k = 0; k < j; ++k) offset += static_cast<std::size_t>(spikes[k].multiplicity);
    std::vector<std::size_t> out(static_cast<std::size_t>(spikes[j].multiplicity));
    std::iota(out.begin(), out.end(), offset);
    return out;
}

std::size_t EnsembleSpec::spike_rank() const {
    std::size_t r = 0;
    for (const auto& s : spikes) r += static_cast<std::size_t>(std::max(s.multiplicity, 0));
    return r;
}

std::vector<double> quantile_sample(const Measure& m, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k)
        out[k] = quantile(m, (static_cast<double>(k) + 0.5) / static_cast<double>(count));
    return out;
}

std::mt19937_64 trial_stream(std::uint64_t seed, std::uint64_t trial) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
    return std::mt19937_64(seq);
}

CMatrix haar_unitary(std::size_t n, std::mt19937_64& rng) {
    EntrySampler s(EntryDist::Gaussian, rng);
    const auto dim = static_cast<Eigen::Index>(n);
    CMatrix q(dim, dim);
    for (Eigen::Index k = 0; k < q.size(); ++k) q.data()[k] = s.complex();
    std::vector<cplx> tau(n);
    if (LAPACKE_zgeqrf(LAPACK_COL_MAJOR, as_lapack(n), as_lapack(n), q.data(), as_lapack(n), tau.data()) != 0)
        throw EvaluationError("QR factorization failed");
    std::vector<cplx> phase(n);
    for (Eigen::Index k = 0; k < dim; ++k) {
        const cplx r = q(k, k);
        phase[static_cast<std::size_t>(k)] = std::abs(r) > 0.0 ? r / std::abs(r) : cplx{1.0, 0.0};
    }
    if (LAPACKE_zungqr(LAPACK_COL_MAJOR, as_lapack(n), as_lapack(n), as_lapack(n), q.data(), as_lapack(n), tau.data()) != 0)
        throw EvaluationError("QR factor assembly failed");
    for (Eigen::Index k = 0; k < dim; ++k) q.col(k) *= phase[static_cast<std::size_t>(k)];
    return q;
}

CMatrix sample_matrix(const EnsembleSpec& spec, std::uint64_t trial) {
    spec.validate();
    auto rng = trial_stream(spec.seed, trial);
    switch (spec.kind) {
        case ModelKind::Additive:
            return wigner(spec, rng);
        case ModelKind::Multiplicative:
        case ModelKind::InfoPlusNoise:
            return entry_matrix(spec, rng);
        case ModelKind::IsotropicAdditive:
        case ModelKind::IsotropicMultiplicative:
            return haar_unitary(spec.n, rng);
    }
    throw DomainError("unknown model kind");
}

CMatrix build_deformed(const EnsembleSpec& spec, std::uint64_t trial) {
    const CMatrix r = sample_matrix(spec, trial);
    const auto a = spec.a_diagonal();
    const double p = static_cast<double>(spec.p);
    switch (spec.kind) {
        case ModelKind::Additive: {
            CMatrix m = r;
            for (std::size_t i = 0; i < a.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += a[i];
            return m;
        }
        case ModelKind::Multiplicative: {
            CMatrix m = gram(r, 1.0 / p);
            conjugate_by_sqrt(m, a);
            return m;
        }
        case ModelKind::InfoPlusNoise: {
            CMatrix y = (spec.sigma / std::sqrt(p)) * r;
            for (std::size_t i = 0; i < a.size(); ++i)
                y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += std::sqrt(a[i]);
            return gram(y, 1.0);
        }
        case ModelKind::IsotropicAdditive: {
            CMatrix m = rotate(r, spec.b_spectrum);
            for (std::size_t i = 0; i < a.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += a[i];
            return m;
        }
        case ModelKind::IsotropicMultiplicative: {
            CMatrix m = rotate(r, spec.b_spectrum);
            conjugate_by_sqrt(m, a);
            return m;
        }
    }
    throw DomainError("unknown model kind");
}

Eigensystem hermitian_eig(const CMatrix& m) {
    check_hermitian(m);
    const auto n = static_cast<std::size_t>(m.rows());
    if (n == 0) return {};
    CMatrix a = m;
    std::vector<double> w(n);
    CMatrix z(m.rows(), m.cols());
    std::vector<lapack_int> support(2 * n);
    lapack_int found = 0;
    const lapack_int info =
        LAPACKE_zheevr(LAPACK_COL_MAJOR, 'V', 'A', 'L', as_lapack(n), a.data(), as_lapack(n), 0.0, 0.0, 0, 0, 0.0, &found,
                       w.data(), z.data(), as_lapack(n), support.data());
    if (info != 0 || static_cast<std::size_t>(found) != n) throw EvaluationError("Hermitian eigensolver failed");
    Eigensystem es{descending(w), z.rowwise().reverse()};
    check_eigensystem(m, es);
    return es;
}

std::vector<double> hermitian_eigvals(const CMatrix& m) {
    check_hermitian(m);
    const auto n = static_cast<std::size_t>(m.rows());
    if (n == 0) return {};
    CMatrix a = m;
    std::vector<double> w(n);
    if (LAPACKE_zheevd_2stage(LAPACK_COL_MAJOR, 'N', 'L', as_lapack(n), a.data(), as_lapack(n), w.data()) != 0)
        throw EvaluationError("Hermitian eigensolver failed");
    check_invariants(m, w);
    return descending(w);
}

std::vector<double> hermitian_top_eigvals(const CMatrix& m, std::size_t k) {
    auto all = hermitian_eigvals(m);
    if (k > all.size()) throw IndexError("more eigenvalues requested than the matrix size");
    all.resize(k);
    return all;
}

EmpiricalStats empirical_stats(std::span<const double> eigs, const Measure& predicted, std::size_t bins) {
    EmpiricalStats out;
    if (eigs.empty()) return out;
    std::vector<double> sorted(eigs.begin(), eigs.end());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        const double x = sorted[i];
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == x) ++j;
        ks = std::max(ks, std::abs(cdf(predicted, x) - static_cast<double>(j) / n));
        ks = std::max(ks, std::abs(cdf_left(predicted, x) - static_cast<double>(i) / n));
        i = j;
    }
    if (const auto* g = predicted.as<GridDensityKind>()) {
        for (double x : g->grid) {
            const auto above = std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
            ks = std::max(ks, std::abs(cdf(predicted, x) - static_cast<double>(above) / n));
        }
    }
    out.ks_distance = std::min(ks, 1.0);

    bins = std::max<std::size_t>(bins, 1);
    double lo = sorted.front();
    double hi = sorted.back();
    if (hi <= lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    out.histogram.edges.resize(bins + 1);
    for (std::size_t k = 0; k <= bins; ++k)
        out.histogram.edges[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
    out.histogram.counts.assign(bins, 0);
    for (double x : sorted) {
        const auto k = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
        ++out.histogram.counts[std::min(k, bins - 1)];
    }
    return out;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw DomainError("empty sample");
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    double d = 0.0;
    for (const auto* s : {&x, &y}) {
        for (double t : *s) {
            const double fx = static_cast<double>(std::upper_bound(x.begin(), x.end(), t) - x.begin()) / static_cast<double>(x.size());
            const double fy = static_cast<double>(std::upper_bound(y.begin(), y.end(), t) - y.begin()) / static_cast<double>(y.size());
            d = std::max(d, std::abs(fx - fy));
        }
    }
    return d;
}

std::vector<double> measure_overlaps(const CMatrix& eigvectors, std::span<const std::size_t> columns,
                                     std::span<const std::size_t> coordinates) {
    const auto rows = static_cast<std::size_t>(eigvectors.rows());
    const auto cols = static_cast<std::size_t>(eigvectors.cols());
    for (std::size_t c : coordinates)
        if (c >= rows) throw IndexError("eigenspace coordinate out of range");
    std::vector<double> out;
    out.reserve(columns.size());
    for (std::size_t col : columns) {
        if (col >= cols) throw IndexError("eigenvector index out of range");
        double s = 0.0;
        for (std::size_t c : coordinates)
            s += std::norm(eigvectors(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(col)));
        out.push_back(std::clamp(s, 0.0, 1.0));
    }
    return out;
}

std::vector<double> outlier_extract(std::span<const double> eigs, const SupportDescription& support, double margin) {
    if (!(margin > 0.0)) throw DomainError("margin must be positive");
    std::vector<Interval> parts;
    for (const auto& iv : support.intervals) parts.push_back({iv.lo, iv.hi});
    if (support.atom_at_zero) parts.push_back({0.0, 0.0});
    std::vector<double> out;
    for (double x : eigs) {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& iv : parts) d = std::min(d, x < iv.lo ? iv.lo - x : (x > iv.hi ? x - iv.hi : 0.0));
        if (d > margin) out.push_back(x);
    }
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

std::vector<MatchedOutlier> match_outliers(std::span<const double> outliers, std::span<const double> predictions,
                                           double threshold) {
    std::vector<MatchedOutlier> out;
    std::vector<std::size_t> claimed;
    for (double x : outliers) {
        MatchedOutlier m{x, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity(), false, false};
        std::size_t best = predictions.size();
        int within = 0;
        for (std::size_t k = 0; k < predictions.size(); ++k) {
            const double gap = std::abs(x - predictions[k]);
            if (gap <= threshold) ++within;
            if (gap < m.gap) {
                m.gap = gap;
                m.nearest_prediction = predictions[k];
                best = k;
            }
        }
        m.matched = best < predictions.size() && m.gap <= threshold;
        m.ambiguous = within > 1;
        claimed.push_back(m.matched ? best : predictions.size());
        out.push_back(m);
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j < out.size(); ++j)
            if (i != j && out[i].matched && claimed[i] == claimed[j]) out[i].ambiguous = true;
    return out;
}

SimResult simulate(const EnsembleSpec& spec, const SimPrediction& prediction, std::uint64_t trial) {
    const auto start = Clock::now();
    if (!prediction.spike_outliers.empty() && prediction.spike_outliers.size() != spec.spikes.size())
        throw ShapeError("one outlier prediction list per spike is required");
    const CMatrix m = build_deformed(spec, trial);
    const bool need_vectors = std::any_of(prediction.spike_outliers.begin(), prediction.spike_outliers.end(),
                                          [](const auto& v) { return !v.empty(); });
    SimResult r;
    r.seed = spec.seed;
    r.trial = trial;
    if (need_vectors) {
        const auto es = hermitian_eig(m);
        r.eigenvalues = es.values;
        std::vector<bool> used(es.values.size(), false);
        for (std::size_t j = 0; j < spec.spikes.size(); ++j) {
            std::vector<std::size_t> cols;
            for (double rho : prediction.spike_outliers[j]) {
                const auto k = nearest_unused(es.values, rho, used);
                if (k < es.values.size()) cols.push_back(k);
            }
            const auto coords = spec.spike_coordinates(j);
            r.overlaps.push_back(measure_overlaps(es.vectors, cols, coords));
        }
    } else {
        r.eigenvalues = hermitian_eigvals(m);
    }
    if (prediction.law) r.ks_distance = empirical_stats(r.eigenvalues, *prediction.law).ks_distance;
    if (prediction.support) {
        std::vector<double> predicted;
        for (const auto& v : prediction.spike_outliers) predicted.insert(predicted.end(), v.begin(), v.end());
        const auto found = outlier_extract(r.eigenvalues, *prediction.support, prediction.margin);
        r.outliers = match_outliers(found, predicted);
    }
    r.wallclock = std::chrono::duration<double>(Clock::now() - start).count();
    return r;
}

std::vector<SimResult> run_trials(const EnsembleSpec& spec, const SimPrediction& prediction, std::size_t count,
                                  std::size_t threads) {
    spec.validate();
    std::vector<SimResult> out(count);
    parallel_for(count, threads, [&](std::size_t t) { out[t] = simulate(spec, prediction, t); });
    return out;
}

FluctuationTable fluctuation_scan(const std::function<EnsembleSpec(std::size_t)>& family,
                                  std::span<const std::size_t> sizes, std::size_t trials, std::size_t threads) {
    std::vector<std::size_t> distinct(sizes.begin(), sizes.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) throw PreconditionError("fluctuation scan needs at least two matrix sizes");
    if (trials < 50) throw PreconditionError("fluctuation scan needs at least 50 trials");
    FluctuationTable table;
    for (std::size_t n : sizes) {
        const EnsembleSpec spec = family(n);
        spec.validate();
        std::vector<double> top(trials);
        parallel_for(trials, threads, [&](std::size_t t) { top[t] = hermitian_top_eigvals(build_deformed(spec, t), 1)[0]; });
        const double mean = std::accumulate(top.begin(), top.end(), 0.0) / static_cast<double>(trials);
        double var = 0.0;
        for (double v : top) var += (v - mean) * (v - mean);
        table.rows.push_back({n, mean, std::sqrt(var / static_cast<double>(trials - 1))});
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& row : table.rows) {
        const double x = std::log(static_cast<double>(row.n));
        const double y = std::log(row.stddev);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double k = static_cast<double>(table.rows.size());
    table.exponent = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    return table;
}

}  // namespace freesub
