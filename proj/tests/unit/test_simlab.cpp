#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "freesub/errors.hpp"
#include "freesub/freeconv.hpp"
#include "freesub/simlab.hpp"

using namespace freesub;

namespace {

EnsembleSpec additive_spec(std::size_t n, double sigma, std::vector<Spike> spikes = {}, std::uint64_t seed = 7) {
    EnsembleSpec s;
    s.kind = ModelKind::Additive;
    s.n = n;
    s.sigma = sigma;
    s.spikes = std::move(spikes);
    s.bulk.assign(n - s.spike_rank(), 0.0);
    s.seed = seed;
    return s;
}

EnsembleSpec wishart_spec(std::size_t n, std::size_t p, std::vector<Spike> spikes = {}, std::uint64_t seed = 11) {
    EnsembleSpec s;
    s.kind = ModelKind::Multiplicative;
    s.n = n;
    s.p = p;
    s.spikes = std::move(spikes);
    s.bulk.assign(n - s.spike_rank(), 1.0);
    s.seed = seed;
    return s;
}

CMatrix from_real(std::initializer_list<std::initializer_list<double>> rows) {
    CMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
    Eigen::Index i = 0;
    for (const auto& r : rows) {
        Eigen::Index j = 0;
        for (double v : r) m(i, j++) = v;
        ++i;
    }
    return m;
}

}  // namespace

TEST_CASE("small eigendecompositions") {
    const auto d = hermitian_eig(from_real({{3, 0, 0}, {0, 1, 0}, {0, 0, 2}}));
    REQUIRE(d.values.size() == 3);
    CHECK(d.values[0] == doctest::Approx(3.0));
    CHECK(d.values[1] == doctest::Approx(2.0));
    CHECK(d.values[2] == doctest::Approx(1.0));
    CHECK(std::abs(d.vectors(0, 0)) == doctest::Approx(1.0));
    CHECK(std::abs(d.vectors(2, 1)) == doctest::Approx(1.0));
    CHECK(std::abs(d.vectors(1, 2)) == doctest::Approx(1.0));

    const auto s = hermitian_eig(from_real({{0, 1}, {1, 0}}));
    CHECK(s.values[0] == doctest::Approx(1.0));
    CHECK(s.values[1] == doctest::Approx(-1.0));
    const double h = std::sqrt(0.5);
    CHECK(std::abs(s.vectors(0, 0)) == doctest::Approx(h));
    CHECK(std::abs(s.vectors(0, 0) - s.vectors(1, 0)) < 1e-12);
    CHECK(std::abs(s.vectors(0, 1) + s.vectors(1, 1)) < 1e-12);

    const auto v = hermitian_eigvals(from_real({{3, 0, 0}, {0, 1, 0}, {0, 0, 2}}));
    CHECK(v == std::vector<double>{3.0, 2.0, 1.0});
    CHECK(hermitian_top_eigvals(from_real({{0, 1}, {1, 0}}), 1).at(0) == doctest::Approx(1.0));

    CMatrix bad = from_real({{0, 1}, {0, 0}});
    CHECK_THROWS_AS((void)hermitian_eig(bad), NotHermitian);
    CHECK_THROWS_AS((void)hermitian_eigvals(bad), NotHermitian);
    CHECK_THROWS_AS((void)hermitian_eig(CMatrix::Zero(2, 3)), ShapeError);
}

TEST_CASE("GUE eigensystem checks") {
    const auto m = build_deformed(additive_spec(128, 1.0));
    const auto es = hermitian_eig(m);
    CHECK(std::is_sorted(es.values.rbegin(), es.values.rend()));
    const double norm = std::max(std::abs(es.values.front()), std::abs(es.values.back()));
    for (Eigen::Index k = 0; k < m.rows(); ++k) {
        const double lambda = es.values[static_cast<std::size_t>(k)];
        CHECK((m * es.vectors.col(k) - lambda * es.vectors.col(k)).norm() <= 1e-8 * norm);
    }
    const double ortho = (es.vectors.adjoint() * es.vectors - CMatrix::Identity(m.rows(), m.cols())).cwiseAbs().maxCoeff();
    CHECK(ortho < 1e-10);
    const auto values = hermitian_eigvals(m);
    for (std::size_t k = 0; k < values.size(); ++k) CHECK(std::abs(values[k] - es.values[k]) < 1e-10);
}

TEST_CASE("ensemble validation") {
    auto s = additive_spec(8, 1.0);
    CHECK_NOTHROW(s.validate());
    CHECK_THROWS_AS(additive_spec(4, 1.0).validate(), ShapeError);
    CHECK_THROWS_AS(additive_spec(kMaxDenseSize + 1, 1.0).validate(), ShapeError);
    s.bulk.pop_back();
    CHECK_THROWS_AS(s.validate(), ShapeError);
    CHECK_THROWS_AS(wishart_spec(16, 8).validate(), ShapeError);
    auto w = wishart_spec(16, 32);
    w.bulk[0] = -1.0;
    CHECK_THROWS_AS(w.validate(), DomainError);
    CHECK_THROWS_AS(additive_spec(16, 0.0).validate(), DomainError);
    auto iso = additive_spec(16, 1.0);
    iso.kind = ModelKind::IsotropicAdditive;
    CHECK_THROWS_AS(iso.validate(), ShapeError);
    iso.b_spectrum.assign(16, 1.0);
    CHECK_NOTHROW(iso.validate());
    const auto spiked = additive_spec(16, 1.0, {{3.0, 2}, {2.0, 1}});
    CHECK(spiked.a_diagonal().at(0) == 3.0);
    CHECK(spiked.a_diagonal().at(2) == 2.0);
    CHECK(spiked.spike_coordinates(1) == std::vector<std::size_t>{2});
    CHECK_THROWS_AS((void)spiked.spike_coordinates(2), IndexError);
}

TEST_CASE("sampling normalization and reproducibility") {
    const auto gue = hermitian_top_eigvals(build_deformed(additive_spec(512, 1.0)), 1);
    CHECK(gue[0] > 1.8);
    CHECK(gue[0] < 2.2);

    const auto wish = hermitian_eigvals(build_deformed(wishart_spec(512, 2048)));
    CHECK(wish.front() == doctest::Approx(2.25).epsilon(0.05));
    CHECK(wish.back() == doctest::Approx(0.25).epsilon(0.2));

    auto rad = additive_spec(8, 1.0);
    rad.entries = EntryDist::Rademacher;
    const auto r = sample_matrix(rad);
    CHECK((r - r.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(r.trace().imag() == 0.0);
    CHECK(std::abs(std::abs(r(1, 0)) - std::sqrt(1.0 / 8.0)) < 1e-15);

    const auto spec = additive_spec(64, 1.0);
    CHECK(hermitian_eigvals(build_deformed(spec, 3)) == hermitian_eigvals(build_deformed(spec, 3)));
    CHECK(hermitian_eigvals(build_deformed(spec, 3)) != hermitian_eigvals(build_deformed(spec, 4)));
    auto other = spec;
    other.seed = spec.seed + 1;
    CHECK(hermitian_eigvals(build_deformed(spec)) != hermitian_eigvals(build_deformed(other)));
}

TEST_CASE("deformed constructions") {
    const auto add = additive_spec(16, 1.0);
    CHECK((build_deformed(add, 2) - sample_matrix(add, 2)).cwiseAbs().maxCoeff() == 0.0);

    const auto w = wishart_spec(16, 40);
    const CMatrix x = sample_matrix(w);
    CHECK((build_deformed(w) - x * x.adjoint() / 40.0).cwiseAbs().maxCoeff() < 1e-12);

    EnsembleSpec info;
    info.kind = ModelKind::InfoPlusNoise;
    info.n = 16;
    info.p = 64;
    info.sigma = 1.0;
    info.spikes = {{4.0, 1}};
    info.bulk.assign(15, 0.0);
    const auto eig = hermitian_eigvals(build_deformed(info));
    CHECK(eig.back() > -1e-12);
    CHECK(eig.front() > 2.0);
}

TEST_CASE("Haar unitaries") {
    auto rng = trial_stream(5, 0);
    const auto u = haar_unitary(64, rng);
    CHECK((u.adjoint() * u - CMatrix::Identity(64, 64)).cwiseAbs().maxCoeff() < 1e-12);

    EnsembleSpec iso;
    iso.kind = ModelKind::IsotropicAdditive;
    iso.n = 64;
    iso.bulk.assign(64, 0.0);
    for (std::size_t k = 0; k < 64; ++k) iso.b_spectrum.push_back(k < 40 ? 1.0 : -1.0);
    const auto eig = hermitian_eigvals(build_deformed(iso));
    CHECK(std::count_if(eig.begin(), eig.end(), [](double v) { return std::abs(v - 1.0) < 1e-10; }) == 40);
    CHECK(std::count_if(eig.begin(), eig.end(), [](double v) { return std::abs(v + 1.0) < 1e-10; }) == 24);

    // Mean |U_11|^2 of a Haar unitary is 1/n; the phase fix removes the QR bias.
    double mean = 0.0;
    for (int t = 0; t < 200; ++t) {
        auto r = trial_stream(9, static_cast<std::uint64_t>(t));
        mean += std::norm(haar_unitary(8, r)(0, 0));
    }
    CHECK(mean / 200.0 == doctest::Approx(1.0 / 8.0).epsilon(0.15));
}

TEST_CASE("empirical statistics") {
    const std::vector<double> a{0.1, 0.5, 0.9, 1.3};
    CHECK(ks_two_sample(a, a) == 0.0);
    CHECK(ks_two_sample(a, std::vector<double>{5.0, 6.0}) == 1.0);
    const auto same = empirical_stats(a, Measure::atomic({{0.1, 0.25}, {0.5, 0.25}, {0.9, 0.25}, {1.3, 0.25}}));
    CHECK(same.ks_distance == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(empirical_stats(a, Measure::dirac(10.0)).ks_distance == 1.0);
    const auto st = empirical_stats(a, Measure::semicircle(1.0), 4);
    CHECK(st.histogram.counts.size() == 4);
    CHECK(st.histogram.edges.size() == 5);
    std::size_t total = 0;
    for (auto c : st.histogram.counts) total += c;
    CHECK(total == 4);

    const auto samples = quantile_sample(Measure::semicircle(1.0), 400);
    CHECK(empirical_stats(samples, Measure::semicircle(1.0)).ks_distance <= 1.0 / 400.0 + 1e-9);
    const auto halves = quantile_sample(Measure::atomic({{-1.0, 0.5}, {1.0, 0.5}}), 10);
    CHECK(std::count(halves.begin(), halves.end(), -1.0) == 5);
}

TEST_CASE("overlaps and outlier extraction") {
    const auto es = hermitian_eig(from_real({{3, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}}));
    const std::vector<std::size_t> col{0};
    const std::vector<std::size_t> coords{0};
    CHECK(measure_overlaps(es.vectors, col, coords).at(0) == doctest::Approx(1.0));
    const std::vector<std::size_t> bad{7};
    CHECK_THROWS_AS((void)measure_overlaps(es.vectors, bad, coords), IndexError);
    CHECK_THROWS_AS((void)measure_overlaps(es.vectors, col, bad), IndexError);

    SupportDescription sup;
    sup.intervals = {{-2.0, 2.0, 1.0, true, true}};
    const std::vector<double> eigs{2.6, 2.03, 1.0, -2.2};
    CHECK(outlier_extract(eigs, sup) == std::vector<double>{2.6, -2.2});
    CHECK(outlier_extract(eigs, sup, 0.5) == std::vector<double>{2.6});
    CHECK_THROWS_AS((void)outlier_extract(eigs, sup, 0.0), DomainError);

    const std::vector<double> found{2.6, -2.2};
    const std::vector<double> pred{2.5, 2.55};
    const auto m = match_outliers(found, pred);
    CHECK(m[0].matched);
    CHECK(m[0].ambiguous);
    CHECK(m[0].nearest_prediction == 2.55);
    CHECK_FALSE(m[1].matched);
    const std::vector<double> one{2.5};
    CHECK_FALSE(match_outliers(found, one)[0].ambiguous);
}

TEST_CASE("small spiked covariance simulation") {
    const double c = 0.5;
    const auto spec = wishart_spec(400, 800, {{3.0, 1}}, 21);
    const auto model = DeformedModel::multiplicative(Measure::dirac(1.0), c);
    SimPrediction pred;
    pred.support = support_intervals(model);
    pred.spike_outliers = {{3.75}};
    pred.law = convolve_density(model, uniform_grid(0.0, 4.0, 801));
    const auto r = simulate(spec, pred);
    CHECK(r.eigenvalues.size() == 400);
    REQUIRE(r.outliers.size() == 1);
    CHECK(std::abs(r.outliers[0].value - 3.75) < 0.4);
    CHECK(r.outliers[0].nearest_prediction == 3.75);
    CHECK(r.outliers[0].matched == (r.outliers[0].gap <= 0.15));
    REQUIRE(r.overlaps.size() == 1);
    CHECK(r.overlaps[0].at(0) == doctest::Approx(0.7).epsilon(0.25));
    CHECK(r.ks_distance < 0.05);
    CHECK(r.wallclock > 0.0);

    const auto serial = run_trials(additive_spec(32, 1.0), {}, 4, 1);
    const auto threaded = run_trials(additive_spec(32, 1.0), {}, 4, 2);
    for (std::size_t t = 0; t < 4; ++t) CHECK(serial[t].eigenvalues == threaded[t].eigenvalues);
    CHECK(serial[0].eigenvalues != serial[1].eigenvalues);
}

TEST_CASE("fluctuation scan preconditions") {
    const auto family = [](std::size_t n) { return additive_spec(n, 1.0); };
    const std::vector<std::size_t> sizes{16, 32};
    const std::vector<std::size_t> one{16};
    CHECK_THROWS_AS((void)fluctuation_scan(family, sizes, 1), PreconditionError);
    CHECK_THROWS_AS((void)fluctuation_scan(family, one, 50), PreconditionError);
    const auto t = fluctuation_scan(family, sizes, 50);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0].stddev > t.rows[1].stddev);
    CHECK(t.exponent < 0.0);
}
