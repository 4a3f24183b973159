#include <doctest.h>

#include <cmath>
#include <random>

#include "freesub/errors.hpp"
#include "freesub/freeconv.hpp"

using namespace freesub;

namespace {

Measure bernoulli() { return Measure::atomic({{-1.0, 0.5}, {1.0, 0.5}}); }

Measure random_atomic(std::mt19937_64& rng, double lo, double hi, int max_atoms = 4) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::uniform_real_distribution<double> w(0.1, 1.0);
    std::uniform_int_distribution<int> count(1, max_atoms);
    const int n = count(rng);
    std::vector<Atom> atoms;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        atoms.push_back({u(rng), w(rng)});
        total += atoms.back().weight;
    }
    for (auto& a : atoms) a.weight /= total;
    return Measure::atomic(atoms);
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
    return v;
}

}  // namespace

TEST_CASE("additive subordination with a point mass is a translation") {
    const auto mu = Measure::semicircle(0.8);
    const double a = 0.7;
    const cplx z(0.2, 0.3);
    const auto r = additive_subordination(mu, Measure::dirac(a), z);
    CHECK(std::abs(r.omega1 - (z - a)) < 1e-12);
    CHECK(std::abs(r.g - stieltjes(mu, z - a)) < 1e-12);
    CHECK(std::abs(r.omega2 - (j_transform(mu, z - a) - (z - a) + z)) < 1e-12);
    CHECK(r.residual < 1e-12);
}

TEST_CASE("translation survives the pole of the subordination function") {
    // Zeros of the shifted Cauchy transform send omega1 to infinity along the axis.
    const auto nu = Measure::atomic({{-0.79258354628765493, 0.2227624049631749},
                                     {-0.4739061411521186, 0.34771175840611446},
                                     {0.50032621240988173, 0.20997283222252164},
                                     {0.91607137815819395, 0.21955300440818895}});
    const double a = -0.698553542593911;
    const auto mu = Measure::dirac(a);
    for (const double x : {-0.57383339966527536, -0.57798102751833302, 0.046882386048067382}) {
        const cplx z(x, 1e-6);
        const auto r = additive_subordination(mu, nu, z);
        const cplx expect = stieltjes(nu, z - a);
        CHECK(std::abs(r.g - expect) < 1e-8 * std::max(1.0, std::abs(expect)));
    }
    const auto law = convolve_density(DeformedModel::isotropic_additive(mu, nu), uniform_grid(-2.0, 1.0, 64001));
    const auto k = free_cumulant_oracle(law, 4);
    const auto kn = free_cumulant_oracle(nu, 4);
    CHECK(std::abs(k[0] - (kn[0] + a)) < 1e-4);
    for (std::size_t i = 1; i < 4; ++i) CHECK(std::abs(k[i] - kn[i]) < 1e-4);
}

TEST_CASE("semicircle stability and arcsine law") {
    const auto s1 = Measure::semicircle(1.0);
    const auto s2 = Measure::semicircle(0.5);
    const auto s12 = Measure::semicircle(std::sqrt(1.25));
    for (double x : linspace(-3.0, 3.0, 31)) {
        for (double y : {1e-3, 0.1, 2.0}) {
            const cplx z(x, y);
            CHECK(std::abs(additive_subordination(s1, s2, z).g - stieltjes(s12, z)) < 1e-10);
        }
    }
    const cplx z(0.0, 2.0);
    const auto r = additive_subordination(bernoulli(), bernoulli(), z);
    CHECK(std::abs(r.g - 1.0 / (std::sqrt(z - 2.0) * std::sqrt(z + 2.0))) < 1e-10);
}

TEST_CASE("subordination residual and half-plane invariants on random triples") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ux(-4.0, 4.0);
    std::uniform_real_distribution<double> ly(-4.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto mu = random_atomic(rng, -2.0, 2.0);
        const auto nu = random_atomic(rng, -2.0, 2.0);
        const cplx z(ux(rng), std::pow(10.0, ly(rng)));
        const auto r = additive_subordination(mu, nu, z);
        CHECK(r.residual < 1e-10);
        CHECK(r.omega1.imag() >= z.imag() * (1.0 - 1e-9));
        CHECK(r.omega2.imag() >= z.imag() * (1.0 - 1e-9));
        CHECK(r.g.imag() < 0.0);
        CHECK(std::abs(stieltjes(nu, r.omega2) - r.g) < 1e-9 * (1.0 + std::abs(r.g)));
        const auto rc = additive_subordination(nu, mu, z);
        CHECK(std::abs(rc.g - r.g) < 1e-10);
    }
}

TEST_CASE("damping does not change the answer") {
    const auto mu = Measure::atomic({{-1.0, 0.3}, {0.5, 0.7}});
    const auto nu = Measure::semicircle(0.6);
    SolverConfig half;
    half.damping = 0.5;
    for (double x : {-2.0, -0.3, 0.4, 2.5}) {
        const cplx z(x, 0.05);
        CHECK(std::abs(additive_subordination(mu, nu, z).g - additive_subordination(mu, nu, z, half).g) < 1e-12);
        CHECK(std::abs(deformed_wigner_g(mu, 0.6, z) - deformed_wigner_g(mu, 0.6, z, half)) < 1e-12);
    }
}

TEST_CASE("multiplicative subordination trivial cases and commutativity") {
    const auto mp = Measure::marchenko_pastur(0.4);
    const cplx z(-0.3, -0.2);
    const auto r = multiplicative_subordination(mp, Measure::dirac(1.0), z);
    CHECK(std::abs(r.f1 - z) < 1e-12);
    CHECK(std::abs(r.psi - psi_eta(mp, z).psi) < 1e-12);

    const auto rd = multiplicative_subordination(Measure::dirac(2.0), Measure::dirac(1.5), z);
    CHECK(std::abs(rd.psi - psi_eta(Measure::dirac(3.0), z).psi) < 1e-12);

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const auto mu = random_atomic(rng, 0.2, 3.0);
        const auto nu = random_atomic(rng, 0.2, 3.0);
        std::uniform_real_distribution<double> u(0.05, 8.0);
        const cplx zeta(u(rng), 0.01 + 0.2 * u(rng));
        const auto a = multiplicative_subordination(mu, nu, 1.0 / zeta);
        const auto b = multiplicative_subordination(nu, mu, 1.0 / zeta);
        CHECK(a.residual < 1e-10);
        CHECK(std::abs(a.psi - b.psi) < 1e-10 * (1.0 + std::abs(a.psi)));
    }
    CHECK_THROWS_AS((void)multiplicative_subordination(mp, Measure::dirac(0.0), z), DomainError);
    CHECK_THROWS_AS((void)multiplicative_subordination(mp, mp, 2.0), DomainError);
}

TEST_CASE("deformed Wigner equation") {
    const auto sc = Measure::semicircle(1.3);
    const double theta = 1.7;
    for (double x : linspace(-4.0, 4.0, 41)) {
        const cplx z(x, 0.02);
        CHECK(std::abs(deformed_wigner_g(Measure::dirac(0.0), 1.3, z) - stieltjes(sc, z)) < 1e-10);
        CHECK(std::abs(deformed_wigner_g(Measure::dirac(theta), 1.3, z) - stieltjes(sc, z - theta)) < 1e-10);
    }
    // Same law through the general subordination solver.
    const auto nu = Measure::atomic({{-1.0, 0.5}, {1.0, 0.5}});
    for (double x : linspace(-2.5, 2.5, 21)) {
        const cplx z(x, 1e-4);
        CHECK(std::abs(deformed_wigner_g(nu, 0.5, z) - additive_subordination(Measure::semicircle(0.5), nu, z).g) <
              1e-9);
    }
}

TEST_CASE("sample covariance equation") {
    for (double c : {0.25, 0.5, 1.0}) {
        const auto mp = Measure::marchenko_pastur(c);
        const double pi_ = 2.5;
        for (double x : linspace(-0.5, 10.0, 41)) {
            const cplx z(x, 0.01);
            CHECK(std::abs(sample_cov_g(Measure::dirac(1.0), c, z) - stieltjes(mp, z)) < 1e-10);
            // Rescaled law: g(z) = g_MP(z/pi)/pi.
            CHECK(std::abs(sample_cov_g(Measure::dirac(pi_), c, z) - stieltjes(mp, z / pi_) / pi_) < 1e-10);
        }
    }
}

TEST_CASE("route equivalence between sample covariance and multiplicative subordination") {
    const auto nu = Measure::atomic({{1.0, 0.9}, {3.0, 0.1}});
    const auto mp = Measure::marchenko_pastur(0.5);
    for (double x : linspace(0.05, 8.0, 40)) {
        for (double y : {1e-3, 0.1, 1.0}) {
            const cplx z(x, y);
            const auto r = multiplicative_subordination(mp, nu, 1.0 / z);
            const cplx g_mult = (r.psi + 1.0) / z;
            CHECK(std::abs(sample_cov_g(nu, 0.5, z) - g_mult) < 1e-9);
        }
    }
}

TEST_CASE("information-plus-noise equation") {
    const auto mp = Measure::marchenko_pastur(0.25);
    for (double x : linspace(-0.5, 4.0, 31)) {
        const cplx z(x, 0.01);
        // nu = delta_0 gives the sigma^2-scaled MP law.
        CHECK(std::abs(info_noise_g(Measure::dirac(0.0), 0.25, 1.0, z) - stieltjes(mp, z)) < 1e-10);
        CHECK(std::abs(info_noise_g(Measure::dirac(0.0), 0.25, 2.0, z) - stieltjes(mp, z / 4.0) / 4.0) < 1e-10);
        CHECK(std::abs(info_noise_g(Measure::dirac(0.0), 1.0, 1.0, z) -
                       stieltjes(Measure::marchenko_pastur(1.0), z)) < 1e-10);
    }
    // Omega(1/x) recovers the subordination-side point x(1 - c s^2 g)^2 - (1-c)s^2(1 - c s^2 g).
    const auto nu = Measure::atomic({{1.0, 0.5}, {4.0, 0.5}});
    const double x = 9.0;
    const cplx g = info_noise_g(nu, 0.5, 1.0, x);
    const cplx q = 1.0 - 0.5 * g;
    const cplx om = info_noise_omega(nu, 0.5, 1.0, 1.0 / x);
    CHECK(std::abs(1.0 / om - (x * q * q - 0.5 * q)) < 1e-10);
}

TEST_CASE("real-axis evaluation by extrapolation") {
    const auto sc = Measure::semicircle(1.0);
    for (double x : {-3.5, -2.2, 2.05, 3.0}) {
        CHECK(std::abs(deformed_wigner_g(Measure::dirac(0.0), 1.0, x) - stieltjes(sc, x)) < 1e-9);
        CHECK(std::abs(additive_subordination(Measure::semicircle(0.6), Measure::semicircle(0.8), x).g -
                       stieltjes(sc, x)) < 1e-9);
    }
}

TEST_CASE("NoConvergence is explicit") {
    SolverConfig impossible;
    impossible.tol = 1e-300;
    impossible.max_iter = 5;
    CHECK_THROWS_AS((void)deformed_wigner_g(bernoulli(), 0.5, {0.1, 1e-3}, impossible), NoConvergence);
    SolverConfig bad;
    bad.damping = 0.0;
    CHECK_THROWS_AS((void)deformed_wigner_g(bernoulli(), 0.5, {0.1, 1e-3}, bad), DomainError);
}

TEST_CASE("convolve_density reproduces closed-form laws") {
    const auto grid = linspace(-2.5, 2.5, 4001);
    const auto m = convolve_density(DeformedModel::additive(Measure::dirac(0.0), 1.0), grid);
    CHECK(moments(m, 0) == doctest::Approx(1.0).epsilon(2e-3));
    CHECK(moments(m, 2) == doctest::Approx(1.0).epsilon(1e-3));
    const auto* gd = m.as<GridDensityKind>();
    REQUIRE(gd != nullptr);
    for (std::size_t i = 0; i < grid.size(); i += 97) {
        const double x = grid[i];
        const double exact = std::abs(x) < 2.0 ? std::sqrt(4.0 - x * x) / (2.0 * M_PI) : 0.0;
        if (std::abs(std::abs(x) - 2.0) > 1e-3) CHECK(std::abs(gd->values[i] - exact) < 1e-4);
    }

    const auto g2 = linspace(0.0, 2.5, 4001);
    const auto mp = convolve_density(DeformedModel::multiplicative(Measure::dirac(1.0), 0.25), g2);
    CHECK(mp.support_lo() == doctest::Approx(0.25).epsilon(2e-3));
    CHECK(mp.support_hi() == doctest::Approx(2.25).epsilon(2e-3));

    // Isotropic: Bernoulli boxplus semicircle has mean 0 and symmetric density.
    const auto g3 = linspace(-3.0, 3.0, 6001);
    const auto iso =
        convolve_density(DeformedModel::isotropic_additive(bernoulli(), Measure::semicircle(0.5)), g3);
    CHECK(std::abs(moments(iso, 1)) < 1e-6);
    const auto* gi = iso.as<GridDensityKind>();
    for (std::size_t i = 0; i < g3.size() / 2; i += 50) CHECK(gi->values[i] == doctest::Approx(gi->values[g3.size() - 1 - i]).epsilon(1e-8));

    // An atom at zero in nu is carried as an atom of the sample covariance law.
    const auto nu0 = Measure::atomic({{0.0, 0.3}, {1.0, 0.7}});
    const auto m0 = convolve_density(DeformedModel::multiplicative(nu0, 0.5), linspace(-0.5, 4.0, 9001));
    CHECK(m0.atom_mass(0.0) == doctest::Approx(0.3));
    CHECK(moments(m0, 0) == doctest::Approx(1.0).epsilon(2e-3));

    CHECK_THROWS_AS((void)convolve_density(DeformedModel::additive(Measure::dirac(0.0), 1.0), linspace(-1.0, 1.0, 200)),
                    EvaluationError);
}

TEST_CASE("free cumulants") {
    const auto k = free_cumulant_oracle(Measure::semicircle(1.5), 4);
    CHECK(std::abs(k[0]) < 1e-14);
    CHECK(k[1] == doctest::Approx(2.25).epsilon(1e-14));
    CHECK(std::abs(k[2]) < 1e-13);
    CHECK(std::abs(k[3]) < 1e-12);
    const auto d = free_cumulant_oracle(Measure::dirac(0.7), 4);
    CHECK(d[0] == doctest::Approx(0.7));
    for (int i = 1; i < 4; ++i) CHECK(std::abs(d[static_cast<std::size_t>(i)]) < 1e-14);
    const double c = 0.3;
    const auto km = free_cumulant_oracle(Measure::marchenko_pastur(c), 6);
    for (int n = 1; n <= 6; ++n) CHECK(km[static_cast<std::size_t>(n - 1)] == doctest::Approx(std::pow(c, n - 1)).epsilon(1e-12));
    // Bernoulli: kappa_2 = 1, kappa_4 = -1.
    const auto kb = free_cumulant_oracle(bernoulli(), 4);
    CHECK(kb[1] == doctest::Approx(1.0));
    CHECK(kb[3] == doctest::Approx(-1.0));
    CHECK_THROWS_AS((void)free_cumulant_oracle(bernoulli(), 9), RangeError);
}
