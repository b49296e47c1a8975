#include <cmath>
#include <random>

#include <doctest.h>

#include "pathmpc/bounds.hpp"

using namespace pathmpc::bounds;

TEST_CASE("symmetric bump on the unit interval") {
    const BoundSegment s = fit_bound(0.0, 1.0, 0.0, 0.0, 0.05, 0.0, 0.0);
    const std::array<double, 5> expected{0.0, 0.0, 0.8, -1.6, 0.8};
    for (size_t i = 0; i < 5; ++i) {
        CHECK(s.coefficients[i] == doctest::Approx(expected[i]).scale(1.0).epsilon(1e-12));
    }
    CHECK(eval_bound(s, 0.5).upsilon == doctest::Approx(0.05));
    CHECK(eval_bound(s, 0.5).derivative == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("fitted quartic meets all five conditions") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int rejected = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const double a = 2.0 * u(rng);
        const double b = a + 0.05 + u(rng);
        const double eps0 = 0.01 * u(rng);
        const double eps1 = 0.01 * u(rng);
        const double ups = std::max(eps0, eps1) + 0.001 + 0.1 * u(rng);
        const double s0 = 0.5 * (u(rng) - 0.5);
        const double sf = 0.5 * (u(rng) - 0.5);
        BoundSegment s;
        try {
            s = fit_bound(a, b, s0, sf, ups, eps0, eps1);
        } catch (const BoundError&) {
            ++rejected;
            continue;
        }
        CHECK(std::abs(eval_bound(s, a).upsilon - eps0) < 1e-10);
        CHECK(std::abs(eval_bound(s, b).upsilon - eps1) < 1e-10);
        CHECK(std::abs(eval_bound(s, a).derivative - s0) < 1e-10);
        CHECK(std::abs(eval_bound(s, b).derivative - sf) < 1e-10);
        CHECK(std::abs(eval_bound(s, 0.5 * (a + b)).upsilon - ups) < 1e-10);
    }
    CHECK(rejected < 500);
}

TEST_CASE("steep slopes that drive the envelope negative are rejected") {
    CHECK_THROWS_AS(fit_bound(0.0, 1.0, -1.0, 1.0, 0.002, 0.001, 0.001), BoundError);
}

TEST_CASE("derivative agrees with a central difference") {
    const BoundSegment s = fit_bound(0.3, 0.9, 0.1, -0.1, 0.04, 0.002, 0.001);
    const double h = 1e-6;
    for (double phi = 0.31; phi < 0.89; phi += 0.05) {
        const double fd = (eval_bound(s, phi + h).upsilon - eval_bound(s, phi - h).upsilon) / (2 * h);
        CHECK(eval_bound(s, phi).derivative == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("bound evaluation checks its range") {
    const BoundSegment s = fit_bound(0.0, 1.0, 0.0, 0.0, 0.05, 0.0, 0.0);
    CHECK_NOTHROW(eval_bound(s, 1.0 + 1e-13));
    CHECK_THROWS_AS(eval_bound(s, 1.001), std::out_of_range);
    CHECK_THROWS_AS(eval_bound(s, -0.001), std::out_of_range);
    CHECK_NOTHROW(eval_polynomial(s, 1.5));
}

TEST_CASE("fit rejects invalid parameters") {
    CHECK_THROWS_AS(fit_bound(1.0, 1.0, 0, 0, 0.05, 0, 0), BoundError);
    CHECK_THROWS_AS(fit_bound(0.0, 1.0, 0, 0, 0.05, 0, 0, 0.5, 0.5), BoundError);
    CHECK_THROWS_AS(fit_bound(0.0, 1.0, 0, 0, 0.05, 0, 0, -0.3, 0.2), BoundError);
    CHECK_THROWS_AS(fit_bound(0.0, 1.0, 0, 0, -0.05, 0, 0), BoundError);
}

TEST_CASE("psi is nonpositive exactly on the admissible interval") {
    std::mt19937 rng(22);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        double el = u(rng);
        double eu = u(rng);
        if (std::abs(eu - el) < 1e-3) {
            continue;
        }
        if (el > eu) {
            std::swap(el, eu);
        }
        const double ups = 0.001 + 0.05 * std::abs(u(rng));
        for (int k = -200; k <= 200; ++k) {
            const double e = 0.005 * k * ups * 2.0;
            const double lo = el * ups;
            const double hi = eu * ups;
            const double margin = 1e-12;
            const double psi = psi_asymmetric(e, ups, eu, el);
            if (e < lo - margin || e > hi + margin) {
                CHECK(psi > 0.0);
            } else if (e > lo + margin && e < hi - margin) {
                CHECK(psi < 0.0);
            }
        }
    }
}

TEST_CASE("symmetric psi reduces to a squared difference") {
    for (double e : {-0.03, -0.01, 0.0, 0.02, 0.05}) {
        CHECK(psi_asymmetric(e, 0.04, 1.0, -1.0) == doctest::Approx(e * e - 0.04 * 0.04).scale(1.0).epsilon(1e-14));
    }
    // One-sided channel: [0, Y].
    CHECK(psi_asymmetric(0.0, 0.04, 1.0, 0.0) == doctest::Approx(0.0).scale(1.0));
    CHECK(psi_asymmetric(0.04, 0.04, 1.0, 0.0) == doctest::Approx(0.0).scale(1.0));
    CHECK(psi_asymmetric(0.02, 0.04, 1.0, 0.0) < 0.0);
    CHECK(psi_asymmetric(-0.001, 0.04, 1.0, 0.0) > 0.0);
}
