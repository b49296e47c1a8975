#include <cmath>
#include <random>

#include <doctest.h>

#include "pathmpc/dynamics.hpp"

using namespace pathmpc::dynamics;

namespace {

VectorXd random_vec(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VectorXd v(n);
    for (int i = 0; i < n; ++i) {
        v(i) = u(rng);
    }
    return v;
}

// Fine-grid RK4 of the triple integrator driven by linearly interpolated jerk.
StateTriple rk4(const StateTriple& x0, const VectorXd& u0, const VectorXd& u1, double Ts, int steps) {
    const int n = x0.dof();
    VectorXd s = x0.stacked();
    const auto f = [&](double t, const VectorXd& y) {
        VectorXd d(3 * n);
        d.segment(0, n) = y.segment(n, n);
        d.segment(n, n) = y.segment(2 * n, n);
        d.segment(2 * n, n) = u0 + (u1 - u0) * (t / Ts);
        return d;
    };
    const double h = Ts / steps;
    for (int i = 0; i < steps; ++i) {
        const double t = i * h;
        const VectorXd k1 = f(t, s);
        const VectorXd k2 = f(t + h / 2, s + h / 2 * k1);
        const VectorXd k3 = f(t + h / 2, s + h / 2 * k2);
        const VectorXd k4 = f(t + h, s + h * k3);
        s += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return StateTriple::from_stacked(s);
}

}  // namespace

TEST_CASE("input matrices of the interpolated jerk integrator") {
    const double T = 0.1;
    const DiscreteLTI lti = discretize(T, 1);
    // Column values for one joint: u_k and u_{k+1} contributions.
    CHECK(lti.Gamma0(0, 0) == doctest::Approx(std::pow(T, 3) / 8.0));
    CHECK(lti.Gamma0(1, 0) == doctest::Approx(T * T / 3.0));
    CHECK(lti.Gamma0(2, 0) == doctest::Approx(T / 2.0));
    CHECK(lti.Gamma1(0, 0) == doctest::Approx(std::pow(T, 3) / 24.0));
    CHECK(lti.Gamma1(1, 0) == doctest::Approx(T * T / 6.0));
    CHECK(lti.Gamma1(2, 0) == doctest::Approx(T / 2.0));
    CHECK(lti.Phi(0, 1) == doctest::Approx(T));
    CHECK(lti.Phi(0, 2) == doctest::Approx(T * T / 2.0));
    CHECK(lti.Phi(1, 2) == doctest::Approx(T));
    CHECK(lti.Phi(2, 2) == 1.0);
}

TEST_CASE("discrete step matches fine integration") {
    std::mt19937 rng(5);
    const int n = 7;
    for (double Ts : {0.01, 0.1, 0.5}) {
        const DiscreteLTI lti = discretize(Ts, n);
        for (int trial = 0; trial < 20; ++trial) {
            StateTriple x{random_vec(rng, n), random_vec(rng, n), random_vec(rng, n)};
            const VectorXd u0 = random_vec(rng, n);
            const VectorXd u1 = random_vec(rng, n);
            const StateTriple a = step(lti, x, u0, u1);
            const StateTriple b = rk4(x, u0, u1, Ts, 200);
            CHECK((a.stacked() - b.stacked()).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
}

TEST_CASE("hat basis") {
    const double T = 0.1;
    CHECK(hat(0.0, 0.0, T) == 0.0);
    CHECK(hat(0.05, 0.0, T) == doctest::Approx(0.5));
    CHECK(hat(0.1, 0.0, T) == doctest::Approx(1.0));
    CHECK(hat(0.15, 0.0, T) == doctest::Approx(0.5));
    CHECK(hat(0.2, 0.0, T) == doctest::Approx(0.0));
    CHECK(hat(-0.01, 0.0, T) == 0.0);
    CHECK(hat(0.25, 0.0, T) == 0.0);
}

TEST_CASE("continuous evaluation agrees with stepping at the knots") {
    std::mt19937 rng(6);
    const int n = 3;
    const double Ts = 0.1;
    const DiscreteLTI lti = discretize(Ts, n);
    StateTriple x{random_vec(rng, n), random_vec(rng, n), random_vec(rng, n)};
    std::vector<VectorXd> knots;
    for (int k = 0; k < 5; ++k) {
        knots.push_back(random_vec(rng, n));
    }
    StateTriple s = x;
    for (int k = 0; k < 4; ++k) {
        s = step(lti, s, knots[static_cast<size_t>(k)], knots[static_cast<size_t>(k + 1)]);
        const StateTriple c = continuous_eval(x, knots, Ts, (k + 1) * Ts);
        CHECK((c.stacked() - s.stacked()).cwiseAbs().maxCoeff() < 1e-12);
    }
    const StateTriple mid = continuous_eval(x, knots, Ts, 0.137);
    const StateTriple ref = rk4(continuous_eval(x, knots, Ts, 0.1), knots[1], knots[1] + 0.37 * (knots[2] - knots[1]), 0.037, 200);
    CHECK((mid.stacked() - ref.stacked()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(continuous_eval(x, knots, Ts, 0.41), std::out_of_range);
    CHECK_THROWS_AS(continuous_eval(x, knots, Ts, -0.01), std::out_of_range);
}

TEST_CASE("state triple stacking round trip") {
    std::mt19937 rng(12);
    StateTriple x{random_vec(rng, 4), random_vec(rng, 4), random_vec(rng, 4)};
    const StateTriple y = StateTriple::from_stacked(x.stacked());
    CHECK(y.pos == x.pos);
    CHECK(y.vel == x.vel);
    CHECK(y.acc == x.acc);
    CHECK(StateTriple::zero(3).stacked().isZero(0.0));
}

TEST_CASE("scalar rollout reproduces repeated stepping") {
    std::mt19937 rng(13);
    const double Ts = 0.1;
    const int N = 8;
    const ScalarRollout roll(Ts, N);
    const DiscreteLTI lti = discretize(Ts, 1);
    const VectorXd s0 = random_vec(rng, 3);
    const VectorXd u = random_vec(rng, N + 1);
    StateTriple x = StateTriple::from_stacked(s0);
    for (int i = 0; i <= N; ++i) {
        Eigen::Vector3d pred = roll.free_response(i) * Eigen::Vector3d(s0);
        for (int k = 0; k <= N; ++k) {
            pred += roll.input_gain(i, k) * u(k);
        }
        CHECK((pred - x.stacked()).cwiseAbs().maxCoeff() < 1e-12);
        if (i < N) {
            x = step(lti, x, u.segment(i, 1), u.segment(i + 1, 1));
        }
    }
    CHECK(roll.input_gain(2, 5).isZero(0.0));
}
