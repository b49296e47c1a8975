#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "pathmpc/lie.hpp"

using namespace pathmpc;
using lie::Mat3;
using lie::Vec3;

namespace {

constexpr double kPi = std::numbers::pi;

Vec3 random_vector(std::mt19937& rng, double max_norm) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
    return axis * max_norm * u(rng);
}

// Central difference of Log(Exp(tau) Exp(h d)) in h at 0.
Vec3 right_increment(const Vec3& tau, const Vec3& d) {
    const double h = 1e-6;
    const Vec3 plus = lie::log(Mat3(lie::exp(tau) * lie::exp(Vec3(h * d))));
    const Vec3 minus = lie::log(Mat3(lie::exp(tau) * lie::exp(Vec3(-h * d))));
    return (plus - minus) / (2.0 * h);
}

Vec3 left_increment(const Vec3& tau, const Vec3& d) {
    const double h = 1e-6;
    const Vec3 plus = lie::log(Mat3(lie::exp(Vec3(h * d)) * lie::exp(tau)));
    const Vec3 minus = lie::log(Mat3(lie::exp(Vec3(-h * d)) * lie::exp(tau)));
    return (plus - minus) / (2.0 * h);
}

}  // namespace

TEST_CASE("exp of a quarter turn about z") {
    const Mat3 r = lie::exp(Vec3(0.0, 0.0, kPi / 2.0));
    Mat3 expected;
    expected << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK((r - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("exp at zero and at tiny angles") {
    CHECK(lie::exp(Vec3::Zero()).isIdentity(0.0));
    const Vec3 tau(1e-10, -2e-10, 3e-10);
    const Mat3 r = lie::exp(tau);
    CHECK((r - (Mat3::Identity() + lie::skew(tau))).cwiseAbs().maxCoeff() < 1e-18);
    CHECK(lie::RotationMatrix(r).is_valid());
}

TEST_CASE("skew and unskew") {
    const Vec3 a(0.3, -1.2, 2.0);
    const Vec3 b(-0.7, 0.1, 0.4);
    CHECK((lie::skew(a) * b - a.cross(b)).norm() < 1e-15);
    CHECK((lie::unskew(lie::skew(a)) - a).norm() == 0.0);
}

TEST_CASE("log inverts exp on random rotations") {
    std::mt19937 rng(7);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Vec3 tau = random_vector(rng, kPi - 1e-3);
        worst = std::max(worst, (lie::log(lie::exp(tau)) - tau).norm());
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("exp inverts log") {
    std::mt19937 rng(8);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 r = lie::exp(random_vector(rng, kPi));
        CHECK((lie::exp(lie::log(r)) - r).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("log at a half turn") {
    const Vec3 axis = Vec3(1.0, 2.0, -2.0).normalized();
    const lie::LogResult res = lie::log_checked(lie::exp(Vec3(kPi * axis)));
    CHECK(res.near_pi);
    CHECK(res.tau.angle() == doctest::Approx(kPi).epsilon(1e-12));
    CHECK(std::abs(std::abs(res.tau.v.normalized().dot(axis)) - 1.0) < 1e-12);
    CHECK((lie::exp(res.tau.v) - lie::exp(Vec3(kPi * axis))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("log close to a half turn keeps the axis") {
    const Vec3 axis = Vec3(0.0, 1.0, 1.0).normalized();
    const double theta = kPi - 1e-4;
    const Vec3 back = lie::log(lie::exp(Vec3(theta * axis)));
    CHECK((back - theta * axis).norm() < 1e-8);
}

TEST_CASE("canonicalize wraps into [0, pi]") {
    const Vec3 axis = Vec3(0.0, 0.0, 1.0);
    const lie::RotationVector w = lie::canonicalize(lie::RotationVector(1.5 * kPi * axis));
    CHECK(w.angle() == doctest::Approx(0.5 * kPi));
    CHECK((w.v + 0.5 * kPi * axis).norm() < 1e-12);
    CHECK((lie::exp(w).m - lie::exp(Vec3(1.5 * kPi * axis))).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("inverse Jacobian coefficient approaches one twelfth") {
    CHECK(lie::inv_jacobian_coefficient(0.0) == doctest::Approx(1.0 / 12.0));
    // The series is accurate where the closed form cancels.
    CHECK(std::abs(lie::inv_jacobian_coefficient(1e-5) - (1.0 / 12.0 + 1e-10 / 720.0)) < 1e-15);
    // Continuity across the series switch.
    const double a = lie::inv_jacobian_coefficient(std::nextafter(lie::kJacobianSeriesAngle, 0.0));
    const double b = lie::inv_jacobian_coefficient(lie::kJacobianSeriesAngle);
    CHECK(std::abs(a - b) < 1e-13);
    // Closed form at 1 rad.
    const double t = 1.0;
    CHECK(lie::inv_jacobian_coefficient(t) ==
          doctest::Approx(1.0 / (t * t) - (1.0 + std::cos(t)) / (2.0 * t * std::sin(t))).epsilon(1e-14));
}

TEST_CASE("inverse Jacobians match finite differences of the log") {
    std::mt19937 rng(9);
    for (int i = 0; i < 200; ++i) {
        const Vec3 tau = random_vector(rng, 2.5);
        const Vec3 d = random_vector(rng, 1.0);
        const Vec3 fd_r = right_increment(tau, d);
        const Vec3 fd_l = left_increment(tau, d);
        CHECK((lie::inv_jacobian_right(tau) * d - fd_r).norm() < 1e-7 * (1.0 + fd_r.norm()));
        CHECK((lie::inv_jacobian_left(tau) * d - fd_l).norm() < 1e-7 * (1.0 + fd_l.norm()));
    }
}

TEST_CASE("right inverse Jacobian is the transpose of the left one") {
    std::mt19937 rng(10);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec3 tau = random_vector(rng, 3.0);
        worst = std::max(worst, (lie::inv_jacobian_right(tau) - lie::inv_jacobian_left(tau).transpose())
                                    .cwiseAbs()
                                    .maxCoeff());
        worst = std::max(worst, (lie::inv_jacobian_right(tau) - lie::inv_jacobian_left(-tau)).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("concatenation approximation converges quadratically") {
    std::mt19937 rng(11);
    for (int i = 0; i < 50; ++i) {
        const Vec3 tau2 = random_vector(rng, 2.0);
        const Vec3 d1 = random_vector(rng, 1.0).normalized();
        const Vec3 d3 = random_vector(rng, 1.0).normalized();
        const auto error = [&](double h) {
            const Vec3 exact = lie::log(Mat3(lie::exp(Vec3(h * d3)) * lie::exp(tau2) * lie::exp(Vec3(h * d1))));
            return (lie::concat_approx(h * d1, tau2, h * d3) - exact).norm();
        };
        const double e1 = error(0.02);
        const double e2 = error(0.01);
        CHECK(e1 / e2 >= 3.5);
    }
}

TEST_CASE("concatenation approximation is exact without perturbations") {
    const Vec3 tau2(0.3, -0.4, 1.1);
    CHECK((lie::concat_approx(Vec3::Zero(), tau2, Vec3::Zero()) - tau2).norm() < 1e-15);
}

TEST_CASE("rotation validity check") {
    CHECK(lie::RotationMatrix(lie::exp(Vec3(0.1, 0.2, 0.3))).is_valid());
    Mat3 bad = Mat3::Identity();
    bad(0, 0) = -1.0;
    CHECK_FALSE(lie::RotationMatrix(bad).is_valid());
    CHECK_FALSE(lie::RotationMatrix(2.0 * Mat3::Identity()).is_valid());
}
