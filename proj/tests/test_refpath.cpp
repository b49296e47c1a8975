#include <cmath>
#include <numbers>

#include <doctest.h>

#include "pathmpc/refpath.hpp"

using namespace pathmpc;
using refpath::PiecewisePath;
using refpath::Vec3;
using refpath::ViaPose;

namespace {

constexpr double kPi = std::numbers::pi;

ViaPose via(double x, double y, double z, double ox, double oy, double oz) {
    return ViaPose{Vec3(x, y, z), lie::RotationVector(Vec3(ox, oy, oz) * kPi)};
}

std::vector<ViaPose> study_vias() {
    return {via(0.43, 0.0, 0.92, 0.0, 0.5, 0.0), via(0.43, -0.2, 0.72, 0.0, 0.75, 0.0),
            via(0.53, -0.1, 0.72, -0.16, 0.636, 0.0), via(0.53, 0.0, 0.92, -0.2, 0.511, 0.0),
            via(0.43, 0.0, 0.92, 0.0, 0.5, 0.0)};
}

}  // namespace

TEST_CASE("two via poses give one straight segment") {
    const PiecewisePath p = PiecewisePath::build({via(0, 0, 0, 0, 0, 0), via(0.3, 0.4, 0, 0, 0, 0)});
    CHECK(p.segment_count() == 1);
    CHECK(p.length() == doctest::Approx(0.5));
    const auto s = p.eval_position(0.25);
    CHECK((s.point - Vec3(0.15, 0.2, 0.0)).norm() < 1e-15);
    CHECK((s.tangent - Vec3(0.6, 0.8, 0.0)).norm() < 1e-15);
    CHECK(p.eval_orientation_velocity(0.25).omega.isZero(0.0));
}

TEST_CASE("path length of the study path") {
    const PiecewisePath p = PiecewisePath::build(study_vias());
    const double expected = std::sqrt(0.08) + std::sqrt(0.02) + std::sqrt(0.05) + 0.1;
    CHECK(p.length() == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(p.length() - 0.747) < 1e-3);
    CHECK(p.segment_count() == 4);
}

TEST_CASE("cumulative arc length matches quadrature of the tangent") {
    const PiecewisePath p = PiecewisePath::build(study_vias());
    const int samples = 5000;
    double arc = 0.0;
    for (int l = 0; l < p.segment_count(); ++l) {
        const double a = p.via_phis()[static_cast<size_t>(l)];
        const double b = p.via_phis()[static_cast<size_t>(l + 1)];
        Vec3 prev = p.eval_position(a).point;
        for (int i = 1; i <= samples; ++i) {
            // Stay on segment l at its end point.
            const double phi = i == samples ? b : a + (b - a) * i / samples;
            const Vec3 cur = p.eval_position(phi).point;
            arc += (cur - prev).norm();
            prev = cur;
        }
    }
    CHECK(std::abs(arc - p.length()) < 1e-9);
}

TEST_CASE("path passes through its via poses") {
    const auto vias = study_vias();
    const PiecewisePath p = PiecewisePath::build(vias);
    for (size_t l = 0; l < vias.size(); ++l) {
        const double phi = p.via_phis()[l];
        CHECK((p.eval_position(phi).point - vias[l].position).norm() < 1e-12);
        CHECK((p.reference_rotation(phi) - lie::exp(vias[l].orientation.v)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("incoming segment is active at a via") {
    const PiecewisePath p = PiecewisePath::build(study_vias());
    CHECK(p.segment_index(0.0) == 0);
    CHECK(p.segment_index(p.via_phis()[1]) == 0);
    CHECK(p.segment_index(p.via_phis()[1] + 1e-9) == 1);
    CHECK(p.segment_index(p.length()) == 3);
}

TEST_CASE("evaluation outside the path clamps and flags") {
    const PiecewisePath p = PiecewisePath::build(study_vias());
    const auto before = p.eval_position(-0.1);
    CHECK(before.clamped);
    CHECK((before.point - study_vias().front().position).norm() < 1e-15);
    const auto after = p.eval_position(p.length() + 0.1);
    CHECK(after.clamped);
    CHECK((after.point - study_vias().back().position).norm() < 1e-12);
    CHECK(p.eval_orientation_velocity(p.length() + 0.1).clamped);
    CHECK_FALSE(p.eval_position(0.3).clamped);
}

TEST_CASE("quarter turn orientation segment") {
    const PiecewisePath p = PiecewisePath::build(
        {ViaPose{Vec3::Zero(), lie::RotationVector()}, ViaPose{Vec3(1.0, 0, 0), lie::RotationVector(Vec3(0, 0, kPi / 2))}});
    const Vec3 w = p.eval_orientation_velocity(0.5).omega;
    CHECK((w - Vec3(0, 0, kPi / 2)).norm() < 1e-12);
    CHECK((p.reference_rotation(0.5) - lie::exp(Vec3(0, 0, kPi / 4))).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((p.integrated_reference_rotation(1.0) - Vec3(0, 0, kPi / 2)).norm() < 1e-12);
    CHECK(p.integrated_reference_rotation(0.0).isZero(0.0));
}

TEST_CASE("orientation path rotates at constant rate between vias") {
    const PiecewisePath p = PiecewisePath::build(study_vias());
    for (int l = 0; l < p.segment_count(); ++l) {
        const auto& seg = p.orientation_segments()[static_cast<size_t>(l)];
        const double a = seg.phi_start + 0.2 * (seg.phi_end - seg.phi_start);
        const double b = seg.phi_start + 0.7 * (seg.phi_end - seg.phi_start);
        const Vec3 delta = lie::log(lie::Mat3(p.reference_rotation(b) * p.reference_rotation(a).transpose()));
        CHECK((delta - seg.omega * (b - a)).norm() < 1e-12);
    }
}

TEST_CASE("invalid via lists are rejected") {
    CHECK_THROWS_AS(PiecewisePath::build({via(0, 0, 0, 0, 0, 0)}), refpath::PathError);
    CHECK_THROWS_AS(PiecewisePath::build({via(0, 0, 0, 0, 0, 0), via(0, 0, 0, 0, 0, 0)}), refpath::PathError);
    CHECK_THROWS_AS(PiecewisePath::build({via(0, 0, 0, 0, 0, 0), via(0.1, 0, 0, 0, 0, 0.999999999)}),
                    refpath::PathError);
}
