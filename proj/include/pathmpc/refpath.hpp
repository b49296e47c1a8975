#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pathmpc/lie.hpp"

namespace pathmpc::refpath {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct ViaPose {
    Vec3 position = Vec3::Zero();
    lie::RotationVector orientation;  // radians
};

struct PositionSegment {
    Vec3 slope = Vec3::UnitX();  // unit length
    Vec3 base = Vec3::Zero();
    double phi_start = 0.0;
    double phi_end = 0.0;
};

struct OrientationSegment {
    Vec3 omega = Vec3::Zero();  // rad per meter of path parameter
    Mat3 rotation_start = Mat3::Identity();
    double phi_start = 0.0;
    double phi_end = 0.0;
};

class PathError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct PositionSample {
    Vec3 point = Vec3::Zero();
    Vec3 tangent = Vec3::UnitX();
    int segment = 0;
    bool clamped = false;
};

struct OrientationVelocitySample {
    Vec3 omega = Vec3::Zero();
    int segment = 0;
    bool clamped = false;
};

/// Piecewise linear position path and piecewise constant angular velocity
/// orientation path over one arc-length parameter phi in [0, phi_f].
///
/// At a via-point phi_l the incoming segment l-1 is active (phi_0 belongs to
/// segment 0).
class PiecewisePath {
public:
    /// Cumulative arc-length parametrization through the via poses.
    static PiecewisePath build(const std::vector<ViaPose>& via_poses);

    int segment_count() const { return static_cast<int>(position_.size()); }
    double length() const { return via_phis_.back(); }
    const std::vector<double>& via_phis() const { return via_phis_; }
    const std::vector<ViaPose>& via_poses() const { return via_poses_; }
    const std::vector<PositionSegment>& position_segments() const { return position_; }
    const std::vector<OrientationSegment>& orientation_segments() const { return orientation_; }

    int segment_index(double phi) const;

    PositionSample eval_position(double phi) const;
    OrientationVelocitySample eval_orientation_velocity(double phi) const;

    /// R_r(phi) = Exp(omega_l (phi - phi_l)) R_l.
    Mat3 reference_rotation(double phi) const;

    /// Sum of omega_l * (segment length) over completed segments plus the
    /// partial current segment. Zero at phi = 0.
    Vec3 integrated_reference_rotation(double phi) const;

private:
    double clamp(double phi, bool& clamped) const;

    std::vector<ViaPose> via_poses_;
    std::vector<double> via_phis_;
    std::vector<PositionSegment> position_;
    std::vector<OrientationSegment> orientation_;
    std::vector<Vec3> integrated_at_via_;
};

}  // namespace pathmpc::refpath
