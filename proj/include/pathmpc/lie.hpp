#pragma once

#include <Eigen/Dense>

namespace pathmpc::lie {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rotation vector tau = theta * u of the rotation group, radians.
struct RotationVector {
    Vec3 v = Vec3::Zero();

    RotationVector() = default;
    explicit RotationVector(const Vec3& value) : v(value) {}

    double angle() const { return v.norm(); }
};

/// 3x3 rotation matrix. Validity (orthonormal, det 1) is checked by is_valid().
struct RotationMatrix {
    Mat3 m = Mat3::Identity();

    RotationMatrix() = default;
    explicit RotationMatrix(const Mat3& value) : m(value) {}

    RotationMatrix transpose() const { return RotationMatrix(m.transpose()); }
    RotationMatrix operator*(const RotationMatrix& other) const { return RotationMatrix(m * other.m); }

    bool is_valid(double tol = 1e-9) const;
};

// Angle thresholds for the series branches.
inline constexpr double kExpSmallAngle = 1e-8;
inline constexpr double kSmallAngle = 1e-6;
inline constexpr double kNearPi = 1e-6;
// Below this angle the inverse Jacobian coefficient uses its Taylor series.
inline constexpr double kJacobianSeriesAngle = 1e-1;

/// [v]x such that skew(v) * w == v.cross(w).
Mat3 skew(const Vec3& v);

/// Inverse of skew() for antisymmetric input.
Vec3 unskew(const Mat3& m);

Mat3 exp(const Vec3& tau);
RotationMatrix exp(const RotationVector& tau);

struct LogResult {
    RotationVector tau;
    /// Angle within kNearPi of pi; the axis sign is not unique there.
    bool near_pi = false;
};

/// Logarithm with angle in [0, pi]. The theta = pi case is resolved from
/// the symmetric part of R.
LogResult log_checked(const Mat3& r);
Vec3 log(const Mat3& r);
RotationVector log(const RotationMatrix& r);

/// Wraps a rotation vector so its norm lies in [0, pi].
RotationVector canonicalize(const RotationVector& tau);

/// Scalar (1/theta^2 - (1 + cos theta) / (2 theta sin theta)) with its
/// Taylor series (limit 1/12) below kJacobianSeriesAngle.
double inv_jacobian_coefficient(double theta);

Mat3 inv_jacobian_left(const Vec3& tau);
Mat3 inv_jacobian_right(const Vec3& tau);

/// First-order approximation of Log(Exp(tau3) Exp(tau2) Exp(tau1)) around
/// Exp(tau2) for small tau1 and tau3.
Vec3 concat_approx(const Vec3& tau1, const Vec3& tau2, const Vec3& tau3);

}  // namespace pathmpc::lie
