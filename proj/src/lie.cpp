#include "pathmpc/lie.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pathmpc::lie {

bool RotationMatrix::is_valid(double tol) const {
    const Mat3 gram = m.transpose() * m;
    return (gram - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol && std::abs(m.determinant() - 1.0) <= tol;
}

Mat3 skew(const Vec3& v) {
    Mat3 s;
    s << 0.0, -v.z(), v.y(),
         v.z(), 0.0, -v.x(),
         -v.y(), v.x(), 0.0;
    return s;
}

Vec3 unskew(const Mat3& m) {
    return Vec3(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)) * 0.5;
}

Mat3 exp(const Vec3& tau) {
    const double theta = tau.norm();
    const Mat3 k = skew(tau);
    if (theta < kExpSmallAngle) {
        return Mat3::Identity() + k + 0.5 * k * k;
    }
    const double a = std::sin(theta) / theta;
    const double b = (1.0 - std::cos(theta)) / (theta * theta);
    return Mat3::Identity() + a * k + b * k * k;
}

RotationMatrix exp(const RotationVector& tau) { return RotationMatrix(exp(tau.v)); }

LogResult log_checked(const Mat3& r) {
    const Vec3 w = unskew(r);  // sin(theta) * u
    const double s = w.norm();
    const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    const double theta = std::atan2(s, c);

    LogResult out;
    out.near_pi = (std::numbers::pi - theta) < kNearPi;

    if (theta < kSmallAngle) {
        // theta / sin(theta) ~ 1 + theta^2 / 6
        out.tau.v = w * (1.0 + theta * theta / 6.0);
        return out;
    }
    if (std::numbers::pi - theta > 1e-4) {
        out.tau.v = w * (theta / s);
        return out;
    }

    // Close to pi the antisymmetric part vanishes: (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) u u^T.
    const Mat3 b = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
    Eigen::Index j = 0;
    b.diagonal().maxCoeff(&j);
    Vec3 u = b.col(j).normalized();
    if (u.dot(w) < 0.0) {
        u = -u;
    }
    out.tau.v = theta * u;
    return out;
}

Vec3 log(const Mat3& r) { return log_checked(r).tau.v; }

RotationVector log(const RotationMatrix& r) { return log_checked(r.m).tau; }

RotationVector canonicalize(const RotationVector& tau) {
    const double theta = tau.angle();
    if (theta <= std::numbers::pi) {
        return tau;
    }
    const Vec3 u = tau.v / theta;
    double wrapped = std::remainder(theta, 2.0 * std::numbers::pi);  // in [-pi, pi]
    return RotationVector(u * wrapped);
}

double inv_jacobian_coefficient(double theta) {
    if (theta < kJacobianSeriesAngle) {
        const double t2 = theta * theta;
        return 1.0 / 12.0 + t2 * (1.0 / 720.0 + t2 * (1.0 / 30240.0 + t2 / 1209600.0));
    }
    // (1 + cos) / sin == cot(theta / 2), which stays finite at theta = pi.
    return 1.0 / (theta * theta) - 1.0 / (2.0 * theta * std::tan(0.5 * theta));
}

Mat3 inv_jacobian_left(const Vec3& tau) {
    const Mat3 k = skew(tau);
    return Mat3::Identity() - 0.5 * k + inv_jacobian_coefficient(tau.norm()) * k * k;
}

Mat3 inv_jacobian_right(const Vec3& tau) {
    const Mat3 k = skew(tau);
    return Mat3::Identity() + 0.5 * k + inv_jacobian_coefficient(tau.norm()) * k * k;
}

Vec3 concat_approx(const Vec3& tau1, const Vec3& tau2, const Vec3& tau3) {
    const Vec3 outer = log(exp(tau3) * exp(tau2));
    return tau2 + inv_jacobian_left(tau2) * tau3 + inv_jacobian_right(outer) * tau1;
}

}  // namespace pathmpc::lie
