#include "pathmpc/bounds.hpp"

#include <cmath>

#include <Eigen/Dense>

namespace pathmpc::bounds {

BoundSegment fit_bound(double phi_l, double phi_l1, double s0, double sf, double upsilon_max, double eps_start,
                       double eps_end, double e_upper, double e_lower) {
    if (!(phi_l1 > phi_l)) {
        throw BoundError("bound segment must have positive length");
    }
    if (eps_start < 0.0 || eps_end < 0.0) {
        throw BoundError("relaxations must be nonnegative");
    }
    if (!(upsilon_max > std::max(eps_start, eps_end))) {
        throw BoundError("peak bound must exceed the via-point relaxations");
    }
    if (!(e_lower < e_upper)) {
        throw BoundError("lower scale must be below upper scale");
    }
    const double d = phi_l1 - phi_l;
    const double h = 0.5 * d;

    Eigen::Matrix<double, 5, 5> A;
    Eigen::Matrix<double, 5, 1> rhs;
    A << 1, 0, 0, 0, 0,
         0, 1, 0, 0, 0,
         1, d, d * d, d * d * d, d * d * d * d,
         0, 1, 2 * d, 3 * d * d, 4 * d * d * d,
         1, h, h * h, h * h * h, h * h * h * h;
    rhs << eps_start, s0, eps_end, sf, upsilon_max;
    const Eigen::Matrix<double, 5, 1> a = A.fullPivLu().solve(rhs);

    BoundSegment seg;
    for (int k = 0; k < 5; ++k) {
        seg.coefficients[static_cast<size_t>(k)] = a(k);
    }
    seg.phi_start = phi_l;
    seg.phi_end = phi_l1;
    seg.s0 = s0;
    seg.sf = sf;
    seg.upsilon_max = upsilon_max;
    seg.eps_start = eps_start;
    seg.eps_end = eps_end;
    seg.e_upper = e_upper;
    seg.e_lower = e_lower;

    // Interior minimum over the critical points of the quartic.
    Eigen::Matrix3d companion = Eigen::Matrix3d::Zero();
    const double lead = 4.0 * a(4);
    double min_value = std::min(eps_start, eps_end);
    if (std::abs(lead) > 1e-14) {
        companion(0, 0) = -3.0 * a(3) / lead;
        companion(0, 1) = -2.0 * a(2) / lead;
        companion(0, 2) = -a(1) / lead;
        companion(1, 0) = 1.0;
        companion(2, 1) = 1.0;
        const Eigen::Vector3cd roots = companion.eigenvalues();
        for (int i = 0; i < 3; ++i) {
            if (std::abs(roots(i).imag()) > 1e-9) {
                continue;
            }
            const double x = roots(i).real();
            if (x > 0.0 && x < d) {
                min_value = std::min(min_value, eval_polynomial(seg, phi_l + x).upsilon);
            }
        }
    } else {
        for (int i = 1; i < 64; ++i) {
            min_value = std::min(min_value, eval_polynomial(seg, phi_l + d * i / 64.0).upsilon);
        }
    }
    if (min_value < 0.0 || (min_value == 0.0 && eps_start > 0.0 && eps_end > 0.0)) {
        throw BoundError("bound envelope becomes negative inside the segment; reduce the slopes");
    }
    return seg;
}

BoundValue eval_polynomial(const BoundSegment& segment, double phi) {
    const auto& a = segment.coefficients;
    const double x = phi - segment.phi_start;
    BoundValue v;
    v.upsilon = a[0] + x * (a[1] + x * (a[2] + x * (a[3] + x * a[4])));
    v.derivative = a[1] + x * (2.0 * a[2] + x * (3.0 * a[3] + x * 4.0 * a[4]));
    return v;
}

BoundValue eval_bound(const BoundSegment& segment, double phi) {
    const double slack = 1e-12 * std::max(1.0, std::abs(segment.phi_end));
    if (phi < segment.phi_start - slack || phi > segment.phi_end + slack) {
        throw std::out_of_range("phi outside the bound segment");
    }
    return eval_polynomial(segment, phi);
}

double psi_asymmetric(double e_proj, double upsilon, double e_u, double e_l) {
    const double offset = 0.5 * (e_l + e_u) * upsilon;
    const double lambda = 0.5 * (e_u - e_l) * upsilon;
    const double d = e_proj - offset;
    return d * d - lambda * lambda;
}

}  // namespace pathmpc::bounds
