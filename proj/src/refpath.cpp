#include "pathmpc/refpath.hpp"

#include <algorithm>
#include <string>

namespace pathmpc::refpath {

PiecewisePath PiecewisePath::build(const std::vector<ViaPose>& via_poses) {
    if (via_poses.size() < 2) {
        throw PathError("a path needs at least two via poses");
    }
    PiecewisePath path;
    path.via_poses_ = via_poses;
    path.via_phis_.push_back(0.0);
    path.integrated_at_via_.push_back(Vec3::Zero());

    for (size_t l = 0; l + 1 < via_poses.size(); ++l) {
        const Vec3 delta = via_poses[l + 1].position - via_poses[l].position;
        const double len = delta.norm();
        if (len <= 1e-9) {
            throw PathError("via poses " + std::to_string(l) + " and " + std::to_string(l + 1) +
                            " have the same position");
        }
        const double phi0 = path.via_phis_.back();
        const double phi1 = phi0 + len;

        PositionSegment ps;
        ps.slope = delta / len;
        ps.base = via_poses[l].position;
        ps.phi_start = phi0;
        ps.phi_end = phi1;

        const Mat3 r0 = lie::exp(via_poses[l].orientation.v);
        const Mat3 r1 = lie::exp(via_poses[l + 1].orientation.v);
        const lie::LogResult step = lie::log_checked(r1 * r0.transpose());
        if (step.near_pi) {
            throw PathError("orientation change between via poses " + std::to_string(l) + " and " +
                            std::to_string(l + 1) + " is a half turn; insert an intermediate via pose");
        }
        OrientationSegment os;
        os.omega = step.tau.v / len;
        os.rotation_start = r0;
        os.phi_start = phi0;
        os.phi_end = phi1;

        path.position_.push_back(ps);
        path.orientation_.push_back(os);
        path.via_phis_.push_back(phi1);
        path.integrated_at_via_.push_back(path.integrated_at_via_.back() + os.omega * len);
    }
    return path;
}

int PiecewisePath::segment_index(double phi) const {
    // first l with phi <= phi_{l+1}
    const auto it = std::lower_bound(via_phis_.begin() + 1, via_phis_.end(), phi);
    const auto idx = static_cast<int>(it - (via_phis_.begin() + 1));
    return std::clamp(idx, 0, segment_count() - 1);
}

double PiecewisePath::clamp(double phi, bool& clamped) const {
    clamped = phi < 0.0 || phi > length();
    return std::clamp(phi, 0.0, length());
}

PositionSample PiecewisePath::eval_position(double phi) const {
    PositionSample s;
    phi = clamp(phi, s.clamped);
    s.segment = segment_index(phi);
    const PositionSegment& seg = position_[static_cast<size_t>(s.segment)];
    s.point = seg.base + seg.slope * (phi - seg.phi_start);
    s.tangent = seg.slope;
    return s;
}

OrientationVelocitySample PiecewisePath::eval_orientation_velocity(double phi) const {
    OrientationVelocitySample s;
    phi = clamp(phi, s.clamped);
    s.segment = segment_index(phi);
    s.omega = orientation_[static_cast<size_t>(s.segment)].omega;
    return s;
}

Mat3 PiecewisePath::reference_rotation(double phi) const {
    bool clamped = false;
    phi = clamp(phi, clamped);
    const OrientationSegment& seg = orientation_[static_cast<size_t>(segment_index(phi))];
    return lie::exp(Vec3(seg.omega * (phi - seg.phi_start))) * seg.rotation_start;
}

Vec3 PiecewisePath::integrated_reference_rotation(double phi) const {
    bool clamped = false;
    phi = clamp(phi, clamped);
    const int l = segment_index(phi);
    const OrientationSegment& seg = orientation_[static_cast<size_t>(l)];
    return integrated_at_via_[static_cast<size_t>(l)] + seg.omega * (phi - seg.phi_start);
}

}  // namespace pathmpc::refpath
