#include "pathmpc/kinematics.hpp"

#include <cmath>
#include <string>

namespace pathmpc::kinematics {

KinematicChain::KinematicChain(std::vector<Joint> joints, RigidTransform tool)
    : joints_(std::move(joints)), tool_(std::move(tool)) {
    if (joints_.empty()) {
        throw std::invalid_argument("kinematic chain needs at least one joint");
    }
    origin_rotations_.reserve(joints_.size());
    for (size_t i = 0; i < joints_.size(); ++i) {
        if (std::abs(joints_[i].axis.norm() - 1.0) > 1e-9) {
            throw std::invalid_argument("joint " + std::to_string(i) + " axis is not unit length");
        }
        origin_rotations_.push_back(lie::exp(joints_[i].origin_rotation.v));
    }
    tool_rotation_ = lie::exp(tool_.rotation.v);
}

namespace {

void check_size(const KinematicChain& chain, const JointVector& q) {
    if (q.size() != chain.dof()) {
        throw std::invalid_argument("joint vector has " + std::to_string(q.size()) + " entries, chain has " +
                                    std::to_string(chain.dof()));
    }
}

}  // namespace

KinematicsState evaluate(const KinematicChain& chain, const JointVector& q) {
    check_size(chain, q);
    const int n = chain.dof();
    KinematicsState st;
    st.jacobian.resize(6, n);
    st.joint_axes.resize(3, n);
    st.joint_origins.resize(3, n);

    Mat3 rot = Mat3::Identity();
    Vec3 pos = Vec3::Zero();
    for (int i = 0; i < n; ++i) {
        const Joint& jt = chain.joints()[static_cast<size_t>(i)];
        pos += rot * jt.origin_offset;
        rot = rot * chain.origin_rotation_matrix(i);
        st.joint_axes.col(i) = rot * jt.axis;
        st.joint_origins.col(i) = pos;
        rot = rot * lie::exp(Vec3(jt.axis * q(i)));
    }
    st.pose.position = pos + rot * chain.tool().translation;
    st.pose.orientation = rot * chain.tool_rotation_matrix();

    for (int i = 0; i < n; ++i) {
        const Vec3 z = st.joint_axes.col(i);
        st.jacobian.block<3, 1>(0, i) = z.cross(st.pose.position - st.joint_origins.col(i));
        st.jacobian.block<3, 1>(3, i) = z;
    }
    return st;
}

Pose forward_kinematics(const KinematicChain& chain, const JointVector& q) { return evaluate(chain, q).pose; }

Eigen::Matrix<double, 6, Eigen::Dynamic> geometric_jacobian(const KinematicChain& chain, const JointVector& q) {
    return evaluate(chain, q).jacobian;
}

Eigen::Matrix<double, 6, Eigen::Dynamic> twist_derivative(const KinematicsState& state, const JointVector& qdot) {
    // Column i of J: v_i = z_i x (p - p_i), w_i = z_i.
    //   d v_i / d q_j = z_j x v_i  (j <= i),  z_i x v_j  (j > i)
    //   d w_i / d q_j = z_j x z_i  (j <  i),  0         otherwise
    const auto& jac = state.jacobian;
    const auto& z = state.joint_axes;
    const int n = static_cast<int>(jac.cols());
    Eigen::Matrix<double, 6, Eigen::Dynamic> out = Eigen::Matrix<double, 6, Eigen::Dynamic>::Zero(6, n);
    for (int j = 0; j < n; ++j) {
        const Vec3 zj = z.col(j);
        Vec3 dv = Vec3::Zero();
        Vec3 dw = Vec3::Zero();
        for (int i = 0; i < n; ++i) {
            const Vec3 vi = jac.block<3, 1>(0, i);
            if (j <= i) {
                dv += zj.cross(vi) * qdot(i);
                dw += zj.cross(Vec3(z.col(i))) * qdot(i);
            } else {
                dv += Vec3(z.col(i)).cross(Vec3(jac.block<3, 1>(0, j))) * qdot(i);
            }
        }
        out.block<3, 1>(0, j) = dv;
        out.block<3, 1>(3, j) = dw;
    }
    return out;
}

Eigen::MatrixXd nullspace_projector(const Eigen::Matrix<double, 6, Eigen::Dynamic>& jacobian, double max_condition) {
    const Eigen::Matrix<double, 6, 6> jjt = jacobian * jacobian.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(jjt, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (lo <= 0.0 || hi / lo > max_condition) {
        throw SingularConfiguration("J J^T is near singular (condition " + std::to_string(lo > 0 ? hi / lo : INFINITY) +
                                    ")");
    }
    const Eigen::MatrixXd pinv = jacobian.transpose() * jjt.ldlt().solve(Eigen::Matrix<double, 6, 6>::Identity());
    const Eigen::Index n = jacobian.cols();
    return Eigen::MatrixXd::Identity(n, n) - pinv * jacobian;
}

Eigen::MatrixXd nullspace_projector(const KinematicChain& chain, const JointVector& q, double max_condition) {
    return nullspace_projector(geometric_jacobian(chain, q), max_condition);
}

Eigen::MatrixXd nullspace_projector_svd(const Eigen::Matrix<double, 6, Eigen::Dynamic>& jacobian, double tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(jacobian), Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    const Eigen::Index n = jacobian.cols();
    Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
    const double cutoff = tol * (s.size() > 0 ? s(0) : 0.0);
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (s(k) > cutoff) {
            p -= svd.matrixV().col(k) * svd.matrixV().col(k).transpose();
        }
    }
    return p;
}

IkResult solve_ik(const KinematicChain& chain, const Pose& target, const JointVector& seed, int max_iter, double tol) {
    IkResult res;
    res.q = seed;
    const double damping = 1e-6;
    for (int it = 0; it < max_iter; ++it) {
        const KinematicsState st = evaluate(chain, res.q);
        Eigen::Matrix<double, 6, 1> err;
        err.head<3>() = target.position - st.pose.position;
        err.tail<3>() = lie::log(Mat3(target.orientation * st.pose.orientation.transpose()));
        res.position_error = err.head<3>().norm();
        res.orientation_error = err.tail<3>().norm();
        if (err.squaredNorm() < tol * tol) {
            res.converged = true;
            break;
        }
        const auto& jac = st.jacobian;
        const Eigen::Matrix<double, 6, 6> a =
            jac * jac.transpose() + damping * Eigen::Matrix<double, 6, 6>::Identity();
        res.q += jac.transpose() * a.ldlt().solve(err);
    }
    return res;
}

}  // namespace pathmpc::kinematics
