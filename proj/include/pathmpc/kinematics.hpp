#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pathmpc/lie.hpp"

namespace pathmpc::kinematics {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using JointVector = Eigen::VectorXd;

/// Revolute joint frame relative to its parent: the frame is translated by
/// origin_offset and rotated by origin_rotation, then rotates about axis.
struct Joint {
    Vec3 axis = Vec3::UnitZ();
    Vec3 origin_offset = Vec3::Zero();
    lie::RotationVector origin_rotation;
};

struct RigidTransform {
    Vec3 translation = Vec3::Zero();
    lie::RotationVector rotation;
};

class KinematicChain {
public:
    KinematicChain(std::vector<Joint> joints, RigidTransform tool);

    int dof() const { return static_cast<int>(joints_.size()); }
    const std::vector<Joint>& joints() const { return joints_; }
    const RigidTransform& tool() const { return tool_; }
    const Mat3& origin_rotation_matrix(int i) const { return origin_rotations_[static_cast<size_t>(i)]; }
    const Mat3& tool_rotation_matrix() const { return tool_rotation_; }

private:
    std::vector<Joint> joints_;
    RigidTransform tool_;
    std::vector<Mat3> origin_rotations_;  // cached Exp(origin_rotation)
    Mat3 tool_rotation_;
};

struct Pose {
    Vec3 position = Vec3::Zero();
    Mat3 orientation = Mat3::Identity();
};

/// Everything the planner needs at one configuration, computed in one pass.
struct KinematicsState {
    Pose pose;
    Eigen::Matrix<double, 6, Eigen::Dynamic> jacobian;  // [v; omega] rows
    Eigen::Matrix3Xd joint_axes;                         // world-frame z_i
    Eigen::Matrix3Xd joint_origins;                      // world-frame p_i
};

class SingularConfiguration : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Pose forward_kinematics(const KinematicChain& chain, const JointVector& q);

KinematicsState evaluate(const KinematicChain& chain, const JointVector& q);

Eigen::Matrix<double, 6, Eigen::Dynamic> geometric_jacobian(const KinematicChain& chain, const JointVector& q);

/// Partial derivatives of the twist J(q) qdot with respect to q (6 x n).
Eigen::Matrix<double, 6, Eigen::Dynamic> twist_derivative(const KinematicsState& state, const JointVector& qdot);

/// I - J^+ J with the right pseudo-inverse J^T (J J^T)^-1. Throws
/// SingularConfiguration if cond(J J^T) exceeds max_condition.
Eigen::MatrixXd nullspace_projector(const KinematicChain& chain, const JointVector& q, double max_condition = 1e8);
Eigen::MatrixXd nullspace_projector(const Eigen::Matrix<double, 6, Eigen::Dynamic>& jacobian, double max_condition = 1e8);

/// SVD-based projector that truncates singular values below tol * sigma_max.
Eigen::MatrixXd nullspace_projector_svd(const Eigen::Matrix<double, 6, Eigen::Dynamic>& jacobian, double tol = 1e-6);

struct IkResult {
    JointVector q;
    double position_error = 0.0;
    double orientation_error = 0.0;
    bool converged = false;
};

/// Damped least-squares pose IK; used to seed scenarios.
IkResult solve_ik(const KinematicChain& chain, const Pose& target, const JointVector& seed, int max_iter = 500,
                  double tol = 1e-12);

}  // namespace pathmpc::kinematics
