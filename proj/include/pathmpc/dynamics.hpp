#pragma once

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace pathmpc::dynamics {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// [pos; vel; acc] stacked as three n-blocks.
struct StateTriple {
    VectorXd pos;
    VectorXd vel;
    VectorXd acc;

    static StateTriple zero(int n);
    int dof() const { return static_cast<int>(pos.size()); }
    VectorXd stacked() const;
    static StateTriple from_stacked(const VectorXd& x);
};

struct DiscreteLTI {
    MatrixXd Phi;
    MatrixXd Gamma0;
    MatrixXd Gamma1;
    double Ts = 0.0;
    int n = 0;
};

/// Triangular basis function of width 2 Ts starting at t_k.
double hat(double t, double t_k, double Ts);

DiscreteLTI discretize(double Ts, int n);

StateTriple step(const DiscreteLTI& lti, const StateTriple& x, const VectorXd& u_k, const VectorXd& u_k1);

/// Evaluates the trajectory driven by jerk linearly interpolated between
/// knots (knot k at t = k Ts). Requires 0 <= t <= (knots - 1) Ts.
StateTriple continuous_eval(const StateTriple& x0, const std::vector<VectorXd>& jerk_knots, double Ts,
                            double t);

/// Scalar per-channel rollout coefficients over a horizon of N steps.
///
/// For knots u_0..u_N, the stacked scalar state s_i = [p, v, a] satisfies
///   s_i = free_response(i) * s_0 + sum_{k=0}^{N} input_gain(i, k) * u_k
/// where input_gain(i, k) = 0 for k > i.
class ScalarRollout {
public:
    ScalarRollout(double Ts, int horizon);

    int horizon() const { return horizon_; }
    double Ts() const { return Ts_; }
    const Eigen::Matrix3d& free_response(int i) const { return free_[static_cast<size_t>(i)]; }
    const Eigen::Vector3d& input_gain(int i, int k) const;

private:
    double Ts_;
    int horizon_;
    std::vector<Eigen::Matrix3d> free_;
    std::vector<Eigen::Vector3d> gain_;  // (N+1) x (N+1), row-major in (i, k)
};

}  // namespace pathmpc::dynamics
