#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pathmpc/kinematics.hpp"
#include "pathmpc/lie.hpp"
#include "pathmpc/refpath.hpp"

namespace pathmpc::path_error {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

class DegenerateBasis : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct OrthoBasis {
    Vec3 b1 = Vec3::UnitY();
    Vec3 b2 = Vec3::UnitZ();
};

/// b1 is the normalized rejection of desired from direction, b2 = dir x b1.
OrthoBasis gram_schmidt_basis(const Vec3& direction, const Vec3& desired);

/// World axis least parallel to direction.
Vec3 default_desired(const Vec3& direction);

/// Bases and orientation axis of one path segment.
struct SegmentFrame {
    OrthoBasis position;
    OrthoBasis orientation;
    Vec3 omega_dir = Vec3::UnitZ();
    bool omega_fallback = false;  // zero-rotation segment
};

using PathFrames = std::vector<SegmentFrame>;

/// Per-segment desired vectors; empty optionals select default_desired.
PathFrames build_frames(const refpath::PiecewisePath& path, const std::vector<std::optional<Vec3>>& desired_position,
                        const std::vector<std::optional<Vec3>>& desired_orientation);

struct PositionDecomposition {
    Vec3 e = Vec3::Zero();
    Vec3 e_par = Vec3::Zero();
    Vec3 e_orth = Vec3::Zero();
    Eigen::Vector2d proj = Eigen::Vector2d::Zero();
    int segment = 0;
};

PositionDecomposition position_error(const Vec3& p_c, const refpath::PiecewisePath& path, const PathFrames& frames,
                                     double phi);

struct PositionErrorRate {
    Vec3 e_dot = Vec3::Zero();
    Vec3 e_par_dot = Vec3::Zero();
    Vec3 e_orth_dot = Vec3::Zero();
};

/// General rate with path curvature: tangent_rate = pi_p''(phi) phi_dot.
PositionErrorRate position_error_rate_general(const Vec3& e_p, const Vec3& e_p_dot, const Vec3& tangent,
                                              const Vec3& tangent_rate);

/// Rate on a linear segment; p_c velocity from the chain Jacobian.
PositionErrorRate position_error_rate(const kinematics::KinematicChain& chain, const Eigen::VectorXd& q,
                                      const Eigen::VectorXd& qdot, const refpath::PiecewisePath& path, double phi,
                                      double phi_dot);

/// Log(R_c R_r(phi)^T).
lie::LogResult orientation_error_true(const Mat3& R_c, const refpath::PiecewisePath& path, double phi);

struct AngleDecomposition {
    double alpha = 0.0;  // about b1
    double beta = 0.0;   // about the path axis
    double gamma = 0.0;  // about b2
    bool singular = false;
};

/// Exact split R^e = Exp(gamma b2) Exp(beta w) Exp(alpha b1).
AngleDecomposition decompose_orientation_error(const Vec3& e_o, const OrthoBasis& basis, const Vec3& omega_dir);

/// Exp(gamma b2) Exp(beta w) Exp(alpha b1).
Mat3 compose_orientation_error(const AngleDecomposition& angles, const OrthoBasis& basis, const Vec3& omega_dir);

struct ProjectionVectors {
    Vec3 rho_alpha = Vec3::Zero();
    Vec3 rho_beta = Vec3::Zero();
    Vec3 rho_gamma = Vec3::Zero();
};

/// Linear least-squares split of e_o around an initial guess (alpha0, beta0).
ProjectionVectors projection_vectors(const Vec3& e_o_init, double alpha0, double beta0, const OrthoBasis& basis,
                                     const Vec3& omega_dir);

/// Projection vectors for segments first..last, each from the exact split of
/// e_o_init in that segment's frame.
std::vector<ProjectionVectors> cycle_projection_vectors(const Vec3& e_o_init, const PathFrames& frames, int first,
                                                        int last);

struct OrientationErrorSample {
    Vec3 e_o = Vec3::Zero();
    Vec3 e_par = Vec3::Zero();
    Vec3 e_perp1 = Vec3::Zero();
    Vec3 e_perp2 = Vec3::Zero();
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    int segment = 0;
};

/// Linearized rollout of the orientation error.
///
/// omega_c_integral[i] is the integral of the actual angular velocity from t0
/// to t_i (entry 0 is zero). phi_series[0] is the path parameter at t0.
/// rho[l - first_segment] holds the projection vectors of segment l.
std::vector<OrientationErrorSample> propagate_orientation_error(const Vec3& e_o_t0,
                                                                const std::vector<Vec3>& omega_c_integral,
                                                                const refpath::PiecewisePath& path,
                                                                const std::vector<double>& phi_series,
                                                                const PathFrames& frames,
                                                                const std::vector<ProjectionVectors>& rho,
                                                                int first_segment);

/// Initial split components (E_par, E_perp1, E_perp2) from the exact decomposition.
OrientationErrorSample initial_orientation_split(const Vec3& e_o, const SegmentFrame& frame, int segment);

}  // namespace pathmpc::path_error
