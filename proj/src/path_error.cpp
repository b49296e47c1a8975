#include "pathmpc/path_error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace pathmpc::path_error {

namespace {

constexpr double kParallelAngle = 1e-6;
constexpr double kZeroRotation = 1e-9;
constexpr double kSingularBeta = 1e-3;
constexpr double kMaxGramCondition = 1e10;

Mat3 axes_matrix(const OrthoBasis& basis, const Vec3& omega_dir) {
    Mat3 m;
    m.col(0) = basis.b2;
    m.col(1) = omega_dir;
    m.col(2) = basis.b1;
    return m;
}

double angle_between(const Vec3& a, const Vec3& b) {
    return std::atan2(a.cross(b).norm(), std::abs(a.dot(b)));
}

}  // namespace

OrthoBasis gram_schmidt_basis(const Vec3& direction, const Vec3& desired) {
    const double dn = direction.norm();
    const double sn = desired.norm();
    if (dn <= 0.0 || sn <= 0.0 || angle_between(direction, desired) <= kParallelAngle) {
        throw DegenerateBasis("basis direction and desired vector must be linearly independent");
    }
    const Vec3 d = direction / dn;
    const Vec3 s = desired / sn;
    OrthoBasis basis;
    basis.b1 = (s - s.dot(d) * d).normalized();
    basis.b2 = d.cross(basis.b1).normalized();
    return basis;
}

Vec3 default_desired(const Vec3& direction) {
    const Vec3 a = direction.cwiseAbs();
    Eigen::Index idx = 0;
    a.minCoeff(&idx);
    return Vec3::Unit(idx);
}

PathFrames build_frames(const refpath::PiecewisePath& path, const std::vector<std::optional<Vec3>>& desired_position,
                        const std::vector<std::optional<Vec3>>& desired_orientation) {
    const auto count = static_cast<size_t>(path.segment_count());
    if (desired_position.size() != count || desired_orientation.size() != count) {
        throw std::invalid_argument("one desired vector pair per segment required");
    }
    PathFrames frames(count);
    for (size_t l = 0; l < count; ++l) {
        const Vec3& m = path.position_segments()[l].slope;
        const Vec3 bpd = desired_position[l].value_or(default_desired(m));
        frames[l].position = gram_schmidt_basis(m, bpd);

        const Vec3& w = path.orientation_segments()[l].omega;
        Vec3 dir;
        if (w.norm() > kZeroRotation) {
            dir = w.normalized();
        } else {
            frames[l].omega_fallback = true;
            dir = m;
            if (desired_orientation[l] && angle_between(dir, *desired_orientation[l]) <= 1e-3) {
                dir = default_desired(*desired_orientation[l]);
            }
        }
        frames[l].omega_dir = dir;
        const Vec3 bod = desired_orientation[l].value_or(default_desired(dir));
        frames[l].orientation = gram_schmidt_basis(dir, bod);
    }
    return frames;
}

PositionDecomposition position_error(const Vec3& p_c, const refpath::PiecewisePath& path, const PathFrames& frames,
                                     double phi) {
    const refpath::PositionSample s = path.eval_position(phi);
    const OrthoBasis& basis = frames.at(static_cast<size_t>(s.segment)).position;
    PositionDecomposition d;
    d.segment = s.segment;
    d.e = p_c - s.point;
    d.e_par = s.tangent.dot(d.e) * s.tangent;
    d.e_orth = d.e - d.e_par;
    d.proj << basis.b1.dot(d.e), basis.b2.dot(d.e);
    return d;
}

PositionErrorRate position_error_rate_general(const Vec3& e_p, const Vec3& e_p_dot, const Vec3& tangent,
                                              const Vec3& tangent_rate) {
    PositionErrorRate r;
    r.e_dot = e_p_dot;
    r.e_par_dot = tangent_rate.dot(e_p) * tangent + tangent.dot(e_p_dot) * tangent +
                  tangent.dot(e_p) * tangent_rate;
    r.e_orth_dot = e_p_dot - r.e_par_dot;
    return r;
}

PositionErrorRate position_error_rate(const kinematics::KinematicChain& chain, const Eigen::VectorXd& q,
                                      const Eigen::VectorXd& qdot, const refpath::PiecewisePath& path, double phi,
                                      double phi_dot) {
    const kinematics::KinematicsState ks = kinematics::evaluate(chain, q);
    const refpath::PositionSample s = path.eval_position(phi);
    const Vec3 v = ks.jacobian.topRows<3>() * qdot;
    const Vec3 e_p = ks.pose.position - s.point;
    return position_error_rate_general(e_p, v - s.tangent * phi_dot, s.tangent, Vec3::Zero());
}

lie::LogResult orientation_error_true(const Mat3& R_c, const refpath::PiecewisePath& path, double phi) {
    return lie::log_checked(R_c * path.reference_rotation(phi).transpose());
}

AngleDecomposition decompose_orientation_error(const Vec3& e_o, const OrthoBasis& basis, const Vec3& omega_dir) {
    const Mat3 M = axes_matrix(basis, omega_dir);
    const Mat3 R = M.transpose() * lie::exp(e_o) * M;
    AngleDecomposition d;
    d.beta = std::asin(std::clamp(R(0, 2), -1.0, 1.0));
    d.alpha = std::atan2(-R(0, 1), R(0, 0));
    d.gamma = std::atan2(-R(1, 2), R(2, 2));
    d.singular = std::abs(std::abs(d.beta) - std::numbers::pi / 2.0) < kSingularBeta;
    return d;
}

Mat3 compose_orientation_error(const AngleDecomposition& angles, const OrthoBasis& basis, const Vec3& omega_dir) {
    return lie::exp(Vec3(angles.gamma * basis.b2)) * lie::exp(Vec3(angles.beta * omega_dir)) *
           lie::exp(Vec3(angles.alpha * basis.b1));
}

ProjectionVectors projection_vectors(const Vec3& e_o_init, double alpha0, double beta0, const OrthoBasis& basis,
                                     const Vec3& omega_dir) {
    const Mat3 Re = lie::exp(e_o_init);
    const Mat3 Ra_t = lie::exp(Vec3(alpha0 * basis.b1)).transpose();
    const Mat3 Rb_t = lie::exp(Vec3(beta0 * omega_dir)).transpose();

    Mat3 r;
    r.col(0) = lie::inv_jacobian_right(e_o_init) * basis.b1;
    r.col(1) = lie::inv_jacobian_right(lie::log(Mat3(Re * Ra_t))) * omega_dir;
    r.col(2) = lie::inv_jacobian_right(lie::log(Mat3(Re * Ra_t * Rb_t))) * basis.b2;

    const Mat3 G = r.transpose() * r;
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(G);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxGramCondition) {
        throw DegenerateBasis("projection system is ill-conditioned");
    }
    const Mat3 P = G.ldlt().solve(r.transpose());
    ProjectionVectors rho;
    rho.rho_alpha = P.row(0).transpose();
    rho.rho_beta = P.row(1).transpose();
    rho.rho_gamma = P.row(2).transpose();
    return rho;
}

std::vector<ProjectionVectors> cycle_projection_vectors(const Vec3& e_o_init, const PathFrames& frames, int first,
                                                        int last) {
    std::vector<ProjectionVectors> out;
    for (int l = first; l <= last; ++l) {
        const SegmentFrame& f = frames.at(static_cast<size_t>(l));
        const AngleDecomposition d = decompose_orientation_error(e_o_init, f.orientation, f.omega_dir);
        out.push_back(projection_vectors(e_o_init, d.alpha, d.beta, f.orientation, f.omega_dir));
    }
    return out;
}

OrientationErrorSample initial_orientation_split(const Vec3& e_o, const SegmentFrame& frame, int segment) {
    const AngleDecomposition d = decompose_orientation_error(e_o, frame.orientation, frame.omega_dir);
    OrientationErrorSample s;
    s.e_o = e_o;
    s.e_par = d.beta * frame.omega_dir;
    s.e_perp1 = d.alpha * frame.orientation.b1;
    s.e_perp2 = d.gamma * frame.orientation.b2;
    s.alpha = d.alpha;
    s.beta = d.beta;
    s.gamma = d.gamma;
    s.segment = segment;
    return s;
}

std::vector<OrientationErrorSample> propagate_orientation_error(const Vec3& e_o_t0,
                                                                const std::vector<Vec3>& omega_c_integral,
                                                                const refpath::PiecewisePath& path,
                                                                const std::vector<double>& phi_series,
                                                                const PathFrames& frames,
                                                                const std::vector<ProjectionVectors>& rho,
                                                                int first_segment) {
    if (omega_c_integral.size() != phi_series.size() || phi_series.empty()) {
        throw std::invalid_argument("series lengths differ");
    }
    const Mat3 Jl = lie::inv_jacobian_left(e_o_t0);
    const Mat3 Jr = lie::inv_jacobian_right(e_o_t0);
    const Vec3 omega_r0 = path.integrated_reference_rotation(phi_series[0]);
    const auto rho_for = [&](int l) -> const ProjectionVectors& {
        return rho.at(static_cast<size_t>(l - first_segment));
    };

    std::vector<OrientationErrorSample> out;
    const int l0 = path.segment_index(phi_series[0]);
    out.push_back(initial_orientation_split(e_o_t0, frames.at(static_cast<size_t>(l0)), l0));
    for (size_t i = 1; i < phi_series.size(); ++i) {
        const OrientationErrorSample& prev = out.back();
        OrientationErrorSample s;
        s.e_o = e_o_t0 + Jl * omega_c_integral[i] - Jr * (path.integrated_reference_rotation(phi_series[i]) - omega_r0);
        const Vec3 de = s.e_o - prev.e_o;
        const int lp = path.segment_index(phi_series[i - 1]);
        const SegmentFrame& fp = frames.at(static_cast<size_t>(lp));
        const ProjectionVectors& r = rho_for(lp);
        s.e_par = prev.e_par + r.rho_beta.dot(de) * fp.omega_dir;
        s.e_perp1 = prev.e_perp1 + r.rho_alpha.dot(de) * fp.orientation.b1;
        s.e_perp2 = prev.e_perp2 + r.rho_gamma.dot(de) * fp.orientation.b2;

        s.segment = path.segment_index(phi_series[i]);
        const SegmentFrame& f = frames.at(static_cast<size_t>(s.segment));
        const Vec3 perp = s.e_perp1 + s.e_perp2;
        s.alpha = f.orientation.b1.dot(perp);
        s.gamma = f.orientation.b2.dot(perp);
        s.beta = f.omega_dir.dot(s.e_par);
        out.push_back(s);
    }
    return out;
}

}  // namespace pathmpc::path_error
