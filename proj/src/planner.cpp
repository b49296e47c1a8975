#include "pathmpc/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

namespace pathmpc::planner {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kResidualsPerStep = 16;  // plus n nullspace and n jerk entries

double deg(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

void MpcConfig::validate(int dof) const {
    if (horizon < 2) {
        throw std::invalid_argument("horizon must be at least 2");
    }
    if (!(Ts > 0.0)) {
        throw std::invalid_argument("sample time must be positive");
    }
    const Weights& w = weights;
    if (!(w.tangential > 0 && w.error_rate > 0 && w.nullspace > 0 && w.joint_jerk > 0 && w.path_jerk > 0 &&
          w.path_state > 0 && path_weight > 0)) {
        throw std::invalid_argument("all weights must be positive");
    }
    for (const VectorXd* v : {&limits.q_min, &limits.q_max, &limits.qd_max, &limits.qdd_max, &limits.jerk_max}) {
        if (v->size() != dof) {
            throw std::invalid_argument("joint limit vectors must match the joint count");
        }
    }
    if ((limits.q_max - limits.q_min).minCoeff() <= 0.0 || limits.qd_max.minCoeff() <= 0.0 ||
        limits.qdd_max.minCoeff() <= 0.0 || limits.jerk_max.minCoeff() <= 0.0 || !(limits.path_jerk_max > 0.0)) {
        throw std::invalid_argument("joint limits must describe nonempty boxes");
    }
    if (lookahead < 1) {
        throw std::invalid_argument("lookahead must be at least one segment");
    }
}

SegmentBoundSpec SegmentBoundSpec::defaults(double slope) {
    SegmentBoundSpec s;
    for (int c = 0; c < kChannels; ++c) {
        ChannelSpec& ch = s.channels[static_cast<size_t>(c)];
        const bool rot = c >= kRot1;
        ch.upsilon_max = rot ? deg(5.0) : 0.05;
        ch.eps = rot ? deg(0.5) : 1e-3;
        ch.slope = slope;
    }
    return s;
}

namespace {

std::array<bounds::BoundSegment, kChannels> fit_segment(const SegmentBoundSpec& spec, double phi0, double phi1,
                                                        const std::array<std::optional<double>, kChannels>& start) {
    std::array<bounds::BoundSegment, kChannels> out;
    for (size_t c = 0; c < kChannels; ++c) {
        const ChannelSpec& ch = spec.channels[c];
        const double eps0 = start[c].value_or(ch.eps);
        double peak = ch.upsilon_max;
        if (start[c] && !(peak > eps0)) {
            peak = 1.05 * eps0;
        }
        out[c] = bounds::fit_bound(phi0, phi1, ch.slope, -ch.slope, peak, eps0, ch.eps, ch.e_upper, ch.e_lower);
    }
    return out;
}

Reference assemble_reference(refpath::PiecewisePath path, std::vector<SegmentBoundSpec> specs,
                             std::vector<std::array<bounds::BoundSegment, kChannels>> envelopes, int revision) {
    Reference ref{std::move(path), std::move(specs), std::move(envelopes), {}, revision};
    std::vector<std::optional<Vec3>> dp, dor;
    for (const SegmentBoundSpec& s : ref.specs) {
        dp.push_back(s.desired_position);
        dor.push_back(s.desired_orientation);
    }
    ref.frames = path_error::build_frames(ref.path, dp, dor);
    return ref;
}

}  // namespace

Reference make_reference(const std::vector<refpath::ViaPose>& vias, const std::vector<SegmentBoundSpec>& specs) {
    refpath::PiecewisePath path = refpath::PiecewisePath::build(vias);
    if (static_cast<int>(specs.size()) != path.segment_count()) {
        throw std::invalid_argument("one bound specification per segment required");
    }
    std::vector<std::array<bounds::BoundSegment, kChannels>> env;
    for (int l = 0; l < path.segment_count(); ++l) {
        const auto& seg = path.position_segments()[static_cast<size_t>(l)];
        env.push_back(fit_segment(specs[static_cast<size_t>(l)], seg.phi_start, seg.phi_end, {}));
    }
    return assemble_reference(std::move(path), specs, std::move(env), 0);
}

PlannerState PlannerState::at_rest(const VectorXd& q) {
    PlannerState s;
    const auto n = static_cast<int>(q.size());
    s.x = dynamics::StateTriple::zero(n);
    s.x.pos = q;
    s.u_prev = VectorXd::Zero(n);
    s.xi = dynamics::StateTriple::zero(1);
    return s;
}

PoseErrors pose_errors(const kinematics::KinematicChain& chain, const Reference& reference, const VectorXd& q,
                       double phi) {
    const kinematics::Pose pose = kinematics::forward_kinematics(chain, q);
    PoseErrors e;
    e.position = path_error::position_error(pose.position, reference.path, reference.frames, phi);
    e.e_o = path_error::orientation_error_true(pose.orientation, reference.path, phi).tau.v;
    return e;
}

std::array<double, kChannels> exact_projections(const kinematics::KinematicChain& chain, const Reference& reference,
                                                const VectorXd& q, double phi) {
    const PoseErrors e = pose_errors(chain, reference, q, phi);
    const int l = e.position.segment;
    const path_error::SegmentFrame& frame = reference.frames[static_cast<size_t>(l)];
    const path_error::OrientationErrorSample split = path_error::initial_orientation_split(e.e_o, frame, l);
    const Vec3 perp = split.e_perp1 + split.e_perp2;
    return {e.position.proj(0), e.position.proj(1), frame.orientation.b1.dot(perp), frame.orientation.b2.dot(perp)};
}

namespace {

ViaCrossing locate_crossing(const kinematics::KinematicChain& chain, const Reference& reference,
                            const PlannerState& before, const PlannerState& after, const MpcConfig& config,
                            size_t via) {
    const double target = reference.path.via_phis()[via];
    const std::vector<VectorXd> vknots{VectorXd::Constant(1, before.v_prev), VectorXd::Constant(1, after.v_prev)};
    double lo = 0.0;
    double hi = config.Ts;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (dynamics::continuous_eval(before.xi, vknots, config.Ts, mid).pos(0) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const std::vector<VectorXd> uknots{before.u_prev, after.u_prev};
    const VectorXd q = dynamics::continuous_eval(before.x, uknots, config.Ts, hi).pos;
    ViaCrossing c;
    c.via = static_cast<int>(via);
    c.via_phi = target;
    c.t_exact = before.t + hi;
    c.projection = exact_projections(chain, reference, q, target);
    const auto& env = reference.envelopes[via - 1];
    for (size_t ch = 0; ch < kChannels; ++ch) {
        c.eps[ch] = env[ch].eps_end;
    }
    return c;
}

}  // namespace

CycleProblem::CycleProblem(const kinematics::KinematicChain& chain, const Reference& reference,
                           const PlannerState& state, const MpcConfig& config)
    : chain_(chain), ref_(reference), cfg_(config) {
    n_ = chain.dof();
    N_ = config.horizon;
    dim_ = N_ * (n_ + 1);
    const refpath::PiecewisePath& path = reference.path;
    const double phi0 = state.phi();
    phi_final_ = path.length();
    first_segment_ = path.segment_index(phi0);
    last_segment_ = std::min(first_segment_ + config.lookahead - 1, path.segment_count() - 1);
    phi_limit_ = path.via_phis()[static_cast<size_t>(last_segment_ + 1)];

    // Affine state maps over the horizon.
    const dynamics::ScalarRollout roll(config.Ts, N_);
    const auto vcol = [&](int k) { return N_ * n_ + (k - 1); };
    const auto resize = [&](auto& v) { v.resize(static_cast<size_t>(N_ + 1)); };
    resize(q_base_), resize(qd_base_), resize(qdd_base_), resize(Dq_), resize(Dqd_), resize(Dqdd_);
    resize(phi_base_), resize(phid_base_), resize(phidd_base_), resize(Dphi_), resize(Dphid_), resize(Dphidd_);
    for (int i = 0; i <= N_; ++i) {
        const auto ui = static_cast<size_t>(i);
        const Eigen::Matrix3d& F = roll.free_response(i);
        const Eigen::Vector3d& g0 = roll.input_gain(i, 0);
        std::array<VectorXd*, 3> base{&q_base_[ui], &qd_base_[ui], &qdd_base_[ui]};
        std::array<MatrixXd*, 3> D{&Dq_[ui], &Dqd_[ui], &Dqdd_[ui]};
        for (int r = 0; r < 3; ++r) {
            *base[static_cast<size_t>(r)] = F(r, 0) * state.x.pos + F(r, 1) * state.x.vel + F(r, 2) * state.x.acc +
                                            g0(r) * state.u_prev;
            MatrixXd& Dm = *D[static_cast<size_t>(r)];
            Dm = MatrixXd::Zero(n_, dim_);
            for (int k = 1; k <= i; ++k) {
                Dm.block(0, (k - 1) * n_, n_, n_).diagonal().setConstant(roll.input_gain(i, k)(r));
            }
        }
        std::array<double*, 3> pbase{&phi_base_[ui], &phid_base_[ui], &phidd_base_[ui]};
        std::array<Eigen::RowVectorXd*, 3> pD{&Dphi_[ui], &Dphid_[ui], &Dphidd_[ui]};
        for (int r = 0; r < 3; ++r) {
            *pbase[static_cast<size_t>(r)] = F(r, 0) * state.xi.pos(0) + F(r, 1) * state.xi.vel(0) +
                                             F(r, 2) * state.xi.acc(0) + g0(r) * state.v_prev;
            Eigen::RowVectorXd& Dm = *pD[static_cast<size_t>(r)];
            Dm = Eigen::RowVectorXd::Zero(dim_);
            for (int k = 1; k <= i; ++k) {
                Dm(vcol(k)) = roll.input_gain(i, k)(r);
            }
        }
    }

    // Orientation linearization at t0.
    const kinematics::KinematicsState ks0 = kinematics::evaluate(chain, state.x.pos);
    e_o0_ = path_error::orientation_error_true(ks0.pose.orientation, path, phi0).tau.v;
    Jl0_ = lie::inv_jacobian_left(e_o0_);
    Jr0_ = lie::inv_jacobian_right(e_o0_);
    omega_r0_ = path.integrated_reference_rotation(phi0);
    omega_c0_ = ks0.jacobian.bottomRows<3>() * state.x.vel;
    rho_ = path_error::cycle_projection_vectors(e_o0_, reference.frames, first_segment_, last_segment_);
    const path_error::OrientationErrorSample split =
        path_error::initial_orientation_split(e_o0_, reference.frames[static_cast<size_t>(first_segment_)],
                                              first_segment_);
    e_par0_ = split.e_par;
    e_perp1_0_ = split.e_perp1;
    e_perp2_0_ = split.e_perp2;
    try {
        Pn0_ = kinematics::nullspace_projector(ks0.jacobian);
    } catch (const kinematics::SingularConfiguration&) {
        Pn0_ = kinematics::nullspace_projector_svd(ks0.jacobian);
    }

    // Problem definition.
    problem_.dim = dim_;
    problem_.least_squares = true;
    problem_.n_inequality = 2 * kChannels * N_;
    problem_.lower = VectorXd(dim_);
    problem_.upper = VectorXd(dim_);
    for (int k = 0; k < N_; ++k) {
        problem_.lower.segment(k * n_, n_) = -config.limits.jerk_max;
        problem_.upper.segment(k * n_, n_) = config.limits.jerk_max;
        problem_.lower(N_ * n_ + k) = -config.limits.path_jerk_max;
        problem_.upper(N_ * n_ + k) = config.limits.path_jerk_max;
    }
    const int rows = N_ * (6 * n_ + 2);
    problem_.A = MatrixXd::Zero(rows, dim_);
    problem_.b = VectorXd::Zero(rows);
    int r = 0;
    const Limits& lim = config.limits;
    for (int i = 1; i <= N_; ++i) {
        const auto ui = static_cast<size_t>(i);
        for (int j = 0; j < n_; ++j) {
            problem_.A.row(r) = Dq_[ui].row(j);
            problem_.b(r++) = lim.q_max(j) - q_base_[ui](j);
            problem_.A.row(r) = -Dq_[ui].row(j);
            problem_.b(r++) = q_base_[ui](j) - lim.q_min(j);
            problem_.A.row(r) = Dqd_[ui].row(j);
            problem_.b(r++) = lim.qd_max(j) - qd_base_[ui](j);
            problem_.A.row(r) = -Dqd_[ui].row(j);
            problem_.b(r++) = qd_base_[ui](j) + lim.qd_max(j);
            problem_.A.row(r) = Dqdd_[ui].row(j);
            problem_.b(r++) = lim.qdd_max(j) - qdd_base_[ui](j);
            problem_.A.row(r) = -Dqdd_[ui].row(j);
            problem_.b(r++) = qdd_base_[ui](j) + lim.qdd_max(j);
        }
        problem_.A.row(r) = Dphi_[ui];
        problem_.b(r++) = phi_limit_ - phi_base_[ui];
        problem_.A.row(r) = -Dphid_[ui];
        problem_.b(r++) = phid_base_[ui];
    }
    problem_.evaluate = [this](const VectorXd& z, bool derivatives, nlp::NlpEvaluation& out) {
        evaluate(z, derivatives, out, nullptr);
    };
    problem_.initial = VectorXd::Zero(dim_);
    if (state.warm_start.size() == dim_) {
        problem_.initial = state.warm_start;
    }
}

double CycleProblem::sigmoid(double phi) const {
    return 1.0 / (1.0 + std::exp(-cfg_.sigmoid_gain * (phi - (phi_final_ - cfg_.sigmoid_offset))));
}

void CycleProblem::evaluate(const VectorXd& z, bool derivatives, nlp::NlpEvaluation& out,
                            std::vector<StepPrediction>* prediction) const {
    const refpath::PiecewisePath& path = ref_.path;
    const Weights& w = cfg_.weights;
    const double w_xi = cfg_.path_weight / phi_final_;
    const double s_par = std::sqrt(w.tangential);
    const double s_rate = std::sqrt(w.error_rate);
    const double s_phi = std::sqrt(w.path_state * w_xi);
    const double s_state = std::sqrt(w.path_state);
    const double s_null = std::sqrt(w.nullspace);
    const double s_u = std::sqrt(w.joint_jerk);
    const double s_v = std::sqrt(w.path_jerk);

    const int per_step = kResidualsPerStep + 2 * n_;
    out.residual.resize(per_step * N_);
    out.inequality.resize(2 * kChannels * N_);
    out.equality.resize(0);
    if (derivatives) {
        out.residual_jacobian = MatrixXd::Zero(per_step * N_, dim_);
        out.inequality_jacobian = MatrixXd::Zero(2 * kChannels * N_, dim_);
        out.equality_jacobian = MatrixXd::Zero(0, dim_);
    }

    const auto seg_of = [&](double phi) {
        return std::clamp(path.segment_index(phi), first_segment_, last_segment_);
    };

    Vec3 omega_c_prev = omega_c0_;
    MatrixXd d_omega_c_prev = MatrixXd::Zero(3, derivatives ? dim_ : 0);
    Vec3 Omega_c = Vec3::Zero();
    MatrixXd d_Omega_c = MatrixXd::Zero(3, derivatives ? dim_ : 0);
    Vec3 e_o_prev = e_o0_;
    MatrixXd d_e_o_prev = MatrixXd::Zero(3, derivatives ? dim_ : 0);
    Vec3 E_par = e_par0_, E_p1 = e_perp1_0_, E_p2 = e_perp2_0_;
    MatrixXd dE_par = MatrixXd::Zero(3, derivatives ? dim_ : 0);
    MatrixXd dE_p1 = dE_par, dE_p2 = dE_par;
    double phi_prev = phi_base_[0];

    if (prediction) {
        prediction->assign(static_cast<size_t>(N_ + 1), StepPrediction{});
    }

    for (int i = 1; i <= N_; ++i) {
        const auto ui = static_cast<size_t>(i);
        const VectorXd q = q_base_[ui] + Dq_[ui] * z;
        const VectorXd qd = qd_base_[ui] + Dqd_[ui] * z;
        const double phi = phi_base_[ui] + Dphi_[ui].dot(z);
        const double phid = phid_base_[ui] + Dphid_[ui].dot(z);
        const double phidd = phidd_base_[ui] + Dphidd_[ui].dot(z);

        const kinematics::KinematicsState ks = kinematics::evaluate(chain_, q);
        const auto Jv = ks.jacobian.topRows<3>();
        const auto Jw = ks.jacobian.bottomRows<3>();
        const int l = seg_of(phi);
        const int lp = seg_of(phi_prev);
        const auto& pseg = path.position_segments()[static_cast<size_t>(l)];
        const auto& oseg = path.orientation_segments()[static_cast<size_t>(l)];
        const path_error::SegmentFrame& frame = ref_.frames[static_cast<size_t>(l)];
        const path_error::SegmentFrame& frame_p = ref_.frames[static_cast<size_t>(lp)];
        const path_error::ProjectionVectors& rho = rho_[static_cast<size_t>(lp - first_segment_)];
        const Vec3& m = pseg.slope;
        const Eigen::Matrix3d mmT = m * m.transpose();

        // Position errors.
        const Vec3 ref_point = pseg.base + m * (phi - pseg.phi_start);
        const Vec3 e_p = ks.pose.position - ref_point;
        const Vec3 e_p_par = mmT * e_p;
        const Vec3 v = Jv * qd;
        const Vec3 e_p_dot = v - m * phid;

        // Orientation errors.
        const Vec3 omega_c = Jw * qd;
        Omega_c += 0.5 * cfg_.Ts * (omega_c_prev + omega_c);
        const Vec3 Omega_r = path.integrated_reference_rotation(pseg.phi_start) + oseg.omega * (phi - pseg.phi_start);
        const Vec3 e_o = e_o0_ + Jl0_ * Omega_c - Jr0_ * (Omega_r - omega_r0_);
        const Vec3 delta = e_o - e_o_prev;
        E_par += rho.rho_beta.dot(delta) * frame_p.omega_dir;
        E_p1 += rho.rho_alpha.dot(delta) * frame_p.orientation.b1;
        E_p2 += rho.rho_gamma.dot(delta) * frame_p.orientation.b2;
        const Vec3 E_perp = E_p1 + E_p2;
        const Vec3 e_o_dot = Jl0_ * omega_c - Jr0_ * oseg.omega * phid;

        // Channels.
        const std::array<double, kChannels> proj{frame.position.b1.dot(e_p), frame.position.b2.dot(e_p),
                                                 frame.orientation.b1.dot(E_perp), frame.orientation.b2.dot(E_perp)};
        std::array<bounds::BoundValue, kChannels> env;
        const auto& envelopes = ref_.envelopes[static_cast<size_t>(l)];
        for (size_t c = 0; c < kChannels; ++c) {
            env[c] = bounds::eval_polynomial(envelopes[c], phi);
            const int row = 2 * kChannels * (i - 1) + 2 * static_cast<int>(c);
            out.inequality(row) = proj[c] - envelopes[c].e_upper * env[c].upsilon;
            out.inequality(row + 1) = envelopes[c].e_lower * env[c].upsilon - proj[c];
        }

        // Objective.
        const double sig = sigmoid(phi);
        const double dsig = cfg_.sigmoid_gain * sig * (1.0 - sig);
        const Vec3 ep_obj = (1.0 - sig) * e_p_par + sig * e_p;
        const Vec3 eo_obj = (1.0 - sig) * E_par + sig * e_o;
        const int r0 = per_step * (i - 1);
        out.residual.segment<3>(r0) = s_par * ep_obj;
        out.residual.segment<3>(r0 + 3) = s_par * eo_obj;
        out.residual.segment<3>(r0 + 6) = s_rate * e_p_dot;
        out.residual.segment<3>(r0 + 9) = s_rate * e_o_dot;
        out.residual(r0 + 12) = s_phi * (phi - phi_final_);
        out.residual(r0 + 13) = s_state * phid;
        out.residual(r0 + 14) = s_state * phidd;
        out.residual(r0 + 15) = s_v * z(N_ * n_ + i - 1);
        out.residual.segment(r0 + 16, n_) = s_null * (Pn0_ * qd);
        out.residual.segment(r0 + 16 + n_, n_) = s_u * z.segment((i - 1) * n_, n_);

        if (derivatives) {
            const auto T = kinematics::twist_derivative(ks, qd);
            const MatrixXd& Dq = Dq_[ui];
            const MatrixXd& Dqd = Dqd_[ui];
            const Eigen::RowVectorXd& Dphi = Dphi_[ui];
            const Eigen::RowVectorXd& Dphid = Dphid_[ui];

            const MatrixXd d_e_p = Jv * Dq - m * Dphi;
            const MatrixXd d_e_p_par = mmT * d_e_p;
            const MatrixXd d_e_p_dot = T.topRows<3>() * Dq + Jv * Dqd - m * Dphid;
            const MatrixXd d_omega_c = T.bottomRows<3>() * Dq + Jw * Dqd;
            d_Omega_c += 0.5 * cfg_.Ts * (d_omega_c_prev + d_omega_c);
            const MatrixXd d_e_o = Jl0_ * d_Omega_c - (Jr0_ * oseg.omega) * Dphi;
            const MatrixXd d_delta = d_e_o - d_e_o_prev;
            dE_par += frame_p.omega_dir * (rho.rho_beta.transpose() * d_delta);
            dE_p1 += frame_p.orientation.b1 * (rho.rho_alpha.transpose() * d_delta);
            dE_p2 += frame_p.orientation.b2 * (rho.rho_gamma.transpose() * d_delta);
            const MatrixXd dE_perp = dE_p1 + dE_p2;
            const MatrixXd d_e_o_dot = Jl0_ * d_omega_c - (Jr0_ * oseg.omega) * Dphid;

            const std::array<Eigen::RowVectorXd, kChannels> dproj{
                frame.position.b1.transpose() * d_e_p, frame.position.b2.transpose() * d_e_p,
                frame.orientation.b1.transpose() * dE_perp, frame.orientation.b2.transpose() * dE_perp};
            for (size_t c = 0; c < kChannels; ++c) {
                const int row = 2 * kChannels * (i - 1) + 2 * static_cast<int>(c);
                const Eigen::RowVectorXd dups = env[c].derivative * Dphi;
                out.inequality_jacobian.row(row) = dproj[c] - envelopes[c].e_upper * dups;
                out.inequality_jacobian.row(row + 1) = envelopes[c].e_lower * dups - dproj[c];
            }

            MatrixXd& R = out.residual_jacobian;
            R.middleRows(r0, 3) =
                s_par * ((1.0 - sig) * d_e_p_par + sig * d_e_p + (e_p - e_p_par) * (dsig * Dphi));
            R.middleRows(r0 + 3, 3) =
                s_par * ((1.0 - sig) * dE_par + sig * d_e_o + (e_o - E_par) * (dsig * Dphi));
            R.middleRows(r0 + 6, 3) = s_rate * d_e_p_dot;
            R.middleRows(r0 + 9, 3) = s_rate * d_e_o_dot;
            R.row(r0 + 12) = s_phi * Dphi;
            R.row(r0 + 13) = s_state * Dphid;
            R.row(r0 + 14) = s_state * Dphidd_[ui];
            R(r0 + 15, N_ * n_ + i - 1) = s_v;
            R.middleRows(r0 + 16, n_) = s_null * Pn0_ * Dqd;
            R.block(r0 + 16 + n_, (i - 1) * n_, n_, n_).diagonal().setConstant(s_u);

            d_omega_c_prev = d_omega_c;
            d_e_o_prev = d_e_o;
        }

        if (prediction) {
            StepPrediction& s = (*prediction)[ui];
            s.q = q;
            s.qd = qd;
            s.qdd = qdd_base_[ui] + Dqdd_[ui] * z;
            s.phi = phi;
            s.phi_dot = phid;
            s.phi_ddot = phidd;
            s.segment = l;
            s.position = ks.pose.position;
            s.e_p = e_p;
            s.e_p_par = e_p_par;
            s.e_o = e_o;
            s.e_o_par = E_par;
            for (size_t c = 0; c < kChannels; ++c) {
                const double eu = envelopes[c].e_upper;
                const double el = envelopes[c].e_lower;
                s.projection[c] = proj[c];
                s.upsilon[c] = env[c].upsilon;
                s.lower[c] = el * env[c].upsilon;
                s.upper[c] = eu * env[c].upsilon;
                s.psi[c] = bounds::psi_asymmetric(proj[c], env[c].upsilon, eu, el);
            }
        }

        omega_c_prev = omega_c;
        e_o_prev = e_o;
        phi_prev = phi;
    }
    out.objective = out.residual.squaredNorm();
    if (derivatives) {
        out.gradient = 2.0 * out.residual_jacobian.transpose() * out.residual;
    }

    if (prediction) {
        StepPrediction& s = (*prediction)[0];
        s.q = q_base_[0];
        s.qd = qd_base_[0];
        s.qdd = qdd_base_[0];
        s.phi = phi_base_[0];
        s.phi_dot = phid_base_[0];
        s.phi_ddot = phidd_base_[0];
        s.segment = first_segment_;
        const kinematics::Pose pose = kinematics::forward_kinematics(chain_, s.q);
        const path_error::PositionDecomposition pd =
            path_error::position_error(pose.position, path, ref_.frames, s.phi);
        s.position = pose.position;
        s.e_p = pd.e;
        s.e_p_par = pd.e_par;
        s.e_o = e_o0_;
        s.e_o_par = e_par0_;
        const auto& frame = ref_.frames[static_cast<size_t>(first_segment_)];
        const Vec3 perp = e_perp1_0_ + e_perp2_0_;
        const std::array<double, kChannels> proj{frame.position.b1.dot(pd.e), frame.position.b2.dot(pd.e),
                                                 frame.orientation.b1.dot(perp), frame.orientation.b2.dot(perp)};
        const auto& envelopes = ref_.envelopes[static_cast<size_t>(first_segment_)];
        for (size_t c = 0; c < kChannels; ++c) {
            const bounds::BoundValue bv = bounds::eval_polynomial(envelopes[c], s.phi);
            const double eu = envelopes[c].e_upper;
            const double el = envelopes[c].e_lower;
            s.projection[c] = proj[c];
            s.upsilon[c] = bv.upsilon;
            s.lower[c] = el * bv.upsilon;
            s.upper[c] = eu * bv.upsilon;
            s.psi[c] = bounds::psi_asymmetric(proj[c], bv.upsilon, eu, el);
        }
    }
}

PlanCycleOutput plan_cycle(const kinematics::KinematicChain& chain, const Reference& reference,
                           const PlannerState& state, const MpcConfig& config) {
    const CycleProblem cp(chain, reference, state, config);
    const int n = chain.dof();
    const int N = config.horizon;

    PlanCycleOutput out;
    const nlp::NlpResult res = nlp::solve(cp.problem(), cp.problem().initial, config.solver);
    out.status = res.status;
    out.converged = res.status == nlp::NlpStatus::converged;
    out.elastic = res.elastic_used;
    out.iterations = res.iterations;
    out.kkt_residual = res.kkt_residual;
    out.max_violation = res.max_violation;
    out.wall_time = res.wall_time;
    out.solution = res.z;

    if (res.status == nlp::NlpStatus::infeasible) {
        out.braking = true;
        out.solution = VectorXd::Zero(cp.dim());
        const VectorXd brake = (-2.0 / config.Ts * state.x.acc - state.u_prev)
                                   .cwiseMax(-config.limits.jerk_max)
                                   .cwiseMin(config.limits.jerk_max);
        const double vbrake = std::clamp(-2.0 / config.Ts * state.xi.acc(0) - state.v_prev,
                                         -config.limits.path_jerk_max, config.limits.path_jerk_max);
        for (int k = 0; k < N; ++k) {
            out.solution.segment(k * n, n) = brake;
            out.solution(N * n + k) = vbrake;
        }
    }
    out.u1 = out.solution.head(n);
    out.v1 = out.solution(N * n);
    nlp::NlpEvaluation eval;
    cp.evaluate(out.solution, false, eval, &out.prediction);
    return out;
}

PlannerState advance(const kinematics::KinematicChain& chain, const PlannerState& state,
                     const PlanCycleOutput& output, const MpcConfig& config) {
    const int n = chain.dof();
    const int N = config.horizon;
    const dynamics::DiscreteLTI joint = dynamics::discretize(config.Ts, n);
    const dynamics::DiscreteLTI path = dynamics::discretize(config.Ts, 1);

    PlannerState next = state;
    next.x = dynamics::step(joint, state.x, state.u_prev, output.u1);
    next.xi = dynamics::step(path, state.xi, VectorXd::Constant(1, state.v_prev), VectorXd::Constant(1, output.v1));
    next.u_prev = output.u1;
    next.v_prev = output.v1;
    next.t = state.t + config.Ts;

    const Vec3 w0 = kinematics::geometric_jacobian(chain, state.x.pos).bottomRows<3>() * state.x.vel;
    const Vec3 w1 = kinematics::geometric_jacobian(chain, next.x.pos).bottomRows<3>() * next.x.vel;
    next.omega_c_integral = state.omega_c_integral + 0.5 * config.Ts * (w0 + w1);

    // Shift: drop the applied input and repeat the last one.
    const VectorXd& z = output.solution;
    VectorXd warm(z.size());
    for (int k = 0; k < N; ++k) {
        const int src = std::min(k + 1, N - 1);
        warm.segment(k * n, n) = z.segment(src * n, n);
        warm(N * n + k) = z(N * n + src);
    }
    next.warm_start = warm;
    return next;
}

Reference replan(const Reference& current, const PlannerState& state, const ReplanRequest& request) {
    const refpath::PiecewisePath& old = current.path;
    const auto& old_vias = old.via_poses();
    const auto& new_vias = request.vias;
    if (new_vias.size() < 2 || request.specs.size() + 1 != new_vias.size()) {
        throw std::invalid_argument("replanned path needs one bound specification per segment");
    }
    const auto same = [](const refpath::ViaPose& a, const refpath::ViaPose& b) {
        return a.position == b.position && a.orientation.v == b.orientation.v;
    };
    size_t prefix = 0;
    while (prefix < old_vias.size() && prefix < new_vias.size() && same(old_vias[prefix], new_vias[prefix])) {
        ++prefix;
    }
    bool same_specs = request.specs.size() == current.specs.size();
    for (size_t l = 0; same_specs && l < request.specs.size(); ++l) {
        const SegmentBoundSpec& a = request.specs[l];
        const SegmentBoundSpec& b = current.specs[l];
        same_specs = a.desired_position == b.desired_position && a.desired_orientation == b.desired_orientation;
        for (size_t c = 0; same_specs && c < kChannels; ++c) {
            const ChannelSpec& x = a.channels[c];
            const ChannelSpec& y = b.channels[c];
            same_specs = x.upsilon_max == y.upsilon_max && x.slope == y.slope && x.eps == y.eps &&
                         x.e_upper == y.e_upper && x.e_lower == y.e_lower;
        }
    }
    if (prefix == old_vias.size() && prefix == new_vias.size() && same_specs) {
        Reference ref = current;
        ref.revision = current.revision + 1;
        return ref;
    }
    if (prefix == 0) {
        throw std::invalid_argument("replanned path must start at the original start pose");
    }

    const double phi_dev = old.via_phis()[prefix - 1];
    const double phi_split =
        std::clamp(std::max({state.phi(), phi_dev, request.deviation_phi.value_or(0.0)}), 0.0, old.length());
    constexpr double kSameVia = 1e-9;

    std::vector<refpath::ViaPose> vias;
    std::vector<SegmentBoundSpec> specs;
    std::vector<std::array<bounds::BoundSegment, kChannels>> env;
    size_t keep = 0;  // old vias strictly before the split
    while (keep < old_vias.size() && old.via_phis()[keep] < phi_split - kSameVia) {
        ++keep;
    }
    for (size_t k = 0; k < keep; ++k) {
        vias.push_back(old_vias[k]);
    }
    for (size_t l = 0; l + 1 < keep; ++l) {
        specs.push_back(current.specs[l]);
        env.push_back(current.envelopes[l]);
    }
    const bool at_old_via = keep < old_vias.size() && std::abs(old.via_phis()[keep] - phi_split) <= kSameVia;
    std::array<std::optional<double>, kChannels> start_eps{};
    if (at_old_via) {
        vias.push_back(old_vias[keep]);
        if (keep > 0) {
            specs.push_back(current.specs[keep - 1]);
            env.push_back(current.envelopes[keep - 1]);
        }
        const auto& e = current.envelopes[std::min(keep, current.envelopes.size() - 1)];
        for (size_t c = 0; c < kChannels; ++c) {
            start_eps[c] = keep < current.envelopes.size() ? e[c].eps_start : e[c].eps_end;
        }
    } else {
        const int l = old.segment_index(phi_split);
        refpath::ViaPose split;
        split.position = old.eval_position(phi_split).point;
        split.orientation = lie::log(lie::RotationMatrix{old.reference_rotation(phi_split)});
        vias.push_back(split);
        specs.push_back(current.specs[static_cast<size_t>(l)]);
        auto truncated = current.envelopes[static_cast<size_t>(l)];
        for (size_t c = 0; c < kChannels; ++c) {
            start_eps[c] = bounds::eval_polynomial(truncated[c], phi_split).upsilon;
            truncated[c].phi_end = phi_split;
            truncated[c].eps_end = *start_eps[c];
        }
        env.push_back(truncated);
    }
    const size_t first_new = std::max<size_t>(prefix, 1);
    for (size_t k = first_new; k < new_vias.size(); ++k) {
        vias.push_back(new_vias[k]);
        specs.push_back(request.specs[k - 1]);
    }

    refpath::PiecewisePath path = refpath::PiecewisePath::build(vias);
    // Kept envelopes follow the recomputed via coordinates.
    for (size_t l = 0; l < env.size(); ++l) {
        const auto& seg = path.position_segments()[l];
        for (auto& b : env[l]) {
            b.phi_start = seg.phi_start;
            b.phi_end = seg.phi_end;
        }
    }
    for (size_t l = env.size(); l < specs.size(); ++l) {
        const auto& seg = path.position_segments()[l];
        env.push_back(fit_segment(specs[l], seg.phi_start, seg.phi_end,
                                  l == env.size() ? start_eps : std::array<std::optional<double>, kChannels>{}));
    }
    Reference ref = assemble_reference(std::move(path), std::move(specs), std::move(env), current.revision + 1);
    return ref;
}

TrajectoryLog run_loop(const kinematics::KinematicChain& chain, Reference reference, PlannerState state,
                       const MpcConfig& config, const std::vector<ReplanEvent>& events) {
    config.validate(chain.dof());
    TrajectoryLog log;
    std::vector<bool> fired(events.size(), false);
    std::array<double, kChannels> carried_proj{};
    bool have_carried = false;
    std::optional<PlannerState> previous;
    int previous_revision = -1;

    for (int step = 0; step <= config.max_steps; ++step) {
        for (size_t e = 0; e < events.size(); ++e) {
            if (fired[e]) {
                continue;
            }
            const ReplanEvent& ev = events[e];
            const bool due = (ev.trigger_time && state.t >= *ev.trigger_time - 1e-9) ||
                             (ev.trigger_phi && state.phi() >= *ev.trigger_phi);
            if (due) {
                reference = replan(reference, state, ev.request);
                fired[e] = true;
                ++log.replans;
            }
        }

        const PoseErrors err = pose_errors(chain, reference, state.x.pos, state.phi());
        const double phi_f = reference.path.length();
        const auto& vphi = reference.path.via_phis();
        if (previous && previous_revision == reference.revision) {
            for (size_t l = 1; l + 1 < vphi.size(); ++l) {
                if (previous->phi() < vphi[l] && state.phi() >= vphi[l]) {
                    ViaCrossing c = locate_crossing(chain, reference, *previous, state, config, l);
                    c.t = state.t;
                    c.record = log.records.size();
                    log.via_crossings.push_back(c);
                }
            }
        }

        LogRecord rec;
        rec.t = state.t;
        rec.q = state.x.pos;
        rec.qd = state.x.vel;
        rec.qdd = state.x.acc;
        rec.u = state.u_prev;
        rec.phi = state.phi();
        rec.phi_dot = state.phi_dot();
        rec.position = kinematics::forward_kinematics(chain, state.x.pos).position;
        rec.e_o = err.e_o;
        rec.e_p_norm = err.position.e.norm();
        rec.e_o_norm = err.e_o.norm();
        rec.e_p_par_norm = err.position.e_par.norm();
        rec.segment = reference.path.segment_index(state.phi());
        rec.revision = reference.revision;

        const bool done = state.phi() >= phi_f - config.exit_phi_gap && rec.e_p_norm < config.exit_position &&
                          rec.e_o_norm < config.exit_orientation && state.phi_dot() < config.exit_phi_dot;
        if (done || step == config.max_steps) {
            // Final record carries the model projections of the last applied step.
            const CycleProblem cp(chain, reference, state, config);
            std::vector<StepPrediction> pred;
            nlp::NlpEvaluation ev;
            cp.evaluate(VectorXd::Zero(cp.dim()), false, ev, &pred);
            rec.projection = have_carried ? carried_proj : pred[0].projection;
            rec.upsilon = pred[0].upsilon;
            rec.lower = pred[0].lower;
            rec.upper = pred[0].upper;
            rec.e_o_par_norm = pred[0].e_o_par.norm();
            rec.status = done ? "finished" : "budget";
            log.records.push_back(rec);
            log.finished = done;
            log.duration = state.t;
            log.status = done ? "finished" : "step budget exhausted";
            break;
        }

        const PlanCycleOutput out = plan_cycle(chain, reference, state, config);
        const StepPrediction& p0 = out.prediction[0];
        rec.projection = have_carried ? carried_proj : p0.projection;
        rec.upsilon = p0.upsilon;
        rec.lower = p0.lower;
        rec.upper = p0.upper;
        rec.e_o_par_norm = p0.e_o_par.norm();
        rec.iterations = out.iterations;
        rec.solve_time = out.wall_time;
        rec.status = out.braking ? "braking" : nlp::to_string(out.status);
        rec.cycle_converged = out.converged;
        rec.cycle_elastic = out.elastic;
        rec.cycle_failed = out.braking || out.max_violation > config.solver.feas_tol;
        double max_psi = -kInf;
        for (size_t i = 1; i < out.prediction.size(); ++i) {
            for (double v : out.prediction[i].psi) {
                max_psi = std::max(max_psi, v);
            }
        }
        rec.max_psi = max_psi;
        log.failed_cycles += rec.cycle_failed ? 1 : 0;
        log.elastic_cycles += out.elastic ? 1 : 0;
        log.records.push_back(rec);

        carried_proj = out.prediction[1].projection;
        have_carried = true;
        previous = state;
        previous_revision = reference.revision;
        state = advance(chain, state, out, config);
    }
    return log;
}

}  // namespace pathmpc::planner
