#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pathmpc/bounds.hpp"
#include "pathmpc/dynamics.hpp"
#include "pathmpc/kinematics.hpp"
#include "pathmpc/nlp.hpp"
#include "pathmpc/path_error.hpp"
#include "pathmpc/refpath.hpp"

namespace pathmpc::planner {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;

/// Orthogonal error channels: position along b_p1, b_p2 and orientation
/// about b_o1, b_o2.
enum Channel : int { kPos1 = 0, kPos2 = 1, kRot1 = 2, kRot2 = 3 };
constexpr int kChannels = 4;

struct Weights {
    double tangential = 1000.0;
    double error_rate = 0.5;
    double nullspace = 0.05;
    double joint_jerk = 1e-4;
    double path_jerk = 50.0;
    double path_state = 50.0;  // W_xi = path_state * diag(w_xi, 1, 1)
};

struct Limits {
    VectorXd q_min;
    VectorXd q_max;
    VectorXd qd_max;
    VectorXd qdd_max;
    VectorXd jerk_max;
    double path_jerk_max = 10.0;
};

struct MpcConfig {
    int horizon = 10;
    double Ts = 0.1;
    Weights weights;
    double path_weight = 1.0;  // w_xi * phi_f
    Limits limits;
    int lookahead = 4;
    double sigmoid_offset = 0.02;
    double sigmoid_gain = 100.0;
    double exit_position = 2e-3;
    double exit_orientation = 1.0 * 3.14159265358979323846 / 180.0;
    double exit_phi_dot = 1e-3;
    double exit_phi_gap = 1e-4;
    int max_steps = 600;
    nlp::NlpOptions solver;

    void validate(int dof) const;
};

/// Envelope parameters of one channel on one segment.
struct ChannelSpec {
    double upsilon_max = 0.05;
    double slope = 0.1;  // s0 = slope, sf = -slope
    double eps = 1e-3;
    double e_upper = 1.0;
    double e_lower = -1.0;
};

struct SegmentBoundSpec {
    std::array<ChannelSpec, kChannels> channels;
    std::optional<Vec3> desired_position;
    std::optional<Vec3> desired_orientation;

    /// Defaults: 0.05 m and 5 deg peaks, 1 mm and 0.5 deg relaxations.
    static SegmentBoundSpec defaults(double slope = 0.1);
};

/// Reference path with its envelopes and frames.
struct Reference {
    refpath::PiecewisePath path;
    std::vector<SegmentBoundSpec> specs;
    std::vector<std::array<bounds::BoundSegment, kChannels>> envelopes;
    path_error::PathFrames frames;
    int revision = 0;

    int segment_count() const { return path.segment_count(); }
};

Reference make_reference(const std::vector<refpath::ViaPose>& vias, const std::vector<SegmentBoundSpec>& specs);

struct PlannerState {
    dynamics::StateTriple x;
    VectorXd u_prev;
    dynamics::StateTriple xi;
    double v_prev = 0.0;
    Vec3 omega_c_integral = Vec3::Zero();
    double t = 0.0;
    VectorXd warm_start;  // empty: cold start

    static PlannerState at_rest(const VectorXd& q);
    double phi() const { return xi.pos(0); }
    double phi_dot() const { return xi.vel(0); }
};

struct StepPrediction {
    VectorXd q;
    VectorXd qd;
    VectorXd qdd;
    double phi = 0.0;
    double phi_dot = 0.0;
    double phi_ddot = 0.0;
    int segment = 0;
    Vec3 position = Vec3::Zero();
    Vec3 e_p = Vec3::Zero();
    Vec3 e_p_par = Vec3::Zero();
    Vec3 e_o = Vec3::Zero();
    Vec3 e_o_par = Vec3::Zero();
    std::array<double, kChannels> projection{};
    std::array<double, kChannels> upsilon{};
    std::array<double, kChannels> lower{};
    std::array<double, kChannels> upper{};
    std::array<double, kChannels> psi{};
};

struct PlanCycleOutput {
    VectorXd u1;
    double v1 = 0.0;
    std::vector<StepPrediction> prediction;  // steps 0..N
    VectorXd solution;
    nlp::NlpStatus status = nlp::NlpStatus::max_iter;
    bool converged = false;
    bool elastic = false;
    bool braking = false;
    int iterations = 0;
    double kkt_residual = 0.0;
    double max_violation = 0.0;
    double wall_time = 0.0;
};

/// Single-shooting problem over the horizon for one cycle.
class CycleProblem {
public:
    CycleProblem(const kinematics::KinematicChain& chain, const Reference& reference, const PlannerState& state,
                 const MpcConfig& config);

    const nlp::NlpProblem& problem() const { return problem_; }
    int dim() const { return problem_.dim; }

    /// Evaluates the horizon; fills predictions for steps 0..N when given.
    void evaluate(const VectorXd& z, bool derivatives, nlp::NlpEvaluation& out,
                  std::vector<StepPrediction>* prediction = nullptr) const;

    double sigmoid(double phi) const;
    int first_segment() const { return first_segment_; }
    int last_segment() const { return last_segment_; }
    double phi_limit() const { return phi_limit_; }

private:
    const kinematics::KinematicChain& chain_;
    const Reference& ref_;
    const MpcConfig& cfg_;
    int n_;
    int N_;
    int dim_;
    int first_segment_;
    int last_segment_;
    double phi_limit_;
    double phi_final_;

    std::vector<VectorXd> q_base_, qd_base_, qdd_base_;
    std::vector<MatrixXd> Dq_, Dqd_, Dqdd_;
    std::vector<double> phi_base_, phid_base_, phidd_base_;
    std::vector<Eigen::RowVectorXd> Dphi_, Dphid_, Dphidd_;

    StepPrediction initial_;
    Vec3 e_o0_;
    Eigen::Matrix3d Jl0_, Jr0_;
    Vec3 omega_r0_;
    Vec3 omega_c0_;
    Vec3 e_par0_, e_perp1_0_, e_perp2_0_;
    std::vector<path_error::ProjectionVectors> rho_;
    MatrixXd Pn0_;

    nlp::NlpProblem problem_;
};

/// Runs one receding-horizon cycle without advancing the state.
PlanCycleOutput plan_cycle(const kinematics::KinematicChain& chain, const Reference& reference,
                           const PlannerState& state, const MpcConfig& config);

/// Applies the first inputs of a cycle under ideal tracking.
PlannerState advance(const kinematics::KinematicChain& chain, const PlannerState& state,
                     const PlanCycleOutput& output, const MpcConfig& config);

struct ReplanRequest {
    std::vector<refpath::ViaPose> vias;
    std::vector<SegmentBoundSpec> specs;
    std::optional<double> deviation_phi;
};

/// Swaps the remaining path; the traversed part and its envelopes are kept.
Reference replan(const Reference& current, const PlannerState& state, const ReplanRequest& request);

struct ReplanEvent {
    std::optional<double> trigger_time;
    std::optional<double> trigger_phi;
    ReplanRequest request;
};

struct LogRecord {
    double t = 0.0;
    VectorXd q, qd, qdd, u;
    double phi = 0.0;
    double phi_dot = 0.0;
    Vec3 position = Vec3::Zero();
    Vec3 e_o = Vec3::Zero();  // exact error vector
    double e_p_par_norm = 0.0;
    double e_o_par_norm = 0.0;
    double e_p_norm = 0.0;
    double e_o_norm = 0.0;
    std::array<double, kChannels> projection{};
    std::array<double, kChannels> upsilon{};
    std::array<double, kChannels> lower{};
    std::array<double, kChannels> upper{};
    int segment = 0;
    int iterations = 0;
    double solve_time = 0.0;
    int revision = 0;
    std::string status;
    bool cycle_converged = false;
    bool cycle_failed = false;
    bool cycle_elastic = false;
    double max_psi = 0.0;  // over the horizon of the cycle planned at t
};

/// Passage through an interior via-point. The record is the first logged
/// step at or beyond it; the exact quantities come from the continuous
/// trajectory at the instant phi equals the via coordinate.
struct ViaCrossing {
    double t = 0.0;
    size_t record = 0;
    int via = 0;
    double via_phi = 0.0;
    double t_exact = 0.0;
    std::array<double, kChannels> projection{};  // exact orthogonal components
    std::array<double, kChannels> eps{};         // envelope values at the via
};

struct TrajectoryLog {
    std::vector<LogRecord> records;
    std::vector<ViaCrossing> via_crossings;
    bool finished = false;
    double duration = 0.0;
    int failed_cycles = 0;
    int elastic_cycles = 0;
    int replans = 0;
    std::string status;
};

/// Closed loop until the end of the path is reached or max_steps elapse.
TrajectoryLog run_loop(const kinematics::KinematicChain& chain, Reference reference, PlannerState state,
                       const MpcConfig& config, const std::vector<ReplanEvent>& events = {});

/// True errors of the current state against the reference.
struct PoseErrors {
    path_error::PositionDecomposition position;
    Vec3 e_o = Vec3::Zero();
};
PoseErrors pose_errors(const kinematics::KinematicChain& chain, const Reference& reference, const VectorXd& q,
                       double phi);

/// Orthogonal error components of the true pose in the frames of the segment
/// containing phi, channel order as in Channel.
std::array<double, kChannels> exact_projections(const kinematics::KinematicChain& chain, const Reference& reference,
                                                const VectorXd& q, double phi);

}  // namespace pathmpc::planner
