#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pathmpc/qp.hpp"

namespace pathmpc::nlp {

/// Everything the solver needs at one point. Constraint conventions:
/// equality(z) = 0, inequality(z) <= 0.
struct NlpEvaluation {
    double objective = 0.0;
    VectorXd gradient;
    VectorXd residual;            // set when the objective is ||residual||^2
    MatrixXd residual_jacobian;
    VectorXd equality;
    MatrixXd equality_jacobian;
    VectorXd inequality;
    MatrixXd inequality_jacobian;
};

struct NlpProblem {
    int dim = 0;
    int n_equality = 0;
    int n_inequality = 0;
    /// True when evaluate fills residual (and residual_jacobian when asked for
    /// derivatives); objective and gradient must be filled in either case.
    bool least_squares = false;
    /// Fills values always and Jacobians/gradient when derivatives is true.
    std::function<void(const VectorXd& z, bool derivatives, NlpEvaluation& out)> evaluate;
    MatrixXd A;  // linear inequalities A z <= b
    VectorXd b;
    VectorXd lower;  // box; +-infinity allowed
    VectorXd upper;
    VectorXd initial;
};

struct NlpOptions {
    double kkt_tol = 1e-6;
    double feas_tol = 1e-8;
    int max_iter = 100;
    double max_time = 0.0;  // seconds; <= 0 disables the wall-clock budget
    double regularization = 1e-9;
    double elastic_penalty = 1e4;
};

enum class NlpStatus { converged, max_iter, max_time, infeasible };

std::string to_string(NlpStatus status);

struct Multipliers {
    VectorXd equality;
    VectorXd inequality;
    VectorXd linear;
    VectorXd lower;
    VectorXd upper;
};

struct NlpResult {
    VectorXd z;
    Multipliers multipliers;
    NlpStatus status = NlpStatus::max_iter;
    bool elastic_used = false;
    double kkt_residual = 0.0;
    double max_violation = 0.0;
    double objective = 0.0;
    int iterations = 0;
    double wall_time = 0.0;
    /// Merit values before and after each accepted step, same penalty parameter.
    std::vector<std::pair<double, double>> merit_steps;
};

/// Maximum violation of all constraints at z.
double constraint_violation(const NlpProblem& problem, const VectorXd& z, const NlpEvaluation& eval);

/// Combined scaled stationarity, primal feasibility and complementarity.
double check_kkt(const NlpProblem& problem, const VectorXd& z, const Multipliers& multipliers);

/// SQP with a Gauss-Newton or damped BFGS Hessian and an l1 merit line search.
NlpResult solve(const NlpProblem& problem, const VectorXd& warm_start, const NlpOptions& options = {});

}  // namespace pathmpc::nlp
