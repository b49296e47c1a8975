#pragma once

#include <Eigen/Dense>

namespace pathmpc::nlp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// min 0.5 x'Hx + g'x  s.t.  Aeq x = beq,  Ain x <= bin.  H must be positive definite.
struct QpProblem {
    MatrixXd H;
    VectorXd g;
    MatrixXd Aeq;
    VectorXd beq;
    MatrixXd Ain;
    VectorXd bin;
};

enum class QpStatus { optimal, infeasible, not_convex, iteration_limit };

struct QpResult {
    VectorXd x;
    VectorXd lambda_eq;  // stationarity: Hx + g + Aeq' lambda_eq + Ain' lambda_in = 0
    VectorXd lambda_in;  // >= 0
    QpStatus status = QpStatus::optimal;
    int active_set_changes = 0;
    double objective = 0.0;
};

/// Dual active-set method of Goldfarb and Idnani on a dense problem.
QpResult solve_qp(const QpProblem& problem, double violation_tol = 1e-12);

}  // namespace pathmpc::nlp
