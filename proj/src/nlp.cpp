#include "pathmpc/nlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pathmpc::nlp {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-10;

struct BoxRows {
    std::vector<int> lower;
    std::vector<int> upper;
};

BoxRows finite_box_rows(const NlpProblem& problem) {
    BoxRows rows;
    for (int i = 0; i < problem.dim; ++i) {
        if (std::isfinite(problem.lower(i))) {
            rows.lower.push_back(i);
        }
        if (std::isfinite(problem.upper(i))) {
            rows.upper.push_back(i);
        }
    }
    return rows;
}

VectorXd linear_values(const NlpProblem& problem, const VectorXd& z) {
    if (problem.A.rows() == 0) {
        return VectorXd(0);
    }
    return problem.A * z - problem.b;
}

// Sum of constraint violations (l1), excluding the box which the iterates keep.
double l1_violation(const NlpProblem& problem, const VectorXd& z, const NlpEvaluation& eval) {
    double v = eval.equality.cwiseAbs().sum();
    v += eval.inequality.cwiseMax(0.0).sum();
    v += linear_values(problem, z).cwiseMax(0.0).sum();
    return v;
}

VectorXd lagrangian_gradient(const NlpProblem& problem, const NlpEvaluation& eval, const Multipliers& mult) {
    VectorXd g = eval.gradient;
    if (problem.n_equality > 0) {
        g += eval.equality_jacobian.transpose() * mult.equality;
    }
    if (problem.n_inequality > 0) {
        g += eval.inequality_jacobian.transpose() * mult.inequality;
    }
    if (problem.A.rows() > 0) {
        g += problem.A.transpose() * mult.linear;
    }
    g -= mult.lower;
    g += mult.upper;
    return g;
}

double kkt_measure(const NlpProblem& problem, const VectorXd& z, const NlpEvaluation& eval, const Multipliers& mult) {
    const double scale = std::max(1.0, eval.gradient.cwiseAbs().maxCoeff());
    const double stationarity = lagrangian_gradient(problem, eval, mult).cwiseAbs().maxCoeff() / scale;

    double dual = 0.0;
    double comp = 0.0;
    const auto check = [&](const VectorXd& lambda, const VectorXd& c) {
        for (Eigen::Index i = 0; i < lambda.size(); ++i) {
            dual = std::max(dual, -lambda(i));
            comp = std::max(comp, std::abs(lambda(i) * std::min(0.0, c(i))));
        }
    };
    check(mult.inequality, eval.inequality);
    check(mult.linear, linear_values(problem, z));
    check(mult.lower, VectorXd(problem.lower - z));
    check(mult.upper, VectorXd(z - problem.upper));
    const double primal = constraint_violation(problem, z, eval);
    return std::max({stationarity, dual / scale, comp / scale, primal});
}

Multipliers zero_multipliers(const NlpProblem& problem) {
    return {VectorXd::Zero(problem.n_equality), VectorXd::Zero(problem.n_inequality), VectorXd::Zero(problem.A.rows()),
            VectorXd::Zero(problem.dim), VectorXd::Zero(problem.dim)};
}

VectorXd clip(const NlpProblem& problem, const VectorXd& z) {
    return z.cwiseMax(problem.lower).cwiseMin(problem.upper);
}

struct Subproblem {
    VectorXd step;
    Multipliers multipliers;
    bool ok = false;
};

Subproblem solve_subproblem(const NlpProblem& problem, const BoxRows& box, const VectorXd& z,
                            const NlpEvaluation& eval, const MatrixXd& H, bool elastic, double penalty) {
    const int n = problem.dim;
    const int mi = problem.n_inequality;
    const int me = problem.n_equality;
    const auto ml = static_cast<int>(problem.A.rows());
    const auto nlo = static_cast<int>(box.lower.size());
    const auto nup = static_cast<int>(box.upper.size());
    const int ns = elastic ? mi + ml + 2 * me : 0;
    const int nv = n + ns;

    QpProblem qp;
    qp.H = MatrixXd::Zero(nv, nv);
    qp.H.topLeftCorner(n, n) = H;
    qp.g = VectorXd::Zero(nv);
    qp.g.head(n) = eval.gradient;
    if (elastic) {
        qp.H.bottomRightCorner(ns, ns).diagonal().setConstant(1e-6);
        qp.g.tail(ns).setConstant(penalty);
    }

    qp.Aeq = MatrixXd::Zero(me, nv);
    qp.beq = VectorXd::Zero(me);
    if (me > 0) {
        qp.Aeq.leftCols(n) = eval.equality_jacobian;
        qp.beq = -eval.equality;
        if (elastic) {
            const int off = n + mi + ml;
            for (int i = 0; i < me; ++i) {
                qp.Aeq(i, off + i) = -1.0;
                qp.Aeq(i, off + me + i) = 1.0;
            }
        }
    }

    const int rows = mi + ml + nlo + nup + ns;
    qp.Ain = MatrixXd::Zero(rows, nv);
    qp.bin = VectorXd::Zero(rows);
    int r = 0;
    if (mi > 0) {
        qp.Ain.block(r, 0, mi, n) = eval.inequality_jacobian;
        qp.bin.segment(r, mi) = -eval.inequality;
        if (elastic) {
            qp.Ain.block(r, n, mi, mi).diagonal().setConstant(-1.0);
        }
        r += mi;
    }
    if (ml > 0) {
        qp.Ain.block(r, 0, ml, n) = problem.A;
        qp.bin.segment(r, ml) = problem.b - problem.A * z;
        if (elastic) {
            qp.Ain.block(r, n + mi, ml, ml).diagonal().setConstant(-1.0);
        }
        r += ml;
    }
    for (int k = 0; k < nlo; ++k, ++r) {
        const int i = box.lower[static_cast<size_t>(k)];
        qp.Ain(r, i) = -1.0;
        qp.bin(r) = z(i) - problem.lower(i);
    }
    for (int k = 0; k < nup; ++k, ++r) {
        const int i = box.upper[static_cast<size_t>(k)];
        qp.Ain(r, i) = 1.0;
        qp.bin(r) = problem.upper(i) - z(i);
    }
    for (int k = 0; k < ns; ++k, ++r) {
        qp.Ain(r, n + k) = -1.0;
    }

    const QpResult res = solve_qp(qp);
    Subproblem sp;
    sp.ok = res.status == QpStatus::optimal;
    if (!sp.ok) {
        return sp;
    }
    sp.step = res.x.head(n);
    sp.multipliers = zero_multipliers(problem);
    sp.multipliers.equality = res.lambda_eq;
    r = 0;
    sp.multipliers.inequality = res.lambda_in.segment(r, mi);
    r += mi;
    sp.multipliers.linear = res.lambda_in.segment(r, ml);
    r += ml;
    for (int k = 0; k < nlo; ++k, ++r) {
        sp.multipliers.lower(box.lower[static_cast<size_t>(k)]) = res.lambda_in(r);
    }
    for (int k = 0; k < nup; ++k, ++r) {
        sp.multipliers.upper(box.upper[static_cast<size_t>(k)]) = res.lambda_in(r);
    }
    return sp;
}

// Closest point to z satisfying the linear rows and boxes; z itself when it already does.
VectorXd restore_linear_feasibility(const NlpProblem& problem, const BoxRows& box, const VectorXd& z) {
    const auto ml = static_cast<int>(problem.A.rows());
    if (ml == 0 || (problem.A * z - problem.b).maxCoeff() <= 0.0) {
        return z;
    }
    const int n = problem.dim;
    const auto nlo = static_cast<int>(box.lower.size());
    const auto nup = static_cast<int>(box.upper.size());
    QpProblem qp;
    qp.H = MatrixXd::Identity(n, n);
    qp.g = VectorXd::Zero(n);
    qp.Aeq = MatrixXd::Zero(0, n);
    qp.beq = VectorXd::Zero(0);
    qp.Ain = MatrixXd::Zero(ml + nlo + nup, n);
    qp.bin = VectorXd::Zero(ml + nlo + nup);
    qp.Ain.topRows(ml) = problem.A;
    qp.bin.head(ml) = problem.b - problem.A * z;
    int r = ml;
    for (int k = 0; k < nlo; ++k, ++r) {
        const int i = box.lower[static_cast<size_t>(k)];
        qp.Ain(r, i) = -1.0;
        qp.bin(r) = z(i) - problem.lower(i);
    }
    for (int k = 0; k < nup; ++k, ++r) {
        const int i = box.upper[static_cast<size_t>(k)];
        qp.Ain(r, i) = 1.0;
        qp.bin(r) = problem.upper(i) - z(i);
    }
    const QpResult res = solve_qp(qp);
    if (res.status != QpStatus::optimal) {
        return z;
    }
    return clip(problem, VectorXd(z + res.x));
}

MatrixXd gauss_newton(const NlpEvaluation& eval, double regularization) {
    MatrixXd H = 2.0 * eval.residual_jacobian.transpose() * eval.residual_jacobian;
    const double reg = regularization * std::max(1.0, H.diagonal().maxCoeff());
    H.diagonal().array() += reg;
    return H;
}

void damped_bfgs(MatrixXd& B, const VectorXd& s, const VectorXd& y) {
    const VectorXd Bs = B * s;
    const double sBs = s.dot(Bs);
    if (sBs <= 0.0) {
        return;
    }
    const double sy = s.dot(y);
    const double theta = sy >= 0.2 * sBs ? 1.0 : 0.8 * sBs / (sBs - sy);
    const VectorXd r = theta * y + (1.0 - theta) * Bs;
    const double sr = s.dot(r);
    if (sr <= 0.0) {
        return;
    }
    B += r * r.transpose() / sr - Bs * Bs.transpose() / sBs;
}

}  // namespace

std::string to_string(NlpStatus status) {
    switch (status) {
        case NlpStatus::converged:
            return "converged";
        case NlpStatus::max_iter:
            return "max_iter";
        case NlpStatus::max_time:
            return "max_time";
        case NlpStatus::infeasible:
            return "infeasible";
    }
    return "unknown";
}

double constraint_violation(const NlpProblem& problem, const VectorXd& z, const NlpEvaluation& eval) {
    double v = 0.0;
    if (eval.equality.size() > 0) {
        v = std::max(v, eval.equality.cwiseAbs().maxCoeff());
    }
    if (eval.inequality.size() > 0) {
        v = std::max(v, eval.inequality.maxCoeff());
    }
    if (problem.A.rows() > 0) {
        v = std::max(v, linear_values(problem, z).maxCoeff());
    }
    if (problem.dim > 0) {
        v = std::max(v, (problem.lower - z).maxCoeff());
        v = std::max(v, (z - problem.upper).maxCoeff());
    }
    return v;
}

double check_kkt(const NlpProblem& problem, const VectorXd& z, const Multipliers& multipliers) {
    NlpEvaluation eval;
    problem.evaluate(z, true, eval);
    return kkt_measure(problem, z, eval, multipliers);
}

NlpResult solve(const NlpProblem& problem, const VectorXd& warm_start, const NlpOptions& options) {
    if (warm_start.size() != problem.dim || problem.lower.size() != problem.dim ||
        problem.upper.size() != problem.dim || (problem.A.rows() > 0 && problem.A.cols() != problem.dim) ||
        problem.b.size() != problem.A.rows()) {
        throw std::invalid_argument("NLP dimension mismatch");
    }
    const auto start = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
    const BoxRows box = finite_box_rows(problem);

    NlpResult result;
    VectorXd z = restore_linear_feasibility(problem, box, clip(problem, warm_start));
    NlpEvaluation eval;
    problem.evaluate(z, true, eval);
    MatrixXd B = MatrixXd::Identity(problem.dim, problem.dim);
    Multipliers mult = zero_multipliers(problem);
    double mu = 1.0;
    result.status = NlpStatus::max_iter;

    for (int iter = 0; iter <= options.max_iter; ++iter) {
        const MatrixXd H = problem.least_squares ? gauss_newton(eval, options.regularization) : B;
        Subproblem sp = solve_subproblem(problem, box, z, eval, H, false, 0.0);
        if (!sp.ok) {
            sp = solve_subproblem(problem, box, z, eval, H, true, options.elastic_penalty);
            if (!sp.ok) {
                result.status = NlpStatus::infeasible;
                break;
            }
            result.elastic_used = true;
        }
        mult = sp.multipliers;
        const double kkt = kkt_measure(problem, z, eval, mult);
        result.kkt_residual = kkt;
        if (kkt <= options.kkt_tol && constraint_violation(problem, z, eval) <= options.feas_tol) {
            result.status = NlpStatus::converged;
            break;
        }
        if (iter == options.max_iter) {
            break;
        }
        if (options.max_time > 0.0 && elapsed() > options.max_time) {
            result.status = NlpStatus::max_time;
            break;
        }

        double lam_max = 0.0;
        for (const VectorXd* v : {&mult.equality, &mult.inequality, &mult.linear}) {
            if (v->size() > 0) {
                lam_max = std::max(lam_max, v->cwiseAbs().maxCoeff());
            }
        }
        mu = std::max(mu, 1.1 * lam_max + 1e-3);

        const VectorXd& d = sp.step;
        const double viol0 = l1_violation(problem, z, eval);
        const double merit0 = eval.objective + mu * viol0;
        double slope = eval.gradient.dot(d) - mu * viol0;
        if (slope > 0.0) {
            slope = -1e-12;
        }

        double alpha = 1.0;
        bool accepted = false;
        NlpEvaluation trial;
        VectorXd z_trial;
        while (alpha >= kMinStep) {
            z_trial = clip(problem, VectorXd(z + alpha * d));
            problem.evaluate(z_trial, false, trial);
            const double merit = trial.objective + mu * l1_violation(problem, z_trial, trial);
            if (std::isfinite(merit) && merit <= merit0 + kArmijo * alpha * slope) {
                result.merit_steps.emplace_back(merit0, merit);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        ++result.iterations;
        if (!accepted) {
            if (d.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + z.cwiseAbs().maxCoeff())) {
                // No progress possible; the point is stationary to working precision.
                if (constraint_violation(problem, z, eval) <= options.feas_tol) {
                    result.status = NlpStatus::converged;
                }
            }
            break;
        }

        NlpEvaluation next;
        problem.evaluate(z_trial, true, next);
        if (!problem.least_squares) {
            const VectorXd s = z_trial - z;
            const VectorXd y = lagrangian_gradient(problem, next, mult) - lagrangian_gradient(problem, eval, mult);
            damped_bfgs(B, s, y);
        }
        z = z_trial;
        eval = std::move(next);
    }

    result.z = z;
    result.multipliers = mult;
    result.objective = eval.objective;
    result.max_violation = constraint_violation(problem, z, eval);
    result.wall_time = elapsed();
    return result;
}

}  // namespace pathmpc::nlp
