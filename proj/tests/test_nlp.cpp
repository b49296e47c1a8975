#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "pathmpc/nlp.hpp"
#include "pathmpc/qp.hpp"

using namespace pathmpc::nlp;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Enumerates every active set of a small inequality QP and keeps the KKT point.
VectorXd brute_force_qp(const MatrixXd& H, const VectorXd& g, const MatrixXd& A, const VectorXd& b) {
    const auto n = g.size();
    const auto m = A.rows();
    VectorXd best;
    double best_f = kInf;
    for (int mask = 0; mask < (1 << m); ++mask) {
        std::vector<int> act;
        for (int i = 0; i < m; ++i) {
            if (mask & (1 << i)) {
                act.push_back(i);
            }
        }
        const auto k = static_cast<Eigen::Index>(act.size());
        if (k > n) {
            continue;
        }
        MatrixXd K = MatrixXd::Zero(n + k, n + k);
        VectorXd rhs(n + k);
        K.topLeftCorner(n, n) = H;
        rhs.head(n) = -g;
        for (Eigen::Index j = 0; j < k; ++j) {
            K.block(0, n + j, n, 1) = A.row(act[static_cast<size_t>(j)]).transpose();
            K.block(n + j, 0, 1, n) = A.row(act[static_cast<size_t>(j)]);
            rhs(n + j) = b(act[static_cast<size_t>(j)]);
        }
        Eigen::FullPivLU<MatrixXd> lu(K);
        if (lu.rank() < n + k) {
            continue;
        }
        const VectorXd sol = lu.solve(rhs);
        const VectorXd x = sol.head(n);
        if ((A * x - b).maxCoeff() > 1e-9 || (k > 0 && sol.tail(k).minCoeff() < -1e-9)) {
            continue;
        }
        const double f = 0.5 * x.dot(H * x) + g.dot(x);
        if (f < best_f) {
            best_f = f;
            best = x;
        }
    }
    return best;
}

NlpProblem quadratic_problem(int dim) {
    NlpProblem p;
    p.dim = dim;
    p.lower = VectorXd::Constant(dim, -kInf);
    p.upper = VectorXd::Constant(dim, kInf);
    p.A = MatrixXd(0, dim);
    p.b = VectorXd(0);
    p.initial = VectorXd::Zero(dim);
    return p;
}

}  // namespace

TEST_CASE("dual active set matches enumeration of active sets") {
    std::mt19937 rng(7);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial % 4;
        const int m = 3 + trial % 6;
        MatrixXd M(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                M(i, j) = nd(rng);
            }
        }
        QpProblem qp;
        qp.H = M * M.transpose() + 0.1 * MatrixXd::Identity(n, n);
        qp.g = VectorXd::NullaryExpr(n, [&] { return nd(rng); });
        qp.Ain = MatrixXd::NullaryExpr(m, n, [&] { return nd(rng); });
        qp.bin = VectorXd::NullaryExpr(m, [&] { return nd(rng); }).cwiseAbs() * 0.3;
        qp.Aeq = MatrixXd(0, n);
        qp.beq = VectorXd(0);
        const QpResult res = solve_qp(qp);
        REQUIRE(res.status == QpStatus::optimal);
        const VectorXd ref = brute_force_qp(qp.H, qp.g, qp.Ain, qp.bin);
        REQUIRE(ref.size() == n);
        CHECK((res.x - ref).norm() < 1e-8);
        const VectorXd stat = qp.H * res.x + qp.g + qp.Ain.transpose() * res.lambda_in;
        CHECK(stat.norm() < 1e-8);
        CHECK(res.lambda_in.minCoeff() >= 0.0);
    }
}

TEST_CASE("equality constrained QP") {
    QpProblem qp;
    qp.H = MatrixXd::Identity(3, 3);
    qp.g = VectorXd::Zero(3);
    qp.Aeq = MatrixXd::Ones(1, 3);
    qp.beq = VectorXd::Constant(1, 3.0);
    qp.Ain = MatrixXd(1, 3);
    qp.Ain << 1, 0, 0;
    qp.bin = VectorXd::Constant(1, 0.5);
    const QpResult res = solve_qp(qp);
    REQUIRE(res.status == QpStatus::optimal);
    CHECK(res.x(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(res.x(1) == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(res.x(2) == doctest::Approx(1.25).epsilon(1e-12));
}

TEST_CASE("infeasible QP is reported") {
    QpProblem qp;
    qp.H = MatrixXd::Identity(1, 1);
    qp.g = VectorXd::Zero(1);
    qp.Aeq = MatrixXd(0, 1);
    qp.beq = VectorXd(0);
    qp.Ain = MatrixXd(2, 1);
    qp.Ain << 1, -1;
    qp.bin = Eigen::Vector2d(-1.0, -1.0);
    CHECK(solve_qp(qp).status == QpStatus::infeasible);
}

TEST_CASE("unconstrained quadratic converges immediately") {
    NlpProblem p = quadratic_problem(3);
    const VectorXd c = (VectorXd(3) << 1.0, -2.0, 0.5).finished();
    p.least_squares = true;
    p.evaluate = [&](const VectorXd& z, bool deriv, NlpEvaluation& out) {
        out.residual = z - c;
        out.objective = out.residual.squaredNorm();
        if (deriv) {
            out.residual_jacobian = MatrixXd::Identity(3, 3);
            out.gradient = 2.0 * out.residual;
        }
    };
    const NlpResult r = solve(p, p.initial);
    CHECK(r.status == NlpStatus::converged);
    CHECK(r.iterations <= 2);
    CHECK((r.z - c).norm() < 1e-8);
}

TEST_CASE("symmetric problem with a single half-plane") {
    NlpProblem p = quadratic_problem(2);
    p.n_inequality = 1;
    p.evaluate = [](const VectorXd& z, bool deriv, NlpEvaluation& out) {
        out.objective = z.squaredNorm();
        out.inequality = VectorXd::Constant(1, 1.0 - z.sum());
        if (deriv) {
            out.gradient = 2.0 * z;
            out.inequality_jacobian = -MatrixXd::Ones(1, 2);
        }
    };
    const NlpResult r = solve(p, p.initial);
    CHECK(r.status == NlpStatus::converged);
    CHECK(r.z(0) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(r.z(1) == doctest::Approx(0.5).epsilon(1e-7));
    CHECK(check_kkt(p, r.z, r.multipliers) <= 1e-6);
}

TEST_CASE("Rosenbrock in a box") {
    NlpProblem p = quadratic_problem(2);
    p.lower = VectorXd::Constant(2, -2.0);
    p.upper = VectorXd::Constant(2, 2.0);
    p.least_squares = true;
    p.evaluate = [](const VectorXd& z, bool deriv, NlpEvaluation& out) {
        out.residual = Eigen::Vector2d(10.0 * (z(1) - z(0) * z(0)), 1.0 - z(0));
        out.objective = out.residual.squaredNorm();
        if (deriv) {
            out.residual_jacobian = MatrixXd(2, 2);
            out.residual_jacobian << -20.0 * z(0), 10.0, -1.0, 0.0;
            out.gradient = 2.0 * out.residual_jacobian.transpose() * out.residual;
        }
    };
    const VectorXd start = (VectorXd(2) << -1.2, 1.0).finished();
    const NlpResult r = solve(p, start);
    CHECK(r.status == NlpStatus::converged);
    CHECK(std::abs(r.z(0) - 1.0) < 1e-6);
    CHECK(std::abs(r.z(1) - 1.0) < 1e-6);
    for (const auto& [before, after] : r.merit_steps) {
        CHECK(after <= before);
    }
}

TEST_CASE("quasi-Newton path on a nonlinear constraint") {
    // min (z0-2)^2 + (z1-1)^2  s.t.  z0^2 + z1^2 <= 1  -> projection onto the disk
    NlpProblem p = quadratic_problem(2);
    p.n_inequality = 1;
    p.evaluate = [](const VectorXd& z, bool deriv, NlpEvaluation& out) {
        out.objective = (z(0) - 2.0) * (z(0) - 2.0) + (z(1) - 1.0) * (z(1) - 1.0);
        out.inequality = VectorXd::Constant(1, z.squaredNorm() - 1.0);
        if (deriv) {
            out.gradient = Eigen::Vector2d(2.0 * (z(0) - 2.0), 2.0 * (z(1) - 1.0));
            out.inequality_jacobian = 2.0 * z.transpose();
        }
    };
    const NlpResult r = solve(p, p.initial);
    CHECK(r.status == NlpStatus::converged);
    CHECK((r.z - Eigen::Vector2d(2.0, 1.0) / std::sqrt(5.0)).norm() < 1e-6);
}

TEST_CASE("KKT residual is large away from the optimum") {
    NlpProblem p = quadratic_problem(2);
    p.evaluate = [](const VectorXd& z, bool deriv, NlpEvaluation& out) {
        out.objective = z.squaredNorm();
        if (deriv) {
            out.gradient = 2.0 * z;
        }
    };
    Multipliers m{VectorXd(0), VectorXd(0), VectorXd(0), VectorXd::Zero(2), VectorXd::Zero(2)};
    CHECK(check_kkt(p, Eigen::Vector2d(0.3, -0.2), m) > 1e-6);
    CHECK(check_kkt(p, Eigen::Vector2d(0.0, 0.0), m) <= 1e-6);
}

TEST_CASE("infeasible linearization triggers the elastic mode") {
    // z0 >= 1 and z0 <= -1 cannot both hold
    NlpProblem p = quadratic_problem(1);
    p.n_inequality = 2;
    p.evaluate = [](const VectorXd& z, bool deriv, NlpEvaluation& out) {
        out.objective = z.squaredNorm();
        out.inequality = Eigen::Vector2d(1.0 - z(0), z(0) + 1.0);
        if (deriv) {
            out.gradient = 2.0 * z;
            out.inequality_jacobian = Eigen::Vector2d(-1.0, 1.0);
        }
    };
    NlpOptions opt;
    opt.max_iter = 5;
    const NlpResult r = solve(p, p.initial, opt);
    CHECK(r.elastic_used);
    CHECK(r.status != NlpStatus::converged);
}

TEST_CASE("repeated solves are bitwise identical") {
    NlpProblem p = quadratic_problem(2);
    p.lower = VectorXd::Constant(2, -2.0);
    p.upper = VectorXd::Constant(2, 2.0);
    p.least_squares = true;
    p.evaluate = [](const VectorXd& z, bool deriv, NlpEvaluation& out) {
        out.residual = Eigen::Vector2d(10.0 * (z(1) - z(0) * z(0)), 1.0 - z(0));
        out.objective = out.residual.squaredNorm();
        if (deriv) {
            out.residual_jacobian = MatrixXd(2, 2);
            out.residual_jacobian << -20.0 * z(0), 10.0, -1.0, 0.0;
            out.gradient = 2.0 * out.residual_jacobian.transpose() * out.residual;
        }
    };
    const VectorXd start = (VectorXd(2) << -1.2, 1.0).finished();
    const NlpResult a = solve(p, start);
    const NlpResult b = solve(p, start);
    CHECK(a.iterations == b.iterations);
    CHECK(a.z(0) == b.z(0));
    CHECK(a.z(1) == b.z(1));
}
