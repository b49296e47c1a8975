#include "pathmpc/qp.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace pathmpc::nlp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Working storage of the dual method. Constraints are n'x + c0 >= 0
// (inequalities) or n'x + c0 = 0 (equalities), one per column of N.
class DualActiveSet {
public:
    DualActiveSet(const MatrixXd& G, const VectorXd& g, MatrixXd N, VectorXd c0, int n_eq, double tol)
        : n_(static_cast<int>(g.size())),
          m_(static_cast<int>(c0.size())),
          p_(n_eq),
          N_(std::move(N)),
          c0_(std::move(c0)),
          tol_(tol),
          g_(g),
          G_(G) {}

    QpStatus run() {
        Eigen::LLT<MatrixXd> llt(G_);
        if (llt.info() != Eigen::Success) {
            return QpStatus::not_convex;
        }
        const MatrixXd L = llt.matrixL();
        J_ = L.transpose().triangularView<Eigen::Upper>().solve(MatrixXd::Identity(n_, n_));
        R_ = MatrixXd::Zero(n_, n_);
        r_norm_ = 1.0;
        x_ = -llt.solve(g_);
        u_ = VectorXd::Zero(m_ + 1);
        active_.assign(static_cast<size_t>(m_ + 1), -1);
        iq_ = 0;
        d_.resize(n_);
        z_.resize(n_);
        r_.resize(n_ + 1);

        for (int i = 0; i < p_; ++i) {
            const VectorXd np = N_.col(i);
            d_ = J_.transpose() * np;
            update_z();
            update_r();
            double t2 = 0.0;
            const double zn = z_.dot(np);
            if (z_.squaredNorm() > kEps) {
                t2 = (-np.dot(x_) - c0_(i)) / zn;
            }
            x_ += t2 * z_;
            u_(iq_) = t2;
            for (int k = 0; k < iq_; ++k) {
                u_(k) -= t2 * r_(k);
            }
            active_[static_cast<size_t>(iq_)] = i;
            if (!add_constraint()) {
                return QpStatus::infeasible;
            }
        }

        std::vector<bool> inactive(static_cast<size_t>(m_), true);
        std::vector<bool> excluded(static_cast<size_t>(m_), false);
        VectorXd s(m_);
        const int max_changes = 20 * (n_ + m_) + 100;

        while (true) {
            if (changes_ > max_changes) {
                return QpStatus::iteration_limit;
            }
            for (int i = p_; i < m_; ++i) {
                inactive[static_cast<size_t>(i)] = true;
                excluded[static_cast<size_t>(i)] = false;
            }
            for (int k = p_; k < iq_; ++k) {
                inactive[static_cast<size_t>(active_[static_cast<size_t>(k)])] = false;
            }
            for (int i = p_; i < m_; ++i) {
                s(i) = N_.col(i).dot(x_) + c0_(i);
            }
            const VectorXd u_old = u_;
            const std::vector<int> active_old = active_;
            const int iq_old = iq_;
            const VectorXd x_old = x_;

            bool restart = false;
            while (!restart) {
                int ip = -1;
                double worst = -tol_;
                for (int i = p_; i < m_; ++i) {
                    const auto ui = static_cast<size_t>(i);
                    if (inactive[ui] && !excluded[ui] && s(i) < worst) {
                        worst = s(i);
                        ip = i;
                    }
                }
                if (ip < 0) {
                    return QpStatus::optimal;
                }
                const VectorXd np = N_.col(ip);
                u_(iq_) = 0.0;
                active_[static_cast<size_t>(iq_)] = ip;

                while (true) {
                    ++changes_;
                    if (changes_ > max_changes) {
                        return QpStatus::iteration_limit;
                    }
                    d_ = J_.transpose() * np;
                    update_z();
                    update_r();

                    double t1 = kInf;
                    int drop = -1;
                    for (int k = p_; k < iq_; ++k) {
                        if (r_(k) > 0.0) {
                            const double ratio = u_(k) / r_(k);
                            if (ratio < t1) {
                                t1 = ratio;
                                drop = active_[static_cast<size_t>(k)];
                            }
                        }
                    }
                    double t2 = kInf;
                    if (z_.squaredNorm() > kEps) {
                        t2 = -s(ip) / z_.dot(np);
                    }
                    const double t = std::min(t1, t2);
                    if (!std::isfinite(t)) {
                        return QpStatus::infeasible;
                    }
                    if (!std::isfinite(t2)) {
                        for (int k = 0; k < iq_; ++k) {
                            u_(k) -= t * r_(k);
                        }
                        u_(iq_) += t;
                        inactive[static_cast<size_t>(drop)] = true;
                        delete_constraint(drop);
                        continue;
                    }
                    x_ += t * z_;
                    for (int k = 0; k < iq_; ++k) {
                        u_(k) -= t * r_(k);
                    }
                    u_(iq_) += t;
                    if (t == t2) {
                        if (!add_constraint()) {
                            excluded[static_cast<size_t>(ip)] = true;
                            u_ = u_old;
                            active_ = active_old;
                            iq_ = iq_old;
                            x_ = x_old;
                            rebuild_factors();
                            for (int i = p_; i < m_; ++i) {
                                inactive[static_cast<size_t>(i)] = true;
                            }
                            for (int k = p_; k < iq_; ++k) {
                                inactive[static_cast<size_t>(active_[static_cast<size_t>(k)])] = false;
                            }
                            for (int i = p_; i < m_; ++i) {
                                s(i) = N_.col(i).dot(x_) + c0_(i);
                            }
                            break;
                        }
                        inactive[static_cast<size_t>(ip)] = false;
                        restart = true;
                        break;
                    }
                    inactive[static_cast<size_t>(drop)] = true;
                    delete_constraint(drop);
                    s(ip) = np.dot(x_) + c0_(ip);
                }
            }
        }
    }

    const VectorXd& x() const { return x_; }
    int changes() const { return changes_; }

    // Multiplier of constraint column i (zero when inactive).
    VectorXd multipliers() const {
        VectorXd u = VectorXd::Zero(m_);
        for (int k = 0; k < iq_; ++k) {
            u(active_[static_cast<size_t>(k)]) = u_(k);
        }
        return u;
    }

private:
    void update_z() {
        z_.setZero();
        for (int j = iq_; j < n_; ++j) {
            z_ += J_.col(j) * d_(j);
        }
    }

    void update_r() {
        for (int i = iq_ - 1; i >= 0; --i) {
            double sum = 0.0;
            for (int j = i + 1; j < iq_; ++j) {
                sum += R_(i, j) * r_(j);
            }
            r_(i) = (d_(i) - sum) / R_(i, i);
        }
    }

    bool add_constraint() {
        for (int j = n_ - 1; j >= iq_ + 1; --j) {
            double cc = d_(j - 1);
            double ss = d_(j);
            const double h = std::hypot(cc, ss);
            if (h == 0.0) {
                continue;
            }
            d_(j) = 0.0;
            ss /= h;
            cc /= h;
            if (cc < 0.0) {
                cc = -cc;
                ss = -ss;
                d_(j - 1) = -h;
            } else {
                d_(j - 1) = h;
            }
            const double xny = ss / (1.0 + cc);
            for (int k = 0; k < n_; ++k) {
                const double t1 = J_(k, j - 1);
                const double t2 = J_(k, j);
                J_(k, j - 1) = t1 * cc + t2 * ss;
                J_(k, j) = xny * (t1 + J_(k, j - 1)) - t2;
            }
        }
        ++iq_;
        for (int i = 0; i < iq_; ++i) {
            R_(i, iq_ - 1) = d_(i);
        }
        if (std::abs(d_(iq_ - 1)) <= kEps * r_norm_) {
            return false;
        }
        r_norm_ = std::max(r_norm_, std::abs(d_(iq_ - 1)));
        return true;
    }

    void delete_constraint(int constraint) {
        int qq = -1;
        for (int i = p_; i < iq_; ++i) {
            if (active_[static_cast<size_t>(i)] == constraint) {
                qq = i;
                break;
            }
        }
        if (qq < 0) {
            return;
        }
        for (int i = qq; i < iq_ - 1; ++i) {
            active_[static_cast<size_t>(i)] = active_[static_cast<size_t>(i + 1)];
            u_(i) = u_(i + 1);
            R_.col(i) = R_.col(i + 1);
        }
        active_[static_cast<size_t>(iq_ - 1)] = active_[static_cast<size_t>(iq_)];
        u_(iq_ - 1) = u_(iq_);
        active_[static_cast<size_t>(iq_)] = -1;
        u_(iq_) = 0.0;
        for (int j = 0; j < iq_; ++j) {
            R_(j, iq_ - 1) = 0.0;
        }
        --iq_;
        if (iq_ == 0) {
            return;
        }
        for (int j = qq; j < iq_; ++j) {
            double cc = R_(j, j);
            double ss = R_(j + 1, j);
            const double h = std::hypot(cc, ss);
            if (h == 0.0) {
                continue;
            }
            cc /= h;
            ss /= h;
            R_(j + 1, j) = 0.0;
            if (cc < 0.0) {
                R_(j, j) = -h;
                cc = -cc;
                ss = -ss;
            } else {
                R_(j, j) = h;
            }
            const double xny = ss / (1.0 + cc);
            for (int k = j + 1; k < iq_; ++k) {
                const double t1 = R_(j, k);
                const double t2 = R_(j + 1, k);
                R_(j, k) = t1 * cc + t2 * ss;
                R_(j + 1, k) = xny * (t1 + R_(j, k)) - t2;
            }
            for (int k = 0; k < n_; ++k) {
                const double t1 = J_(k, j);
                const double t2 = J_(k, j + 1);
                J_(k, j) = t1 * cc + t2 * ss;
                J_(k, j + 1) = xny * (J_(k, j) + t1) - t2;
            }
        }
    }

    // Recomputes J and R for the current active list after a rollback.
    void rebuild_factors() {
        const std::vector<int> act(active_.begin(), active_.begin() + iq_);
        Eigen::LLT<MatrixXd> llt(G_);
        const MatrixXd L = llt.matrixL();
        J_ = L.transpose().triangularView<Eigen::Upper>().solve(MatrixXd::Identity(n_, n_));
        R_.setZero();
        r_norm_ = 1.0;
        iq_ = 0;
        for (const int c : act) {
            d_ = J_.transpose() * N_.col(c);
            add_constraint();
        }
    }

    int n_;
    int m_;
    int p_;
    MatrixXd N_;
    VectorXd c0_;
    double tol_;
    VectorXd g_;
    MatrixXd G_;
    MatrixXd J_;
    MatrixXd R_;
    double r_norm_ = 1.0;
    VectorXd x_;
    VectorXd u_;
    std::vector<int> active_;
    int iq_ = 0;
    VectorXd d_;
    VectorXd z_;
    VectorXd r_;
    int changes_ = 0;
};

}  // namespace

QpResult solve_qp(const QpProblem& problem, double violation_tol) {
    const auto n = problem.g.size();
    const auto p = problem.Aeq.rows();
    const auto m = problem.Ain.rows();
    if (problem.H.rows() != n || problem.H.cols() != n || (p > 0 && problem.Aeq.cols() != n) ||
        (m > 0 && problem.Ain.cols() != n) || problem.beq.size() != p || problem.bin.size() != m) {
        throw std::invalid_argument("QP dimension mismatch");
    }

    QpResult result;
    MatrixXd N(n, p + m);
    VectorXd c0(p + m);
    VectorXd scale(p + m);
    for (Eigen::Index i = 0; i < p; ++i) {
        const double s = problem.Aeq.row(i).norm();
        scale(i) = s > 0.0 ? s : 1.0;
        N.col(i) = problem.Aeq.row(i).transpose() / scale(i);
        c0(i) = -problem.beq(i) / scale(i);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        const double s = problem.Ain.row(i).norm();
        scale(p + i) = s > 0.0 ? s : 1.0;
        N.col(p + i) = -problem.Ain.row(i).transpose() / scale(p + i);
        c0(p + i) = problem.bin(i) / scale(p + i);
        if (s == 0.0 && problem.bin(i) < -violation_tol) {
            result.status = QpStatus::infeasible;
            result.x = VectorXd::Zero(n);
            result.lambda_eq = VectorXd::Zero(p);
            result.lambda_in = VectorXd::Zero(m);
            return result;
        }
    }

    DualActiveSet solver(problem.H, problem.g, std::move(N), std::move(c0), static_cast<int>(p), violation_tol);
    result.status = solver.run();
    result.x = solver.x();
    result.active_set_changes = solver.changes();
    const VectorXd u = solver.multipliers();
    result.lambda_eq = VectorXd(p);
    result.lambda_in = VectorXd(m);
    for (Eigen::Index i = 0; i < p; ++i) {
        result.lambda_eq(i) = -u(i) / scale(i);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        result.lambda_in(i) = u(p + i) / scale(p + i);
    }
    result.objective = 0.5 * result.x.dot(problem.H * result.x) + problem.g.dot(result.x);
    return result;
}

}  // namespace pathmpc::nlp
