#include "pathmpc/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace pathmpc::dynamics {

namespace {

Eigen::Matrix3d scalar_phi(double T) {
    Eigen::Matrix3d phi;
    phi << 1.0, T, 0.5 * T * T,
           0.0, 1.0, T,
           0.0, 0.0, 1.0;
    return phi;
}

Eigen::Vector3d scalar_gamma0(double T) { return {T * T * T / 8.0, T * T / 3.0, T / 2.0}; }

Eigen::Vector3d scalar_gamma1(double T) { return {T * T * T / 24.0, T * T / 6.0, T / 2.0}; }

// Exact response over an interval of length tau < = Ts with jerk interpolated
// linearly from j0 (at 0) to j1 (at Ts).
void partial_step(double p, double v, double a, double j0, double j1, double Ts, double tau,
                  double& po, double& vo, double& ao) {
    const double slope = (j1 - j0) / Ts;
    const double t2 = tau * tau;
    const double t3 = t2 * tau;
    const double t4 = t3 * tau;
    ao = a + j0 * tau + 0.5 * slope * t2;
    vo = v + a * tau + 0.5 * j0 * t2 + slope * t3 / 6.0;
    po = p + v * tau + 0.5 * a * t2 + j0 * t3 / 6.0 + slope * t4 / 24.0;
}

}  // namespace

StateTriple StateTriple::zero(int n) {
    return {VectorXd::Zero(n), VectorXd::Zero(n), VectorXd::Zero(n)};
}

VectorXd StateTriple::stacked() const {
    VectorXd x(3 * pos.size());
    x << pos, vel, acc;
    return x;
}

StateTriple StateTriple::from_stacked(const VectorXd& x) {
    if (x.size() % 3 != 0) {
        throw std::invalid_argument("stacked state size must be a multiple of 3");
    }
    const auto n = x.size() / 3;
    return {x.segment(0, n), x.segment(n, n), x.segment(2 * n, n)};
}

double hat(double t, double t_k, double Ts) {
    const double s = (t - t_k) / Ts;
    if (s <= 0.0 || s >= 2.0) {
        return 0.0;
    }
    return s <= 1.0 ? s : 2.0 - s;
}

DiscreteLTI discretize(double Ts, int n) {
    if (!(Ts > 0.0)) {
        throw std::invalid_argument("sample time must be positive");
    }
    if (n < 1) {
        throw std::invalid_argument("dimension must be positive");
    }
    const Eigen::Matrix3d phi = scalar_phi(Ts);
    const Eigen::Vector3d g0 = scalar_gamma0(Ts);
    const Eigen::Vector3d g1 = scalar_gamma1(Ts);
    const MatrixXd I = MatrixXd::Identity(n, n);

    DiscreteLTI lti;
    lti.Ts = Ts;
    lti.n = n;
    lti.Phi = MatrixXd::Zero(3 * n, 3 * n);
    lti.Gamma0 = MatrixXd::Zero(3 * n, n);
    lti.Gamma1 = MatrixXd::Zero(3 * n, n);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            lti.Phi.block(r * n, c * n, n, n) = phi(r, c) * I;
        }
        lti.Gamma0.block(r * n, 0, n, n) = g0(r) * I;
        lti.Gamma1.block(r * n, 0, n, n) = g1(r) * I;
    }
    return lti;
}

StateTriple step(const DiscreteLTI& lti, const StateTriple& x, const VectorXd& u_k, const VectorXd& u_k1) {
    if (x.dof() != lti.n || u_k.size() != lti.n || u_k1.size() != lti.n) {
        throw std::invalid_argument("dimension mismatch in step");
    }
    const VectorXd next = lti.Phi * x.stacked() + lti.Gamma0 * u_k + lti.Gamma1 * u_k1;
    return StateTriple::from_stacked(next);
}

StateTriple continuous_eval(const StateTriple& x0, const std::vector<VectorXd>& jerk_knots, double Ts,
                            double t) {
    if (jerk_knots.empty()) {
        throw std::invalid_argument("no jerk knots");
    }
    const double t_end = static_cast<double>(jerk_knots.size() - 1) * Ts;
    if (t < 0.0 || t > t_end * (1.0 + 1e-12) + 1e-15) {
        throw std::out_of_range("evaluation time outside the knot range");
    }
    const int n = x0.dof();
    StateTriple x = x0;
    if (jerk_knots.size() == 1) {
        return x;
    }
    const auto last = static_cast<int>(jerk_knots.size()) - 2;
    const int k_end = std::clamp(static_cast<int>(std::floor(t / Ts)), 0, last);
    for (int k = 0; k <= k_end; ++k) {
        const double tau = k < k_end ? Ts : std::min(t - k * Ts, Ts);
        const VectorXd& j0 = jerk_knots[static_cast<size_t>(k)];
        const VectorXd& j1 = jerk_knots[static_cast<size_t>(k + 1)];
        for (int i = 0; i < n; ++i) {
            partial_step(x.pos(i), x.vel(i), x.acc(i), j0(i), j1(i), Ts, tau, x.pos(i), x.vel(i), x.acc(i));
        }
    }
    return x;
}

ScalarRollout::ScalarRollout(double Ts, int horizon) : Ts_(Ts), horizon_(horizon) {
    if (!(Ts > 0.0) || horizon < 1) {
        throw std::invalid_argument("invalid rollout parameters");
    }
    const Eigen::Matrix3d phi = scalar_phi(Ts);
    const Eigen::Vector3d g0 = scalar_gamma0(Ts);
    const Eigen::Vector3d g1 = scalar_gamma1(Ts);
    const auto m = static_cast<size_t>(horizon + 1);
    free_.assign(m, Eigen::Matrix3d::Identity());
    gain_.assign(m * m, Eigen::Vector3d::Zero());
    for (size_t i = 1; i < m; ++i) {
        free_[i] = phi * free_[i - 1];
        for (size_t k = 0; k < m; ++k) {
            gain_[i * m + k] = phi * gain_[(i - 1) * m + k];
        }
        gain_[i * m + (i - 1)] += g0;
        gain_[i * m + i] += g1;
    }
}

const Eigen::Vector3d& ScalarRollout::input_gain(int i, int k) const {
    const auto m = static_cast<size_t>(horizon_ + 1);
    return gain_[static_cast<size_t>(i) * m + static_cast<size_t>(k)];
}

}  // namespace pathmpc::dynamics
