#pragma once

#include <array>
#include <stdexcept>

namespace pathmpc::bounds {

class BoundError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Quartic envelope over one segment in the local coordinate x = phi - phi_start.
struct BoundSegment {
    std::array<double, 5> coefficients{};  // a0..a4
    double phi_start = 0.0;
    double phi_end = 1.0;
    double s0 = 0.0;
    double sf = 0.0;
    double upsilon_max = 0.0;
    double eps_start = 0.0;
    double eps_end = 0.0;
    double e_upper = 1.0;
    double e_lower = -1.0;
};

struct BoundValue {
    double upsilon = 0.0;
    double derivative = 0.0;
};

/// Fits Y(phi_l) = eps_start, Y(phi_l1) = eps_end, Y'(phi_l) = s0,
/// Y'(phi_l1) = sf and Y(midpoint) = upsilon_max.
BoundSegment fit_bound(double phi_l, double phi_l1, double s0, double sf, double upsilon_max, double eps_start,
                       double eps_end, double e_upper = 1.0, double e_lower = -1.0);

/// Requires phi_start <= phi <= phi_end (with 1e-12 slack).
BoundValue eval_bound(const BoundSegment& segment, double phi);

/// Polynomial evaluation without the range check.
BoundValue eval_polynomial(const BoundSegment& segment, double phi);

/// (e - e_off)^2 - lambda^2; nonpositive exactly on [e_l Y, e_u Y].
double psi_asymmetric(double e_proj, double upsilon, double e_u, double e_l);

}  // namespace pathmpc::bounds
