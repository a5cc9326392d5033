#pragma once

#include <optional>

#include <Eigen/Dense>

#include "cloc/linsys.hpp"

namespace cloc {

// Base linear system (A_r, B_r, C_r, D_r) whose state jumps x <- A_rho x
// whenever the reset signal crosses zero.
struct ResetController {
    StateSpace base;
    Eigen::MatrixXd reset_matrix;  // diag(gamma_1, ..., gamma_n)

    // Diagonal, matching dimensions, |gamma_i| <= 1.
    void validate() const;
    bool is_identity_reset() const;
};

// pre -> reset element -> post, with an optional filter SF acting on the
// reset element's input to produce the reset signal x_rl. Without SF the
// element resets on zero crossings of its own input.
struct ResetChain {
    RationalTF pre = RationalTF::constant(1.0);
    ResetController reset;
    RationalTF post = RationalTF::constant(1.0);
    std::optional<RationalTF> reset_signal_filter;

    // Phase of SF at omega (0 without a filter); the phi of the shaped HOSIDF.
    double reset_phase(double omega) const;

    // pre * base * post with resets disabled.
    cplx linear_response(double omega) const;
    StateSpace linear_state_space() const;
};

// First-order reset element 1/(s/wr + 1) whose state is multiplied by gamma at resets.
// gamma = 1 is accepted as a linear fallback; |gamma| > 1 is rejected.
ResetController make_fore(double omega_r, double gamma);

// CgLp: FORE(omega_r, gamma) followed by the lead (s/(kappa wr) + 1)/(s/wf + 1).
ResetChain make_cglp(double omega_r, double omega_f, double gamma, double kappa);

// SF = Q(s) / (s/wr + 1)
RationalTF make_shaping_filter(const RationalTF& q, double omega_r);

// psi = -phi - atan(omega / omega_r)
double psi(double phi, double omega, double omega_r);

// True iff every eigenvalue of A_rho has modulus < 1.
bool check_open_loop_convergence(const ResetController& rc);

}  // namespace cloc
