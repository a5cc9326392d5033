#include "cloc/resetsys.hpp"

#include <cmath>

#include "cloc/errors.hpp"

namespace cloc {

void ResetController::validate() const {
    const Eigen::Index n = base.order();
    if (reset_matrix.rows() != n || reset_matrix.cols() != n)
        throw ParameterError("reset matrix dimensions do not match the base linear system");
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i != j && reset_matrix(i, j) != 0.0) throw ParameterError("reset matrix must be diagonal");
        }
        if (std::abs(reset_matrix(i, i)) > 1.0) throw ParameterError("reset coefficient magnitude exceeds 1 (divergence risk)");
    }
}

bool ResetController::is_identity_reset() const {
    return reset_matrix.isIdentity(0.0);
}

double ResetChain::reset_phase(double omega) const {
    if (!reset_signal_filter) return 0.0;
    return std::arg(reset_signal_filter->freq_response(omega));
}

cplx ResetChain::linear_response(double omega) const {
    return pre.freq_response(omega) * reset.base.freq_response(omega) * post.freq_response(omega);
}

StateSpace ResetChain::linear_state_space() const {
    return series(series(realize(pre), reset.base), realize(post));
}

ResetController make_fore(double omega_r, double gamma) {
    if (!(omega_r > 0.0)) throw ParameterError("FORE corner omega_r must be positive");
    if (!std::isfinite(gamma) || std::abs(gamma) > 1.0)
        throw ParameterError("FORE reset coefficient |gamma| > 1 violates open-loop convergence");
    if (gamma == -1.0) throw ParameterError("FORE reset coefficient gamma = -1 is not convergent");
    ResetController rc;
    rc.base.A = Eigen::MatrixXd::Constant(1, 1, -omega_r);
    rc.base.B = Eigen::MatrixXd::Constant(1, 1, omega_r);
    rc.base.C = Eigen::MatrixXd::Constant(1, 1, 1.0);
    rc.base.D = Eigen::MatrixXd::Constant(1, 1, 0.0);
    rc.reset_matrix = Eigen::MatrixXd::Constant(1, 1, gamma);
    return rc;
}

ResetChain make_cglp(double omega_r, double omega_f, double gamma, double kappa) {
    if (!(omega_r > 0.0) || !(omega_r < omega_f)) throw ParameterError("CgLp needs 0 < omega_r < omega_f");
    if (!(kappa > 0.0)) throw ParameterError("CgLp kappa must be positive");
    ResetChain chain;
    chain.reset = make_fore(omega_r, gamma);
    chain.post = make_lead(kappa * omega_r, omega_f);
    return chain;
}

RationalTF make_shaping_filter(const RationalTF& q, double omega_r) {
    RationalTF sf = (q * make_first_order_lag(omega_r)).cancelled();
    if (!sf.is_proper()) throw ParameterError("shaping filter Q(s)K(s) is improper");
    return sf;
}

double psi(double phi, double omega, double omega_r) {
    if (!(omega > 0.0)) throw ParameterError("psi needs omega > 0");
    return -phi - std::atan(omega / omega_r);
}

bool check_open_loop_convergence(const ResetController& rc) {
    const Eigen::Index n = rc.reset_matrix.rows();
    if (n == 0) return true;
    Eigen::EigenSolver<Eigen::MatrixXd> es(rc.reset_matrix, false);
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(std::abs(es.eigenvalues()(i)) < 1.0)) return false;
    return true;
}

}  // namespace cloc
