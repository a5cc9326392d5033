#include "cloc/hosidf.hpp"

#include <cmath>
#include <numbers>

#include "cloc/errors.hpp"
#include "cloc/matrix_exp.hpp"

namespace cloc {

namespace {

constexpr double kRcondFloor = 1e-12;

Eigen::PartialPivLU<Eigen::MatrixXd> checked_lu(const Eigen::MatrixXd& M, const char* name, double omega) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    if (!(lu.rcond() > kRcondFloor)) throw KernelSingularityError(name, omega);
    return lu;
}

// (j n omega I - A)^{-1} v
Eigen::VectorXcd resolvent_solve(const Eigen::MatrixXd& A, double n_omega, const Eigen::VectorXcd& v) {
    Eigen::MatrixXcd M = -A.cast<cplx>();
    M.diagonal().array() += cplx(0.0, n_omega);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
    if (!(lu.rcond() > kRcondFloor)) throw KernelSingularityError("(j n omega I - A_r)", n_omega);
    return lu.solve(v);
}

void check_inputs(const ResetController& rc, double omega, int n_max) {
    if (!(omega > 0.0) || !std::isfinite(omega)) throw ParameterError("describing function needs omega > 0");
    if (n_max < 1 || n_max % 2 == 0) throw ParameterError("n_max must be a positive odd integer");
    rc.validate();
    if (rc.base.order() == 0) throw ParameterError("reset element has no state");
}

HarmonicResponse single(double omega, const std::vector<int>& harmonics) {
    HarmonicResponse hr;
    hr.frequencies = {omega};
    hr.harmonics = harmonics;
    hr.values.assign(harmonics.size(), std::vector<cplx>(1));
    hr.phase_unwrapped.assign(harmonics.size(), std::vector<double>(1));
    return hr;
}

void fill_phase(HarmonicResponse& hr) {
    for (std::size_t r = 0; r < hr.values.size(); ++r) {
        std::vector<double> raw(hr.values[r].size());
        for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = std::arg(hr.values[r][i]);
        hr.phase_unwrapped[r] = unwrap_phase(raw);
    }
}

}  // namespace

std::vector<int> odd_harmonics(int n_max) {
    if (n_max < 1 || n_max % 2 == 0) throw ParameterError("n_max must be a positive odd integer");
    std::vector<int> out;
    for (int n = 1; n <= n_max; n += 2) out.push_back(n);
    return out;
}

cplx HarmonicResponse::at(int n, std::size_t i) const {
    if (n % 2 == 0) return {0.0, 0.0};
    return values.at(row_of(n)).at(i);
}

std::size_t HarmonicResponse::row_of(int n) const {
    for (std::size_t r = 0; r < harmonics.size(); ++r)
        if (harmonics[r] == n) return r;
    throw ParameterError("harmonic " + std::to_string(n) + " not present");
}

HosidfKernels hosidf_kernels(const ResetController& rc, double omega, double phi) {
    const Eigen::MatrixXd& A = rc.base.A;
    const Eigen::MatrixXd& Ar = rc.reset_matrix;
    const Eigen::Index n = A.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd E = matrix_exponential((std::numbers::pi / omega) * A);

    HosidfKernels k;
    k.Lambda = omega * omega * I + A * A;
    k.Delta = I + E;
    k.Delta_rho = I + Ar * E;
    const auto lambda_lu = checked_lu(k.Lambda, "Lambda", omega);
    const auto delta_rho_lu = checked_lu(k.Delta_rho, "Delta_rho", omega);
    const Eigen::MatrixXd lambda_inv = lambda_lu.inverse();

    k.Gamma = delta_rho_lu.solve(Ar * k.Delta * lambda_inv);
    k.Theta = -(2.0 * omega * omega / std::numbers::pi) * k.Delta * (k.Gamma - lambda_inv);
    k.Omega = k.Delta - k.Delta * delta_rho_lu.solve(Ar * k.Delta);

    const Eigen::VectorXd core =
        k.Omega * (omega * std::cos(phi) * I - std::sin(phi) * A) * lambda_lu.solve(rc.base.B.col(0));
    const cplx scale = cplx(0.0, -2.0 * omega / std::numbers::pi) * std::polar(1.0, phi);
    k.Theta_phi = scale * core.cast<cplx>();
    return k;
}

HarmonicResponse hosidf(const ResetController& rc, double omega, int n_max) {
    check_inputs(rc, omega, n_max);
    const auto harmonics = odd_harmonics(n_max);
    const HosidfKernels k = hosidf_kernels(rc, omega);
    const Eigen::MatrixXd& A = rc.base.A;
    const Eigen::VectorXd B = rc.base.B.col(0);
    const Eigen::RowVectorXcd C = rc.base.C.row(0).cast<cplx>();

    // j Theta B
    const Eigen::VectorXcd forcing = cplx(0.0, 1.0) * (k.Theta * B).cast<cplx>();

    HarmonicResponse hr = single(omega, harmonics);
    for (std::size_t r = 0; r < harmonics.size(); ++r) {
        const int h = harmonics[r];
        cplx v;
        if (h == 1) {
            const Eigen::VectorXcd rhs = B.cast<cplx>() + forcing;
            v = (C * resolvent_solve(A, omega, rhs))(0) + rc.base.D(0, 0);
        } else {
            v = (C * resolvent_solve(A, h * omega, forcing))(0);
        }
        hr.values[r][0] = v;
    }
    fill_phase(hr);
    return hr;
}

HarmonicResponse hosidf_shaped(const ResetController& rc, double phi, double omega, int n_max) {
    check_inputs(rc, omega, n_max);
    if (!std::isfinite(phi)) throw ParameterError("reset phase phi must be finite");
    const auto harmonics = odd_harmonics(n_max);
    const HosidfKernels k = hosidf_kernels(rc, omega, phi);
    const Eigen::MatrixXd& A = rc.base.A;
    const Eigen::RowVectorXcd C = rc.base.C.row(0).cast<cplx>();
    const Eigen::VectorXcd B = rc.base.B.col(0).cast<cplx>();

    HarmonicResponse hr = single(omega, harmonics);
    for (std::size_t r = 0; r < harmonics.size(); ++r) {
        const int h = harmonics[r];
        // Shifting the reset instants by -phi/omega rotates harmonic h by h*phi.
        const Eigen::VectorXcd theta_h = std::polar(1.0, (h - 1) * phi) * k.Theta_phi;
        // C (A - j h omega I)^{-1} Theta = -C (j h omega I - A)^{-1} Theta
        cplx v = -(C * resolvent_solve(A, h * omega, theta_h))(0);
        if (h == 1) v += (C * resolvent_solve(A, omega, B))(0) + rc.base.D(0, 0);
        hr.values[r][0] = v;
    }
    fill_phase(hr);
    return hr;
}

HarmonicResponse chain_hosidf(const ResetChain& chain, double omega, int n_max) {
    const double phi = chain.reset_phase(omega);
    HarmonicResponse hr = hosidf_shaped(chain.reset, phi, omega, n_max);
    const cplx pre = chain.pre.freq_response(omega);
    const double pre_mag = std::abs(pre);
    const double pre_arg = std::arg(pre);
    for (std::size_t r = 0; r < hr.harmonics.size(); ++r) {
        const int h = hr.harmonics[r];
        const cplx post = chain.post.freq_response(h * omega);
        hr.values[r][0] *= post * std::polar(pre_mag, h * pre_arg);
    }
    fill_phase(hr);
    return hr;
}

HarmonicResponse sweep(const HarmonicAnalysis& analysis, std::span<const double> grid, int n_max) {
    if (grid.empty()) throw ParameterError("frequency grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw ParameterError("frequency grid must be positive");
        if (i > 0 && !(grid[i] > grid[i - 1])) throw ParameterError("frequency grid must be strictly increasing");
    }
    const auto harmonics = odd_harmonics(n_max);
    HarmonicResponse out;
    out.frequencies.assign(grid.begin(), grid.end());
    out.harmonics = harmonics;
    out.values.assign(harmonics.size(), std::vector<cplx>(grid.size()));
    out.phase_unwrapped.assign(harmonics.size(), std::vector<double>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const HarmonicResponse point = analysis(grid[i], n_max);
        for (std::size_t r = 0; r < harmonics.size(); ++r) out.values[r][i] = point.values[r][0];
    }
    fill_phase(out);
    return out;
}

HarmonicResponse sweep(const ResetController& rc, std::span<const double> grid, int n_max) {
    return sweep([&rc](double w, int n) { return hosidf(rc, w, n); }, grid, n_max);
}

HarmonicResponse sweep(const ResetChain& chain, std::span<const double> grid, int n_max) {
    return sweep([&chain](double w, int n) { return chain_hosidf(chain, w, n); }, grid, n_max);
}

HarmonicResponse cascade_linear(const HarmonicResponse& hr, const RationalTF& after) {
    HarmonicResponse out = hr;
    for (std::size_t r = 0; r < out.harmonics.size(); ++r)
        for (std::size_t i = 0; i < out.frequencies.size(); ++i)
            out.values[r][i] *= after.freq_response(out.harmonics[r] * out.frequencies[i]);
    fill_phase(out);
    return out;
}

}  // namespace cloc
