#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cloc/linsys.hpp"
#include "cloc/resetsys.hpp"

namespace cloc {

// Odd-harmonic describing functions on a frequency grid. Even harmonics are
// identically zero and not stored.
struct HarmonicResponse {
    std::vector<double> frequencies;                  // rad/s
    std::vector<int> harmonics;                       // 1, 3, 5, ...
    std::vector<std::vector<cplx>> values;            // [harmonic row][frequency]
    std::vector<std::vector<double>> phase_unwrapped; // rad, same shape as values

    // Value of harmonic n at frequency index i; zero for even n.
    cplx at(int n, std::size_t i = 0) const;
    std::size_t row_of(int n) const;
};

// Matrix kernels of the reset describing function at a fixed omega (and phi).
struct HosidfKernels {
    Eigen::MatrixXd Lambda;     // omega^2 I + A_r^2
    Eigen::MatrixXd Delta;      // I + e^{(pi/omega) A_r}
    Eigen::MatrixXd Delta_rho;  // I + A_rho e^{(pi/omega) A_r}
    Eigen::MatrixXd Gamma;      // Delta_rho^{-1} A_rho Delta Lambda^{-1}
    Eigen::MatrixXd Theta;      // -(2 omega^2 / pi) Delta (Gamma - Lambda^{-1})
    Eigen::MatrixXd Omega;      // Delta - Delta Delta_rho^{-1} A_rho Delta
    Eigen::VectorXcd Theta_phi; // first-harmonic forcing vector of the shaped reset
};

// Throws KernelSingularityError when Lambda or Delta_rho cannot be inverted.
HosidfKernels hosidf_kernels(const ResetController& rc, double omega, double phi = 0.0);

// Conventional reset (resets on zero crossings of the sinusoidal input).
HarmonicResponse hosidf(const ResetController& rc, double omega, int n_max = 9);

// Reset instants shifted so that sin(omega t + phi) = 0 triggers the jump.
// The n-th harmonic carries the factor e^{j n phi}.
HarmonicResponse hosidf_shaped(const ResetController& rc, double phi, double omega, int n_max = 9);

// Harmonics of pre -> reset -> post with phi taken from the chain's reset-signal filter.
HarmonicResponse chain_hosidf(const ResetChain& chain, double omega, int n_max = 9);

using HarmonicAnalysis = std::function<HarmonicResponse(double omega, int n_max)>;

// Applies a single-frequency analysis over a strictly increasing grid and
// unwraps each harmonic's phase along the grid.
HarmonicResponse sweep(const HarmonicAnalysis& analysis, std::span<const double> grid, int n_max = 9);
HarmonicResponse sweep(const ResetController& rc, std::span<const double> grid, int n_max = 9);
HarmonicResponse sweep(const ResetChain& chain, std::span<const double> grid, int n_max = 9);

// Multiplies every harmonic row by a linear block evaluated at n omega
// (e.g. a plant after the controller).
HarmonicResponse cascade_linear(const HarmonicResponse& hr, const RationalTF& after);

std::vector<int> odd_harmonics(int n_max);

}  // namespace cloc
