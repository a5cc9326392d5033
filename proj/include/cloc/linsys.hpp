#pragma once

#include <complex>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cloc {

using cplx = std::complex<double>;

// Real-coefficient rational transfer function in zero/pole/gain form:
//   G(s) = gain * prod(s - z_i) / prod(s - p_i)
// Zero and pole sets must be closed under conjugation.
class RationalTF {
public:
    RationalTF() = default;
    RationalTF(double gain, std::vector<cplx> zeros, std::vector<cplx> poles);

    static RationalTF constant(double k) { return RationalTF(k, {}, {}); }

    double gain() const { return gain_; }
    const std::vector<cplx>& zeros() const& { return zeros_; }
    const std::vector<cplx>& poles() const& { return poles_; }
    std::vector<cplx> zeros() && { return std::move(zeros_); }
    std::vector<cplx> poles() && { return std::move(poles_); }

    // deg(den) - deg(num); negative means improper.
    int relative_degree() const { return static_cast<int>(poles_.size()) - static_cast<int>(zeros_.size()); }
    bool is_proper() const { return relative_degree() >= 0; }

    // Evaluate at an arbitrary complex point. Throws SingularityError on a pole.
    cplx evaluate(cplx s) const;

    // G(j omega); omega must be > 0.
    cplx freq_response(double omega) const;

    // Series composition: concatenates zero/pole lists, multiplies gains.
    RationalTF operator*(const RationalTF& other) const;

    // Copy with coincident zero/pole pairs removed.
    RationalTF cancelled(double rel_tol = 1e-12) const;

private:
    double gain_ = 1.0;
    std::vector<cplx> zeros_;
    std::vector<cplx> poles_;
};

// Single-input single-output state-space realization.
struct StateSpace {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
    Eigen::MatrixXd C;
    Eigen::MatrixXd D;

    Eigen::Index order() const { return A.rows(); }
    double feedthrough() const { return D(0, 0); }

    // C (s I - A)^{-1} B + D
    cplx evaluate(cplx s) const;
    cplx freq_response(double omega) const;

    static StateSpace gain(double k);
};

// Parameters of the recursive zero/pole ladder used for the reset-signal filter.
struct ShapingFilterSpec {
    double omega_l = 1.0;  // rad/s, first zero and first pole
    double omega_h = 10.0; // rad/s, upper end of the shaping band
    double zeta = 2.0;     // zero spacing ratio, > 1
    double eta = 4.0;      // pole spacing ratio, > 1
    int M = 1;             // zero count
    int N = 1;             // pole count

    // Throws ParameterError when a field is out of range or the ladders
    // stop short of omega_h.
    void validate() const;

    std::vector<double> zero_corners() const;
    std::vector<double> pole_corners() const;
};

cplx freq_response(const RationalTF& sys, double omega);
cplx freq_response(const StateSpace& sys, double omega);

// Elementary blocks, all written in corner-frequency form.
RationalTF make_first_order_lag(double omega_p);            // 1 / (s/wp + 1)
RationalTF make_lead(double omega_z, double omega_p);      // (s/wz + 1) / (s/wp + 1)
RationalTF make_pi(double k, double omega_i);              // k (1 + wi/s); wi = 0 gives k
RationalTF make_tamed_differentiator(double omega_d, double omega_t);
RationalTF make_double_integrator(double gain = 1.0);      // gain / s^2

// k_p (1 + wi/s) (s/wd + 1)/(s/wt + 1); requires 0 < wi < wd < wc < wt.
RationalTF make_pid(double k_p, double omega_c, double omega_i, double omega_d, double omega_t);

// CRONE-style ladder prod(1 + s/wz_j) / prod(1 + s/wp_i) with unit DC gain.
RationalTF make_crone_q(const ShapingFilterSpec& spec);

// Mid-band phase slope of the ladder in rad/decade.
double phase_slope(double zeta, double eta);

// Oustaloup recursive approximation of s^alpha over [omega_l, omega_h]
// using `order` zero/pole pairs.
RationalTF make_oustaloup(double alpha, double omega_l, double omega_h, int order);

// Minimal realization (after exact cancellation) as a cascade of first- and
// second-order controllable-canonical sections.
StateSpace realize(const RationalTF& tf);

// Series interconnection: u -> first -> second -> y.
StateSpace series(const StateSpace& first, const StateSpace& second);

// Poles of the unity negative-feedback loop closed around `open_loop`.
std::vector<cplx> feedback_poles(const StateSpace& open_loop);

// Inclusive log-spaced grid between lo and hi.
std::vector<double> log_grid(double lo, double hi, std::size_t points);
std::vector<double> log_grid_per_decade(double lo, double hi, double points_per_decade = 400.0);

// Nearest-multiple-of-2pi continuation of a phase sequence.
std::vector<double> unwrap_phase(std::span<const double> phase);

// Bode data for a linear system on a grid.
struct BodeData {
    std::vector<double> omega;
    std::vector<double> mag_db;
    std::vector<double> phase_rad;  // unwrapped
};
BodeData bode(const RationalTF& sys, std::span<const double> omega);

}  // namespace cloc
