#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cloc/linsys.hpp"
#include "cloc/resetsys.hpp"

namespace cloc {

// Knobs of the (zeta, eta) search. Physics inputs are passed separately.
struct FitOptions {
    std::size_t grid_points = 40;
    int budget = 500;              // objective evaluations per start
    double central_fraction = 0.8; // share of the log band scored for phase
    double gain_weight = 0.5;      // weight of the RMS gain term (nepers)
    double log_product = 0.25;     // log10(zeta) * log10(eta) of the initial guess
    int max_ladder = 30;           // coverage counts above this are penalized
};

struct FitResult {
    double zeta = 0.0;
    double eta = 0.0;
    double residual = 0.0;  // RMS phase deviation from the affine target, rad
    int M = 0;
    int N = 0;
    double kappa = 1.0;
    int evaluations = 0;
};

struct KappaResult {
    double kappa = 1.0;
    double deviation_db = 0.0;  // max |gain| over the calibration band at kappa
};

// Initial (zeta, eta) with phase_slope(zeta, eta) = slope and
// log10(zeta) * log10(eta) = log_product.
std::pair<double, double> invert_phase_slope(double slope_rad_per_decade, double log_product);

// Smallest count n with omega_l * ratio^(n-1) >= omega_h.
int coverage_count(double omega_l, double omega_h, double ratio);

// phi(omega) = arg(Q(j omega) K(j omega)) for the ladder in spec and corner omega_r.
std::function<double(double)> shaping_phase(const ShapingFilterSpec& spec, double omega_r);

// First harmonic of the CgLp (FORE with shaped reset, then lead) at omega.
cplx cglp_first_harmonic(double omega_r, double omega_f, double gamma, double kappa,
                         const std::function<double(double)>& phi_profile, double omega);

// Golden-section search on kappa in [0.5, 5] minimizing the largest gain
// deviation from 0 dB over [omega_r, omega_f / 2]. The fixed omega_f pole is
// divided out so that a linear element calibrates to exactly 1.
KappaResult calibrate_kappa(double omega_r, double omega_f, double gamma,
                            const std::function<double(double)>& phi_profile, std::size_t grid_points = 40);

// Simplex search over (zeta, eta) so the CgLp first-harmonic phase follows a
// line of slope beta ln 10 across [omega_l, omega_h]. omega_f = 10 omega_h.
// Throws OptimizerError when neither start converges within budget.
FitResult fit_zeta_eta(double beta, double omega_l, double omega_h, double gamma, double omega_r,
                       const FitOptions& options = {});

// Gain that puts the open loop's crossover at omega_c.
double tune_kp(const RationalTF& controller, const RationalTF& plant, double omega_c);
double tune_kp(const ResetChain& controller, const RationalTF& plant, double omega_c);

// Open loop first harmonic (or linear response) including the plant.
cplx open_loop_first_harmonic(const ResetChain& controller, const RationalTF& plant, double omega);
cplx open_loop_response(const RationalTF& controller, const RationalTF& plant, double omega);

// 180 + arg L(j omega_c) wrapped to (-180, 180], degrees.
double phase_margin_deg(cplx open_loop_at_crossover);

struct DesignInputs {
    double omega_c = 0.0;            // rad/s
    double beta = 0.0;
    double band_half_decades = 0.5;
    double gamma = 0.0;
    std::optional<double> pm_target_deg;
    RationalTF plant = make_double_integrator();
    FitOptions fit;
};

struct ClocDesign {
    double omega_c = 0.0;          // design crossover; the corners are placed around it
    double omega_crossover = 0.0;  // crossover k_p is tuned for (differs after retuning)
    double omega_i = 0.0;
    double omega_d = 0.0;
    double omega_t = 0.0;
    double beta = 0.0;
    double band_half_decades = 0.0;
    double omega_l = 0.0;
    double omega_h = 0.0;
    double omega_r = 0.0;
    double omega_f = 0.0;
    double kappa = 1.0;
    int M = 0;  // 0 when the ladder is unused (beta = 0)
    int N = 0;
    double zeta = 0.0;
    double eta = 0.0;
    double gamma = 0.0;
    double k_p = 1.0;

    double fit_residual = 0.0;
    double kappa_deviation_db = 0.0;
    double phase_margin_deg = 0.0;
    std::optional<double> pm_target_deg;
    bool linear_fallback = false;
    std::string guidance;  // empty when no action is needed
    std::vector<cplx> bls_poles;

    RationalTF plant = make_double_integrator();
    ResetChain chain;

    // Rebuild chain from the scalar fields.
    void assemble();
    // Throws DesignInfeasible when an ordering or coverage invariant fails.
    void check_invariants() const;
};

ClocDesign design_cloc(const DesignInputs& inputs);

// Repeats the design with beta raised by beta_step until the phase margin
// reaches pm_target or beta_max is passed; returns the last design tried.
ClocDesign design_cloc_for_margin(DesignInputs inputs, double pm_target_deg, double beta_step = 0.1,
                                  double beta_max = 1.0);

// Same controller with k_p rescaled so the crossover moves to omega_c_new.
ClocDesign retune_crossover(const ClocDesign& design, double omega_c_new);

struct PidDesign {
    double omega_c = 0.0;  // crossover the gain was tuned for
    double omega_i = 0.0;
    double omega_d = 0.0;
    double omega_t = 0.0;
    double k_p = 1.0;
    double phase_margin_deg = 0.0;
    RationalTF plant = make_double_integrator();

    RationalTF controller() const;
};

// Rule-of-thumb corners around omega_corner (wi = wc/10, wd = wc/2.5,
// wt = 2.5 wc) with k_p setting the crossover at omega_c.
PidDesign design_pid(double omega_corner, double omega_c, const RationalTF& plant = make_double_integrator());

}  // namespace cloc
