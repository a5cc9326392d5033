#include "cloc/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "cloc/errors.hpp"
#include "cloc/hosidf.hpp"

namespace cloc {

namespace {

constexpr double kLn10 = std::numbers::ln10;
constexpr double kKappaLo = 0.5;
constexpr double kKappaHi = 5.0;

double db(double mag) { return 20.0 * std::log10(mag); }

struct FitContext {
    double beta;
    double omega_l;
    double omega_h;
    double omega_r;
    double omega_f;
    double gamma;
    FitOptions options;
    std::vector<double> grid;
    std::vector<bool> scored;  // central part of the band
    int evaluations = 0;
};

struct FitEvaluation {
    double objective = 0.0;
    double phase_rms = 0.0;
    int count = 0;
    double kappa = 1.0;
};

FitEvaluation evaluate_fit(const FitContext& ctx, double zeta, double eta) {
    FitEvaluation ev;
    const int count = std::max(coverage_count(ctx.omega_l, ctx.omega_h, zeta),
                               coverage_count(ctx.omega_l, ctx.omega_h, eta));
    ev.count = count;
    if (count > ctx.options.max_ladder) {
        ev.objective = ev.phase_rms = 1e3;
        return ev;
    }
    const ShapingFilterSpec spec{ctx.omega_l, ctx.omega_h, zeta, eta, count, count};
    const auto phi = shaping_phase(spec, ctx.omega_r);
    ev.kappa = calibrate_kappa(ctx.omega_r, ctx.omega_f, ctx.gamma, phi).kappa;

    const std::size_t n = ctx.grid.size();
    std::vector<double> raw(n), log_gain(n);
    for (std::size_t i = 0; i < n; ++i) {
        const cplx g = cglp_first_harmonic(ctx.omega_r, ctx.omega_f, ctx.gamma, ev.kappa, phi, ctx.grid[i]);
        raw[i] = std::arg(g);
        log_gain[i] = std::log(std::abs(g));
    }
    const std::vector<double> phase = unwrap_phase(raw);

    // Residual against beta ln10 log10(omega) with the intercept eliminated.
    double mean = 0.0;
    std::size_t scored = 0;
    std::vector<double> resid(n);
    for (std::size_t i = 0; i < n; ++i) {
        resid[i] = phase[i] - ctx.beta * kLn10 * std::log10(ctx.grid[i]);
        if (ctx.scored[i]) {
            mean += resid[i];
            ++scored;
        }
    }
    mean /= static_cast<double>(scored);
    double ss_phase = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (ctx.scored[i]) ss_phase += (resid[i] - mean) * (resid[i] - mean);
    double ss_gain = 0.0;
    for (double lg : log_gain) ss_gain += lg * lg;

    ev.phase_rms = std::sqrt(ss_phase / static_cast<double>(scored));
    ev.objective = ev.phase_rms + ctx.options.gain_weight * std::sqrt(ss_gain / static_cast<double>(n));
    return ev;
}

double gsl_objective(const gsl_vector* p, void* params) {
    auto* ctx = static_cast<FitContext*>(params);
    ++ctx->evaluations;
    const double zeta = 1.0 + std::exp(gsl_vector_get(p, 0));
    const double eta = 1.0 + std::exp(gsl_vector_get(p, 1));
    if (!std::isfinite(zeta) || !std::isfinite(eta)) return 1e6;
    try {
        return evaluate_fit(*ctx, zeta, eta).objective;
    } catch (const NumericalError&) {
        return 1e6;
    }
}

struct SimplexOutcome {
    double x0, x1, value;
    bool converged;
};

SimplexOutcome run_simplex(FitContext& ctx, double x0, double x1) {
    gsl_multimin_function fn{&gsl_objective, 2, &ctx};
    gsl_vector* x = gsl_vector_alloc(2);
    gsl_vector* step = gsl_vector_alloc(2);
    gsl_vector_set(x, 0, x0);
    gsl_vector_set(x, 1, x1);
    gsl_vector_set_all(step, 0.5);
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 2);
    gsl_multimin_fminimizer_set(s, &fn, x, step);

    const int start = ctx.evaluations;
    bool converged = false;
    while (ctx.evaluations - start < ctx.options.budget) {
        if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
        if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-4) == GSL_SUCCESS) {
            converged = true;
            break;
        }
    }
    SimplexOutcome out{gsl_vector_get(s->x, 0), gsl_vector_get(s->x, 1), s->fval, converged};
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);
    return out;
}

void require_band(double lo, double hi, const char* what) {
    if (!(lo > 0.0) || !(hi > lo) || !std::isfinite(hi)) throw ParameterError(std::string(what) + ": need 0 < lower < upper");
}

cplx lead_at(double omega, double omega_z) { return cplx(1.0, omega / omega_z); }

}  // namespace

std::pair<double, double> invert_phase_slope(double slope, double log_product) {
    if (!(log_product > 0.0)) throw ParameterError("log product of the initial guess must be positive");
    // 1/a - 1/b = s with a b = P  =>  b - a = s P,  a = (-sP + sqrt(s^2 P^2 + 4P)) / 2
    const double s = 2.0 * slope / std::numbers::pi;
    const double sp = s * log_product;
    const double a = 0.5 * (-sp + std::sqrt(sp * sp + 4.0 * log_product));
    const double b = a + sp;
    return {std::pow(10.0, a), std::pow(10.0, b)};
}

int coverage_count(double omega_l, double omega_h, double ratio) {
    if (!(ratio > 1.0)) throw ParameterError("ladder ratio must exceed 1");
    require_band(omega_l, omega_h, "coverage");
    const double steps = std::log(omega_h / omega_l) / std::log(ratio);
    int n = static_cast<int>(std::ceil(steps - 1e-12)) + 1;
    while (omega_l * std::pow(ratio, n - 1) < omega_h) ++n;
    return std::max(n, 1);
}

std::function<double(double)> shaping_phase(const ShapingFilterSpec& spec, double omega_r) {
    const RationalTF sf = make_shaping_filter(make_crone_q(spec), omega_r);
    return [sf](double omega) { return std::arg(sf.freq_response(omega)); };
}

cplx cglp_first_harmonic(double omega_r, double omega_f, double gamma, double kappa,
                         const std::function<double(double)>& phi_profile, double omega) {
    const ResetController fore = make_fore(omega_r, gamma);
    const cplx reset = hosidf_shaped(fore, phi_profile(omega), omega, 1).at(1);
    return reset * lead_at(omega, kappa * omega_r) / cplx(1.0, omega / omega_f);
}

KappaResult calibrate_kappa(double omega_r, double omega_f, double gamma,
                            const std::function<double(double)>& phi_profile, std::size_t grid_points) {
    require_band(omega_r, 0.5 * omega_f, "kappa calibration band [omega_r, omega_f/2]");
    const auto grid = log_grid(omega_r, 0.5 * omega_f, grid_points);
    const ResetController fore = make_fore(omega_r, gamma);
    std::vector<cplx> reset(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        reset[i] = hosidf_shaped(fore, phi_profile(grid[i]), grid[i], 1).at(1);

    auto deviation = [&](double kappa) {
        double worst = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            worst = std::max(worst, std::abs(db(std::abs(reset[i] * lead_at(grid[i], kappa * omega_r)))));
        return worst;
    };

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = kKappaLo, b = kKappaHi;
    double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    double fc = deviation(c), fd = deviation(d);
    while ((b - a) > 1e-3 * 0.5 * (a + b)) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = deviation(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = deviation(d);
        }
    }
    const double kappa = 0.5 * (a + b);
    return {kappa, deviation(kappa)};
}

FitResult fit_zeta_eta(double beta, double omega_l, double omega_h, double gamma, double omega_r,
                       const FitOptions& options) {
    if (!(beta > 0.0)) throw ParameterError("phase-slope fit needs beta > 0");
    require_band(omega_l, omega_h, "phase-slope band");
    if (!(options.central_fraction > 0.0 && options.central_fraction <= 1.0))
        throw ParameterError("central fraction must lie in (0, 1]");
    if (options.grid_points < 3 || options.budget < 10) throw ParameterError("fit grid or budget too small");

    FitContext ctx{beta, omega_l, omega_h, omega_r, 10.0 * omega_h, gamma, options, {}, {}, 0};
    ctx.grid = log_grid(omega_l, omega_h, options.grid_points);
    const double lo = std::log10(omega_l), span = std::log10(omega_h) - lo;
    const double margin = 0.5 * (1.0 - options.central_fraction) * span;
    for (double w : ctx.grid) {
        const double x = std::log10(w);
        ctx.scored.push_back(x >= lo + margin - 1e-12 && x <= lo + span - margin + 1e-12);
    }

    gsl_set_error_handler_off();
    const auto [zeta0, eta0] = invert_phase_slope(beta * kLn10, options.log_product);
    SimplexOutcome best = run_simplex(ctx, std::log(zeta0 - 1.0), std::log(eta0 - 1.0));
    if (!best.converged) {
        const SimplexOutcome again = run_simplex(ctx, best.x0, best.x1);
        if (again.value <= best.value) best = again;
        best.converged = again.converged;
    }

    FitResult out;
    out.zeta = 1.0 + std::exp(best.x0);
    out.eta = 1.0 + std::exp(best.x1);
    const FitEvaluation ev = evaluate_fit(ctx, out.zeta, out.eta);
    out.residual = ev.phase_rms;
    out.M = out.N = ev.count;
    out.kappa = ev.kappa;
    out.evaluations = ctx.evaluations;
    if (!best.converged)
        throw OptimizerError("phase-slope fit did not converge within budget", out.zeta, out.eta, out.residual);
    return out;
}

cplx open_loop_response(const RationalTF& controller, const RationalTF& plant, double omega) {
    return controller.freq_response(omega) * plant.freq_response(omega);
}

cplx open_loop_first_harmonic(const ResetChain& controller, const RationalTF& plant, double omega) {
    return chain_hosidf(controller, omega, 1).at(1) * plant.freq_response(omega);
}

namespace {

template <typename OpenLoop>
double scale_to_crossover(OpenLoop&& loop, double omega_c) {
    if (!(omega_c > 0.0)) throw ParameterError("crossover frequency must be positive");
    const double below = std::abs(loop(omega_c / 1.05));
    const double at = std::abs(loop(omega_c));
    const double above = std::abs(loop(omega_c * 1.05));
    if (!(below > at && at > above) || !(at > 0.0) || !std::isfinite(at))
        throw DesignInfeasible("open-loop gain is not decreasing through omega_c; no unique crossover");
    return 1.0 / at;
}

}  // namespace

double tune_kp(const RationalTF& controller, const RationalTF& plant, double omega_c) {
    return scale_to_crossover([&](double w) { return open_loop_response(controller, plant, w); }, omega_c);
}

double tune_kp(const ResetChain& controller, const RationalTF& plant, double omega_c) {
    return scale_to_crossover([&](double w) { return open_loop_first_harmonic(controller, plant, w); }, omega_c);
}

double phase_margin_deg(cplx loop) {
    double pm = 180.0 + std::arg(loop) * 180.0 / std::numbers::pi;
    while (pm > 180.0) pm -= 360.0;
    while (pm <= -180.0) pm += 360.0;
    return pm;
}

void ClocDesign::assemble() {
    chain = ResetChain{};
    chain.pre = make_tamed_differentiator(omega_d, omega_t);
    chain.reset = make_fore(omega_r, gamma);
    chain.post = make_lead(kappa * omega_r, omega_f) * make_pi(k_p, omega_i);
    RationalTF q = RationalTF::constant(1.0);
    if (M > 0) q = make_crone_q(ShapingFilterSpec{omega_l, omega_h, zeta, eta, M, N});
    chain.reset_signal_filter = make_shaping_filter(q, omega_r);
}

void ClocDesign::check_invariants() const {
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::abs(b); };
    if (!(omega_i > 0.0 && omega_i < omega_d && omega_d < omega_c && omega_c < omega_t))
        throw DesignInfeasible("corner ordering omega_i < omega_d < omega_c < omega_t violated");
    if (!close(omega_r, omega_l) || !close(omega_f, 10.0 * omega_h))
        throw DesignInfeasible("CgLp corners must satisfy omega_r = omega_l and omega_f = 10 omega_h");
    if (M > 0) {
        const ShapingFilterSpec spec{omega_l, omega_h, zeta, eta, M, N};
        try {
            spec.validate();
        } catch (const ParameterError& e) {
            throw DesignInfeasible(std::string("shaping ladder: ") + e.what());
        }
    }
}

namespace {

void finish_design(ClocDesign& d) {
    const cplx loop = open_loop_first_harmonic(d.chain, d.plant, d.omega_crossover);
    d.phase_margin_deg = phase_margin_deg(loop);
    d.guidance.clear();
    if (d.pm_target_deg && d.phase_margin_deg < *d.pm_target_deg) {
        std::ostringstream os;
        os.precision(4);
        os << "achieved phase margin " << d.phase_margin_deg << " deg is below the target " << *d.pm_target_deg
           << " deg; raise beta and repeat from the phase-slope step";
        d.guidance = os.str();
    }
}

}  // namespace

ClocDesign design_cloc(const DesignInputs& in) {
    if (!(in.omega_c > 0.0) || !std::isfinite(in.omega_c)) throw ParameterError("omega_c must be positive");
    if (!(in.beta >= 0.0)) throw ParameterError("beta must be non-negative");
    if (!(in.band_half_decades > 0.0)) throw ParameterError("band half-width must be positive");
    if (!(std::abs(in.gamma) < 1.0) && in.gamma != 1.0) throw ParameterError("gamma must satisfy |gamma| < 1 (or 1 for a linear fallback)");

    ClocDesign d;
    d.omega_c = d.omega_crossover = in.omega_c;
    d.omega_d = in.omega_c / 1.5;
    d.omega_t = 1.5 * in.omega_c;
    d.omega_i = in.omega_c / 10.0;
    d.beta = in.beta;
    d.band_half_decades = in.band_half_decades;
    d.omega_l = in.omega_c * std::pow(10.0, -in.band_half_decades);
    d.omega_h = in.omega_c * std::pow(10.0, in.band_half_decades);
    d.omega_r = d.omega_l;
    d.omega_f = 10.0 * d.omega_h;
    d.gamma = in.gamma;
    d.linear_fallback = in.gamma == 1.0;
    d.pm_target_deg = in.pm_target_deg;
    d.plant = in.plant;

    std::function<double(double)> phi;
    if (in.beta > 0.0) {
        const FitResult fit = fit_zeta_eta(in.beta, d.omega_l, d.omega_h, in.gamma, d.omega_r, in.fit);
        d.zeta = fit.zeta;
        d.eta = fit.eta;
        d.M = fit.M;
        d.N = fit.N;
        d.fit_residual = fit.residual;
        phi = shaping_phase(ShapingFilterSpec{d.omega_l, d.omega_h, d.zeta, d.eta, d.M, d.N}, d.omega_r);
    } else {
        const RationalTF k = make_first_order_lag(d.omega_r);
        phi = [k](double w) { return std::arg(k.freq_response(w)); };
    }
    const KappaResult kr = calibrate_kappa(d.omega_r, d.omega_f, d.gamma, phi);
    d.kappa = kr.kappa;
    d.kappa_deviation_db = kr.deviation_db;

    d.k_p = 1.0;
    d.assemble();
    d.k_p = tune_kp(d.chain, d.plant, d.omega_crossover);
    d.assemble();
    d.check_invariants();

    d.bls_poles = feedback_poles(series(d.chain.linear_state_space(), realize(d.plant)));
    for (const cplx& p : d.bls_poles) {
        if (!(p.real() < 0.0)) {
            std::ostringstream os;
            os << "base linear closed loop is not stable (pole " << p.real() << (p.imag() < 0 ? " - " : " + ")
               << std::abs(p.imag()) << "j); widen the tamed-differentiator band";
            throw DesignInfeasible(os.str());
        }
    }
    finish_design(d);
    return d;
}

ClocDesign design_cloc_for_margin(DesignInputs inputs, double pm_target, double beta_step, double beta_max) {
    if (!(beta_step > 0.0)) throw ParameterError("beta step must be positive");
    inputs.pm_target_deg = pm_target;
    ClocDesign d = design_cloc(inputs);
    while (d.phase_margin_deg < pm_target) {
        const double next = std::round((inputs.beta + beta_step) * 1e9) / 1e9;
        if (next > beta_max + 1e-12) break;
        inputs.beta = next;
        d = design_cloc(inputs);
    }
    return d;
}

ClocDesign retune_crossover(const ClocDesign& design, double omega_c_new) {
    ClocDesign d = design;
    d.omega_crossover = omega_c_new;
    d.k_p = design.k_p * tune_kp(design.chain, design.plant, omega_c_new);
    d.assemble();
    finish_design(d);
    return d;
}

RationalTF PidDesign::controller() const {
    return make_pi(k_p, omega_i) * make_tamed_differentiator(omega_d, omega_t);
}

PidDesign design_pid(double omega_corner, double omega_c, const RationalTF& plant) {
    if (!(omega_corner > 0.0)) throw ParameterError("PID corner reference must be positive");
    PidDesign p;
    p.omega_c = omega_c;
    p.omega_i = omega_corner / 10.0;
    p.omega_d = omega_corner / 2.5;
    p.omega_t = omega_corner * 2.5;
    p.plant = plant;
    // Ordering check shared with make_pid.
    (void)make_pid(1.0, omega_corner, p.omega_i, p.omega_d, p.omega_t);
    p.k_p = 1.0;
    p.k_p = tune_kp(p.controller(), plant, omega_c);
    p.phase_margin_deg = phase_margin_deg(open_loop_response(p.controller(), plant, omega_c));
    return p;
}

}  // namespace cloc
