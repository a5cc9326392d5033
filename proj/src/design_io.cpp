#include "cloc/design_io.hpp"

#include <cstdio>
#include <numbers>
#include <ostream>
#include <sstream>

#include "cloc/errors.hpp"

namespace cloc {

namespace {

std::string exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fixed(double v, int prec = 4) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

std::string hz(double omega) { return fixed(omega / (2.0 * std::numbers::pi), 3) + " Hz"; }

const std::set<std::string> kDesignKeys = {
    "omega_c", "omega_crossover", "omega_i", "omega_d", "omega_t", "beta", "band_half_decades",
    "omega_l", "omega_h", "omega_r", "omega_f", "kappa", "M", "N", "zeta", "eta", "gamma", "k_p",
    "plant_gain", "pm_target", "phase_margin", "fit_residual", "kappa_deviation", "linear_fallback"};

}  // namespace

double double_integrator_gain(const RationalTF& plant) {
    const auto& p = plant.poles();
    if (!plant.zeros().empty() || p.size() != 2 || p[0] != cplx(0.0, 0.0) || p[1] != cplx(0.0, 0.0))
        throw ParameterError("design files support only k/s^2 plants");
    return plant.gain();
}

void write_design(std::ostream& out, const ClocDesign& d, const std::string& header_comment) {
    if (!header_comment.empty()) out << "# " << header_comment << '\n';
    auto freq = [&](const char* k, double v) { out << k << " = " << exact(v) << " rad/s\n"; };
    auto num = [&](const char* k, double v) { out << k << " = " << exact(v) << '\n'; };
    freq("omega_c", d.omega_c);
    freq("omega_crossover", d.omega_crossover);
    freq("omega_i", d.omega_i);
    freq("omega_d", d.omega_d);
    freq("omega_t", d.omega_t);
    num("beta", d.beta);
    num("band_half_decades", d.band_half_decades);
    freq("omega_l", d.omega_l);
    freq("omega_h", d.omega_h);
    freq("omega_r", d.omega_r);
    freq("omega_f", d.omega_f);
    num("kappa", d.kappa);
    out << "M = " << d.M << "\nN = " << d.N << '\n';
    num("zeta", d.zeta);
    num("eta", d.eta);
    num("gamma", d.gamma);
    num("k_p", d.k_p);
    num("plant_gain", double_integrator_gain(d.plant));
    if (d.pm_target_deg) out << "pm_target = " << exact(*d.pm_target_deg) << " deg\n";
    out << "phase_margin = " << exact(d.phase_margin_deg) << " deg\n";
    out << "fit_residual = " << exact(d.fit_residual) << " rad\n";
    num("kappa_deviation", d.kappa_deviation_db);
    out << "linear_fallback = " << (d.linear_fallback ? "true" : "false") << '\n';
}

ClocDesign read_design(const Config& c) {
    c.restrict_to(kDesignKeys);
    ClocDesign d;
    d.omega_c = c.frequency("omega_c");
    d.omega_crossover = c.frequency("omega_crossover");
    d.omega_i = c.frequency("omega_i");
    d.omega_d = c.frequency("omega_d");
    d.omega_t = c.frequency("omega_t");
    d.beta = c.number("beta");
    d.band_half_decades = c.number("band_half_decades");
    d.omega_l = c.frequency("omega_l");
    d.omega_h = c.frequency("omega_h");
    d.omega_r = c.frequency("omega_r");
    d.omega_f = c.frequency("omega_f");
    d.kappa = c.number("kappa");
    d.M = c.integer("M");
    d.N = c.integer("N");
    d.zeta = c.number("zeta");
    d.eta = c.number("eta");
    d.gamma = c.number("gamma");
    d.k_p = c.number("k_p");
    d.plant = make_double_integrator(c.number("plant_gain"));
    if (c.has("pm_target")) d.pm_target_deg = c.angle_deg("pm_target");
    d.phase_margin_deg = c.angle_deg("phase_margin");
    d.fit_residual = c.angle_deg("fit_residual") * std::numbers::pi / 180.0;
    d.kappa_deviation_db = c.number("kappa_deviation");
    d.linear_fallback = c.boolean("linear_fallback");
    if ((d.M == 0) != (d.N == 0) || d.M < 0) throw ConfigError(c.source() + ": M and N must both be zero or positive");
    try {
        d.check_invariants();
        d.assemble();
    } catch (const Error& e) {
        throw ConfigError(c.source() + ": inconsistent design: " + e.what());
    }
    return d;
}

ClocDesign read_design(const std::filesystem::path& path) { return read_design(Config::load(path)); }

std::string design_report(const ClocDesign& d, const PidDesign& pid) {
    std::ostringstream os;
    os << "CLOC design report\n";
    os << "  1. crossover           omega_c = " << hz(d.omega_c) << '\n';
    os << "  2. PID corners         omega_i = " << hz(d.omega_i) << ", omega_d = " << hz(d.omega_d)
       << ", omega_t = " << hz(d.omega_t) << '\n';
    os << "  3. phase-slope band    omega_l = " << hz(d.omega_l) << ", omega_h = " << hz(d.omega_h) << '\n';
    os << "  4. complex order       beta = " << fixed(d.beta, 3) << '\n';
    if (d.M > 0) {
        os << "  5. ladder spacing      zeta = " << fixed(d.zeta) << ", eta = " << fixed(d.eta)
           << ", phase residual = " << fixed(d.fit_residual * 180.0 / std::numbers::pi, 3) << " deg\n";
        os << "  6. ladder size         M = " << d.M << ", N = " << d.N << '\n';
    } else {
        os << "  5. ladder spacing      none (beta = 0, Q = 1)\n";
        os << "  6. ladder size         M = N = 0\n";
    }
    os << "  7. CgLp corners        omega_r = " << hz(d.omega_r) << ", omega_f = " << hz(d.omega_f)
       << ", kappa = " << fixed(d.kappa) << " (max gain deviation " << fixed(d.kappa_deviation_db, 3) << " dB)\n";
    os << "  8. reset coefficient   gamma = " << fixed(d.gamma, 3) << ", k_p = " << exact(d.k_p) << '\n';
    os << "     phase margin        " << fixed(d.phase_margin_deg, 2) << " deg at " << hz(d.omega_crossover)
       << " (rule-of-thumb PID: " << fixed(pid.phase_margin_deg, 2) << " deg)\n";
    os << "     base linear system  stable, closed-loop poles:";
    for (const cplx& p : d.bls_poles) {
        os << ' ' << fixed(p.real(), 2);
        if (p.imag() != 0.0) os << (p.imag() < 0 ? "-" : "+") << fixed(std::abs(p.imag()), 2) << 'j';
    }
    os << '\n';
    if (d.linear_fallback) os << "  note: linear fallback (gamma = 1, no resetting action)\n";
    if (!d.guidance.empty()) os << "  guidance: " << d.guidance << '\n';
    return os.str();
}

}  // namespace cloc
