#include "cloc/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "cloc/complexorder.hpp"
#include "cloc/config.hpp"
#include "cloc/design_io.hpp"
#include "cloc/errors.hpp"
#include "cloc/hosidf.hpp"
#include "cloc/synthesis.hpp"
#include "cloc/timesim.hpp"

namespace cloc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct Context {
    std::string command;
    Config cfg;
    CommandOptions opt;
    std::ostream& out;
    std::ostream& err;
    std::map<std::string, std::string> resolved;  // derived settings added to headers

    std::string header() const {
        std::string h = std::string("# cloc ") + kToolVersion + " command=" + command;
        for (const auto& [k, v] : cfg.entries()) h += " " + k + "=" + v;
        for (const auto& [k, v] : resolved) h += " " + k + "=" + v;
        return h;
    }

    std::ofstream open(const std::string& name) const {
        std::filesystem::create_directories(opt.out_dir);
        const auto path = opt.out_dir / name;
        std::ofstream f(path);
        if (!f) throw ConfigError("cannot write '" + path.string() + "'");
        f << header() << '\n';
        return f;
    }
};

std::vector<double> resolve_grid(Context& ctx) {
    double lo = 0.0, hi = 0.0, ppd = 400.0;
    if (ctx.opt.grid) {
        std::vector<std::string> parts;
        std::stringstream ss(*ctx.opt.grid);
        for (std::string p; std::getline(ss, p, ',');) parts.push_back(p);
        if (parts.size() < 2 || parts.size() > 3) throw ConfigError("--grid expects 'lo,hi[,points_per_decade]'");
        lo = parse_frequency(parts[0]);
        hi = parse_frequency(parts[1]);
        if (parts.size() == 3) {
            Config tmp;
            tmp.set("points_per_decade", parts[2]);
            ppd = tmp.number("points_per_decade");
        }
    } else {
        lo = ctx.cfg.frequency("grid_min");
        hi = ctx.cfg.frequency("grid_max");
        if (ctx.cfg.has("points_per_decade")) ppd = ctx.cfg.number("points_per_decade");
    }
    if (!(lo > 0.0) || !(hi > lo) || !(ppd > 0.0)) throw ConfigError("frequency grid is empty or inverted");
    ctx.resolved["grid"] = num(lo) + ":" + num(hi) + " rad/s @" + num(ppd) + "/dec";
    return log_grid_per_decade(lo, hi, ppd);
}

// Relative design paths are taken from the config file's directory.
ClocDesign load_design(const Context& ctx) {
    std::filesystem::path p(ctx.cfg.text("design_file"));
    if (p.is_relative()) p = ctx.opt.config.parent_path() / p;
    return read_design(p);
}

int resolve_harmonics(Context& ctx) {
    int n = 9;
    if (ctx.opt.harmonics) n = *ctx.opt.harmonics;
    else if (ctx.cfg.has("harmonics")) n = ctx.cfg.integer("harmonics");
    if (n < 1 || n % 2 == 0) throw ConfigError("harmonics must be a positive odd integer");
    ctx.resolved["n_max"] = std::to_string(n);
    return n;
}

void write_hosidf_csv(std::ostream& f, const HarmonicResponse& hr,
                      const std::optional<ComplexOrderTarget>& target) {
    f << "omega_rad_s,harmonic_n,re,im,mag_db,phase_deg_unwrapped";
    if (target) f << ",target_mag_db,target_phase_deg";
    f << '\n';
    for (std::size_t i = 0; i < hr.frequencies.size(); ++i) {
        for (std::size_t r = 0; r < hr.harmonics.size(); ++r) {
            const cplx v = hr.values[r][i];
            f << num(hr.frequencies[i]) << ',' << hr.harmonics[r] << ',' << num(v.real()) << ',' << num(v.imag())
              << ',' << num(20.0 * std::log10(std::abs(v))) << ',' << num(hr.phase_unwrapped[r][i] * 180.0 / std::numbers::pi);
            if (target) {
                if (hr.harmonics[r] == 1)
                    f << ',' << num(target->gain_db(hr.frequencies[i])) << ','
                      << num(target->phase_rad(hr.frequencies[i]) * 180.0 / std::numbers::pi);
                else
                    f << ",,";
            }
            f << '\n';
        }
    }
}

int cmd_bode(Context& ctx) {
    const Config& c = ctx.cfg;
    const std::string system = c.text("system");
    std::set<std::string> allowed = {"system", "grid_min", "grid_max", "points_per_decade", "harmonics", "target_beta",
                                     "target_alpha"};
    std::function<HarmonicResponse(double, int)> analysis;
    ResetChain chain;
    ResetController rc;
    std::optional<RationalTF> plant;

    if (system == "fore") {
        allowed.insert({"omega_r", "gamma", "reset_phase"});
        c.restrict_to(allowed);
        rc = make_fore(c.frequency("omega_r"), c.number("gamma"));
        const double phi = c.has("reset_phase") ? c.angle_deg("reset_phase") * std::numbers::pi / 180.0 : 0.0;
        analysis = [&rc, phi](double w, int n) { return hosidf_shaped(rc, phi, w, n); };
    } else if (system == "cglp") {
        allowed.insert({"omega_r", "omega_f", "gamma", "kappa", "omega_l", "omega_h", "zeta", "eta", "M", "N", "fit_beta"});
        c.restrict_to(allowed);
        const double wr = c.frequency("omega_r"), wf = c.frequency("omega_f"), g = c.number("gamma");
        std::optional<ShapingFilterSpec> spec;
        if (c.has("fit_beta")) {
            const double wl = c.frequency("omega_l"), wh = c.frequency("omega_h");
            const FitResult fr = fit_zeta_eta(c.number("fit_beta"), wl, wh, g, wr);
            spec = ShapingFilterSpec{wl, wh, fr.zeta, fr.eta, fr.M, fr.N};
            ctx.resolved["zeta"] = num(fr.zeta);
            ctx.resolved["eta"] = num(fr.eta);
            ctx.resolved["M"] = std::to_string(fr.M);
            ctx.resolved["N"] = std::to_string(fr.N);
        } else if (c.has("zeta")) {
            spec = ShapingFilterSpec{c.frequency("omega_l"), c.frequency("omega_h"), c.number("zeta"), c.number("eta"),
                                     c.integer("M"), c.integer("N")};
        }
        std::function<double(double)> phi = [](double) { return 0.0; };
        if (spec) phi = shaping_phase(*spec, wr);
        double kappa = 1.0;
        if (c.text("kappa") == "auto") {
            kappa = calibrate_kappa(wr, wf, g, phi).kappa;
            ctx.resolved["kappa"] = num(kappa);
        } else {
            kappa = c.number("kappa");
        }
        chain = make_cglp(wr, wf, g, kappa);
        if (spec) chain.reset_signal_filter = make_shaping_filter(make_crone_q(*spec), wr);
        analysis = [&chain](double w, int n) { return chain_hosidf(chain, w, n); };
    } else if (system == "design") {
        allowed.insert({"design_file", "include_plant"});
        c.restrict_to(allowed);
        const ClocDesign d = load_design(ctx);
        chain = d.chain;
        if (c.has("include_plant") && c.boolean("include_plant")) plant = d.plant;
        analysis = [&chain](double w, int n) { return chain_hosidf(chain, w, n); };
    } else {
        throw ConfigError("system must be fore, cglp or design (got '" + system + "')");
    }

    const auto grid = resolve_grid(ctx);
    const int n_max = resolve_harmonics(ctx);
    std::optional<ComplexOrderTarget> target;
    if (c.has("target_beta"))
        target = ComplexOrderTarget{c.has("target_alpha") ? c.number("target_alpha") : 0.0, c.number("target_beta")};

    HarmonicResponse hr = sweep(analysis, grid, n_max);
    if (plant) hr = cascade_linear(hr, *plant);
    auto f = ctx.open("hosidf.csv");
    write_hosidf_csv(f, hr, target);
    ctx.out << "wrote " << (ctx.opt.out_dir / "hosidf.csv").string() << " (" << grid.size() << " frequencies, "
            << hr.harmonics.size() << " harmonics)\n";
    return kExitOk;
}

int cmd_design(Context& ctx) {
    const Config& c = ctx.cfg;
    c.restrict_to({"omega_c", "beta", "band_half_decades", "gamma", "plant_gain", "pm_target", "beta_search",
                   "beta_step", "beta_max", "fit_budget", "fit_grid_points"});
    DesignInputs in;
    in.omega_c = c.frequency("omega_c");
    in.beta = c.number("beta");
    in.band_half_decades = c.number("band_half_decades");
    in.gamma = c.number("gamma");
    in.plant = make_double_integrator(c.number("plant_gain"));
    if (c.has("fit_budget")) in.fit.budget = c.integer("fit_budget");
    if (c.has("fit_grid_points")) in.fit.grid_points = static_cast<std::size_t>(c.integer("fit_grid_points"));

    const PidDesign pid = design_pid(in.omega_c, in.omega_c, in.plant);
    if (c.has("pm_target")) {
        in.pm_target_deg = c.text("pm_target") == "pid" ? pid.phase_margin_deg : c.angle_deg("pm_target");
        ctx.resolved["pm_target_deg"] = num(*in.pm_target_deg);
    }
    const bool search = c.has("beta_search") && c.boolean("beta_search");
    if (search && !in.pm_target_deg) throw ConfigError("beta_search needs pm_target");

    ClocDesign d = search ? design_cloc_for_margin(in, *in.pm_target_deg,
                                                   c.has("beta_step") ? c.number("beta_step") : 0.1,
                                                   c.has("beta_max") ? c.number("beta_max") : 1.0)
                          : design_cloc(in);
    {
        std::filesystem::create_directories(ctx.opt.out_dir);
        std::ofstream f(ctx.opt.out_dir / "design.txt");
        if (!f) throw ConfigError("cannot write design file");
        write_design(f, d, ctx.header().substr(2));
    }
    const std::string report = design_report(d, pid);
    {
        auto f = ctx.open("report.txt");
        f << report;
    }
    ctx.out << report;
    return kExitOk;
}

// Controllers selected by the 'controllers' key: pid, cloc or both.
std::vector<std::string> selected_controllers(const Config& c) {
    const std::string v = c.has("controllers") ? c.text("controllers") : "both";
    if (v == "both") return {"pid", "cloc"};
    if (v == "pid" || v == "cloc") return {v};
    throw ConfigError("controllers must be pid, cloc or both");
}

Loop loop_for(const std::string& which, const ClocDesign& d, double omega_crossover) {
    if (which == "pid") {
        const PidDesign p = design_pid(d.omega_c, omega_crossover, d.plant);
        return Loop{p.controller(), p.plant};
    }
    const ClocDesign r = retune_crossover(d, omega_crossover);
    return Loop{r.chain, r.plant};
}

double resolve_dt(Context& ctx, const std::vector<HybridModel>& models) {
    double rule = std::numeric_limits<double>::infinity();
    for (const auto& m : models) rule = std::min(rule, recommended_dt(m));
    double dt = rule;
    if (ctx.opt.dt) {
        dt = *ctx.opt.dt;
        if (!(dt > 0.0)) throw ConfigError("--dt must be positive");
        if (dt > rule)
            ctx.err << "warning: dt = " << dt << " s exceeds the step-size rule (" << rule
                    << " s, 1/50 of the fastest mode period)\n";
    }
    ctx.resolved["dt"] = num(dt) + " s";
    return dt;
}

void write_trace(std::ostream& f, const SimulationTrace& tr) {
    f << "t,r,y,e,u,x_rl\n";
    for (std::size_t i = 0; i < tr.time.size(); ++i)
        f << num(tr.time[i]) << ',' << num(tr.r[i]) << ',' << num(tr.y[i]) << ',' << num(tr.e[i]) << ','
          << num(tr.u[i]) << ',' << num(tr.x_rl[i]) << '\n';
}

void write_resets(std::ostream& f, const SimulationTrace& tr) {
    f << "t_reset,jump,state_norm\n";
    for (const auto& ev : tr.resets) f << num(ev.time) << ',' << num(ev.jump) << ',' << num(ev.state_norm) << '\n';
}

std::string tag(double omega) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%gHz", omega / kTwoPi);
    return buf;
}

int cmd_step(Context& ctx) {
    const Config& c = ctx.cfg;
    c.restrict_to({"design_file", "bandwidths", "duration", "controllers", "record_stride"});
    const ClocDesign d = load_design(ctx);
    const auto bws = c.frequency_list("bandwidths");
    const double T = c.duration("duration");
    const auto ctrls = selected_controllers(c);
    const std::size_t stride = c.has("record_stride") ? static_cast<std::size_t>(c.integer("record_stride")) : 1;

    std::vector<std::pair<std::string, double>> runs;
    std::vector<HybridModel> models;
    for (double bw : bws)
        for (const auto& k : ctrls) {
            runs.emplace_back(k, bw);
            models.push_back(build_closed_loop(loop_for(k, d, bw)));
        }
    const double dt = resolve_dt(ctx, models);

    auto metrics = ctx.open("step_metrics.csv");
    metrics << "controller,bandwidth_hz,overshoot_pct,settling_time_s,rise_time_s,final_value,settled\n";
    auto opt_str = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
    for (std::size_t i = 0; i < runs.size(); ++i) {
        SimOptions so;
        so.dt = dt;
        so.duration = T;
        so.record_stride = stride;
        const SimulationTrace tr = simulate(models[i], Reference::step(), so);
        const StepMetrics m = step_metrics(tr);
        const std::string base = runs[i].first + "_" + tag(runs[i].second);
        auto f = ctx.open("step_" + base + ".csv");
        write_trace(f, tr);
        auto g = ctx.open("resets_step_" + base + ".csv");
        write_resets(g, tr);
        metrics << runs[i].first << ',' << num(runs[i].second / kTwoPi) << ',' << opt_str(m.overshoot_pct) << ','
                << opt_str(m.settling_time) << ',' << opt_str(m.rise_time) << ',' << num(m.final_value) << ','
                << (m.settled ? "true" : "false") << '\n';
        ctx.out << runs[i].first << " @ " << tag(runs[i].second) << ": overshoot "
                << (m.overshoot_pct ? num(*m.overshoot_pct) + " %" : std::string("unavailable")) << ", settling "
                << (m.settling_time ? num(*m.settling_time) + " s" : std::string("unavailable")) << '\n';
    }
    return kExitOk;
}

int cmd_track(Context& ctx) {
    const Config& c = ctx.cfg;
    c.restrict_to({"design_file", "frequency", "amplitude", "duration", "controllers", "record_stride"});
    const ClocDesign d = load_design(ctx);
    const double w = c.frequency("frequency");
    const double amp = c.number("amplitude");
    const double T = c.duration("duration");
    const auto ctrls = selected_controllers(c);
    const std::size_t stride = c.has("record_stride") ? static_cast<std::size_t>(c.integer("record_stride")) : 1;

    std::vector<HybridModel> models;
    for (const auto& k : ctrls) models.push_back(build_closed_loop(loop_for(k, d, d.omega_crossover)));
    const double dt = resolve_dt(ctx, models);

    auto summary = ctx.open("track_summary.csv");
    summary << "controller,frequency_hz,max_abs_error_second_half,rms_error_second_half\n";
    for (std::size_t i = 0; i < ctrls.size(); ++i) {
        SimOptions so;
        so.dt = dt;
        so.duration = T;
        so.record_stride = stride;
        const SimulationTrace tr = simulate(models[i], Reference::sine(w, amp), so);
        double peak = 0.0, ss = 0.0;
        std::size_t n = 0;
        for (std::size_t k = 0; k < tr.time.size(); ++k) {
            if (tr.time[k] < 0.5 * T) continue;
            peak = std::max(peak, std::abs(tr.e[k]));
            ss += tr.e[k] * tr.e[k];
            ++n;
        }
        const double rms = n ? std::sqrt(ss / static_cast<double>(n)) : 0.0;
        auto f = ctx.open("track_" + ctrls[i] + ".csv");
        write_trace(f, tr);
        auto g = ctx.open("resets_track_" + ctrls[i] + ".csv");
        write_resets(g, tr);
        summary << ctrls[i] << ',' << num(w / kTwoPi) << ',' << num(peak) << ',' << num(rms) << '\n';
        ctx.out << ctrls[i] << ": steady-state max |e| = " << num(peak) << ", rms = " << num(rms) << '\n';
    }
    return kExitOk;
}

int cmd_sensitivity(Context& ctx) {
    const Config& c = ctx.cfg;
    c.restrict_to({"design_file", "frequencies", "grid_min", "grid_max", "points_per_decade", "cycles",
                   "min_duration", "controllers"});
    const ClocDesign d = load_design(ctx);
    const std::vector<double> omegas =
        (c.has("frequencies") && !ctx.opt.grid) ? c.frequency_list("frequencies") : resolve_grid(ctx);
    for (std::size_t i = 1; i < omegas.size(); ++i)
        if (!(omegas[i] > omegas[i - 1])) throw ConfigError("frequencies must be strictly increasing");
    const auto ctrls = selected_controllers(c);

    std::vector<HybridModel> models;
    for (const auto& k : ctrls) models.push_back(build_closed_loop(loop_for(k, d, d.omega_crossover)));
    SensitivityOptions so;
    so.dt = resolve_dt(ctx, models);
    if (c.has("cycles")) so.cycles = c.integer("cycles");
    if (c.has("min_duration")) so.min_duration = c.duration("min_duration");

    std::vector<std::vector<double>> ratios;
    for (const auto& m : models) ratios.push_back(sensitivity_sweep(m, omegas, so));

    auto f = ctx.open("sensitivity.csv");
    f << "frequency_hz,omega_rad_s";
    for (const auto& k : ctrls) f << ",ratio_" << k;
    f << '\n';
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        f << num(omegas[i] / kTwoPi) << ',' << num(omegas[i]);
        for (const auto& r : ratios) f << ',' << num(r[i]);
        f << '\n';
    }
    for (std::size_t k = 0; k < ctrls.size(); ++k) {
        double peak = 0.0;
        for (double v : ratios[k]) peak = std::max(peak, v);
        ctx.out << ctrls[k] << ": peak |e|/|r| = " << num(peak) << '\n';
    }
    return kExitOk;
}

}  // namespace

int run_command(const std::string& name, const CommandOptions& options, std::ostream& out, std::ostream& err) {
    static const std::map<std::string, int (*)(Context&)> table = {
        {"bode", &cmd_bode}, {"design", &cmd_design}, {"step", &cmd_step}, {"track", &cmd_track},
        {"sensitivity", &cmd_sensitivity}};
    try {
        const auto it = table.find(name);
        if (it == table.end()) throw ConfigError("unknown command '" + name + "'");
        Context ctx{name, Config::load(options.config), options, out, err, {}};
        return it->second(ctx);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParameterError& e) {
        err << "parameter error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DesignInfeasible& e) {
        err << "design infeasible: " << e.what() << '\n';
        return kExitInfeasible;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "file error: " << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace cloc
