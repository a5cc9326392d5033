#include <cmath>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

#include "doctest.h"
#include "oracles.hpp"

#include "cloc/errors.hpp"
#include "cloc/synthesis.hpp"
#include "cloc/timesim.hpp"

using namespace cloc;
using std::numbers::pi;

namespace {

const double kOmegaC = 2 * pi * 100;

SimOptions options(double dt, double duration, std::size_t stride = 1) {
    SimOptions so;
    so.dt = dt;
    so.duration = duration;
    so.record_stride = stride;
    return so;
}

// PID-like chain whose lag may reset: pre * FORE * post.
ResetChain test_chain(double gamma) {
    ResetChain c = make_cglp(kOmegaC / 3, kOmegaC * 30, gamma, 1.0);
    c.pre = make_pid(1.0, kOmegaC, kOmegaC / 10, kOmegaC / 2, kOmegaC * 2);
    return c;
}

Loop tuned_loop(double gamma) {
    ResetChain c = test_chain(gamma);
    const double k = tune_kp(c, make_double_integrator(), kOmegaC);
    c.pre = c.pre * RationalTF::constant(k);
    return {c, make_double_integrator()};
}

}  // namespace

TEST_CASE("zero input stays at rest") {
    const SimulationTrace tr = simulate(tuned_loop(0.0), Reference::zero(), options(1e-5, 0.02));
    for (std::size_t i = 0; i < tr.time.size(); ++i) {
        CHECK(tr.y[i] == 0.0);
        CHECK(tr.u[i] == 0.0);
    }
    CHECK(tr.reset_instants.empty());
}

TEST_CASE("error signal is reference minus output") {
    const SimulationTrace tr = simulate(tuned_loop(0.0), Reference::step(), options(3e-6, 0.02, 7));
    for (std::size_t i = 0; i < tr.time.size(); ++i) CHECK(tr.e[i] == doctest::Approx(tr.r[i] - tr.y[i]).scale(1.0).epsilon(1e-14));
}

TEST_CASE("identity reset chain matches the equivalent linear controller") {
    const ResetChain c = test_chain(1.0);
    const RationalTF lin = c.pre * make_first_order_lag(kOmegaC / 3) * c.post;
    const RationalTF plant = make_double_integrator(1e5);
    const SimulationTrace a = simulate(Loop{c, plant}, Reference::step(), options(3e-6, 0.05));
    const SimulationTrace b = simulate(Loop{lin, plant}, Reference::step(), options(3e-6, 0.05));
    REQUIRE(a.y.size() == b.y.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.y.size(); ++i) worst = std::max(worst, std::abs(a.y[i] - b.y[i]));
    CHECK(worst < 1e-9);
}

TEST_CASE("identity reset reproduces the exact linear step response") {
    const ResetChain c = test_chain(1.0);
    const RationalTF lin = c.pre * make_first_order_lag(kOmegaC / 3) * c.post;
    const RationalTF plant = make_double_integrator(2e5);
    const StateSpace ol = series(realize(lin), realize(plant));
    REQUIRE(ol.D(0, 0) == 0.0);
    const Eigen::MatrixXd Acl = ol.A - ol.B * ol.C;
    const Eigen::MatrixXd inv = Acl.inverse();
    const Eigen::Index n = Acl.rows();
    const SimulationTrace tr = simulate(Loop{c, plant}, Reference::step(), options(2e-6, 0.04, 250));
    double worst = 0.0;
    for (std::size_t i = 1; i < tr.time.size(); ++i) {
        const Eigen::MatrixXd E = (Acl * tr.time[i]).exp();
        const double y = (ol.C * inv * (E - Eigen::MatrixXd::Identity(n, n)) * ol.B)(0, 0);
        worst = std::max(worst, std::abs(tr.y[i] - y));
    }
    CHECK(worst < 1e-7);
}

TEST_CASE("step metrics of an exact second-order response") {
    const double wn = 50.0, z = 0.3;
    const RationalTF plant(wn * wn, {}, {cplx(0.0, 0.0), cplx(-2 * z * wn, 0.0)});
    const SimulationTrace tr = simulate(Loop{RationalTF::constant(1.0), plant}, Reference::step(), options(1e-5, 1.0));
    const StepMetrics m = step_metrics(tr);
    REQUIRE(m.settled);
    CHECK(*m.overshoot_pct == doctest::Approx(100 * std::exp(-z * pi / std::sqrt(1 - z * z))).epsilon(1e-4));

    const double wd = wn * std::sqrt(1 - z * z);
    auto y = [&](double t) { return 1 - std::exp(-z * wn * t) * (std::cos(wd * t) + z / std::sqrt(1 - z * z) * std::sin(wd * t)); };
    double t10 = -1, t90 = -1, ts = 0;
    for (double t = 0; t < 1.0; t += 1e-7) {
        const double v = y(t);
        if (t10 < 0 && v >= 0.1) t10 = t;
        if (t90 < 0 && v >= 0.9) t90 = t;
        if (std::abs(v - 1) > 0.02) ts = t;
    }
    CHECK(*m.rise_time == doctest::Approx(t90 - t10).epsilon(1e-3));
    CHECK(*m.settling_time == doctest::Approx(ts).epsilon(1e-3));
    CHECK(*m.settling_time >= *m.rise_time);
    CHECK(m.final_value == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("step metrics on hand-made traces") {
    SimulationTrace flat;
    for (int i = 0; i <= 100; ++i) {
        flat.time.push_back(i * 0.01);
        flat.r.push_back(1.0);
        flat.y.push_back(i == 0 ? 0.0 : 1.0);
    }
    const StepMetrics m = step_metrics(flat);
    REQUIRE(m.settled);
    CHECK(*m.overshoot_pct == 0.0);

    SimulationTrace ringing = flat;
    for (std::size_t i = 0; i < ringing.y.size(); ++i) ringing.y[i] = 1.0 + 0.5 * std::sin(40.0 * ringing.time[i]);
    const StepMetrics bad = step_metrics(ringing);
    CHECK_FALSE(bad.settled);
    CHECK_FALSE(bad.overshoot_pct.has_value());
    CHECK_FALSE(bad.settling_time.has_value());
}

TEST_CASE("linear loop sensitivity matches |S|") {
    const PidDesign pid = design_pid(kOmegaC, kOmegaC);
    const Loop loop{pid.controller(), pid.plant};
    SensitivityOptions so;
    so.dt = 3e-6;
    so.min_duration = 0.2;
    for (double f : {10.0, 60.0, 150.0}) {
        const double w = 2 * pi * f;
        const double s = 1.0 / std::abs(1.0 + open_loop_response(pid.controller(), pid.plant, w));
        CHECK(sensitivity_estimate(loop, w, so) == doctest::Approx(s).epsilon(0.01));
    }

    SUBCASE("tracking error amplitude") {
        const double w = 2 * pi * 30;
        const double s = 1.0 / std::abs(1.0 + open_loop_response(pid.controller(), pid.plant, w));
        const SimulationTrace tr = track_sine(loop, w, 3e-6, 0.3);
        double peak = 0.0;
        for (std::size_t i = 0; i < tr.time.size(); ++i)
            if (tr.time[i] > 0.2) peak = std::max(peak, std::abs(tr.e[i]));
        CHECK(peak == doctest::Approx(s).epsilon(0.01));
    }
}

TEST_CASE("high loop gain drives the sensitivity to zero") {
    const RationalTF plant = make_double_integrator(1.0);
    const double wc = 2 * pi * 200;
    const RationalTF c = make_pid(1.0, wc, wc / 10, wc / 2.5, wc * 2.5);
    const Loop loop{c * RationalTF::constant(tune_kp(c, plant, wc)), plant};
    SensitivityOptions so;
    so.dt = 1e-6;
    so.cycles = 40;
    CHECK(sensitivity_estimate(loop, 2 * pi * 1.0, so) < 1e-3);
}

TEST_CASE("reset loop is homogeneous in the reference amplitude") {
    const Loop loop = tuned_loop(0.0);
    const SimulationTrace a = track_sine(loop, 2 * pi * 20, 3e-6, 0.1, 1.0);
    const SimulationTrace b = track_sine(loop, 2 * pi * 20, 3e-6, 0.1, 2.0);
    REQUIRE(a.reset_instants.size() == b.reset_instants.size());
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < a.e.size(); ++i) {
        worst = std::max(worst, std::abs(b.e[i] - 2.0 * a.e[i]));
        scale = std::max(scale, std::abs(a.e[i]));
    }
    CHECK(worst < 1e-9 * scale);
}

TEST_CASE("reset instants follow the shaping filter phase") {
    const double wr = 10.0, w = 60.0, ws = 90.0, dt = 1e-5;
    ResetChain chain = make_cglp(wr, 1e4, 0.0, 1.0);
    chain.reset_signal_filter = make_first_order_lag(ws);
    const double phi = std::arg(chain.reset_signal_filter->freq_response(w));
    const double period = 2 * pi / w;
    const SimulationTrace tr = simulate(build_open_loop(chain), Reference::sine(w), options(dt, 30 * period));
    int checked = 0;
    for (double t : tr.reset_instants) {
        if (t < 15 * period) continue;
        const double k = std::round((w * t + phi) / pi);
        CHECK(std::abs(t - (k * pi - phi) / w) < dt);
        ++checked;
    }
    CHECK(checked >= 28);

    SUBCASE("each instant sits on a sign change of the reset signal") {
        for (double t : tr.reset_instants) {
            const auto i = static_cast<std::size_t>(std::floor(t / dt + 1e-9));
            REQUIRE(i + 1 < tr.x_rl.size());
            const bool change = (tr.x_rl[i] <= 0) != (tr.x_rl[i + 1] <= 0) ||
                                (i > 0 && (tr.x_rl[i - 1] <= 0) != (tr.x_rl[i] <= 0));
            CHECK(change);
        }
    }
}

TEST_CASE("failure modes") {
    SUBCASE("unstable loop diverges") {
        Loop loop = tuned_loop(0.0);
        loop.plant = make_double_integrator(-1.0);
        CHECK_THROWS_AS(simulate(loop, Reference::step(), options(3e-6, 1.0)), DivergenceError);
    }
    SUBCASE("step too large for the fastest mode") {
        const HybridModel m = build_closed_loop(tuned_loop(0.0));
        CHECK(stiffness_ratio(m, 1e-3) > 2.7);
        CHECK_THROWS_AS(simulate(m, Reference::step(), options(1e-3, 0.1)), ParameterError);
        CHECK(stiffness_ratio(m, recommended_dt(m)) < 0.2);
    }
    SUBCASE("proper plant is rejected") {
        CHECK_THROWS_AS(build_closed_loop(Loop{RationalTF::constant(1.0), make_lead(1.0, 10.0)}), ParameterError);
    }
}

TEST_CASE("sensitivity sweep is ordered by grid index") {
    const HybridModel m = build_closed_loop(tuned_loop(0.0));
    const std::vector<double> omegas{2 * pi * 200, 2 * pi * 20, 2 * pi * 80, 2 * pi * 5};
    SensitivityOptions so;
    so.dt = 3e-6;
    so.cycles = 20;
    const std::vector<double> s = sensitivity_sweep(m, omegas, so);
    REQUIRE(s.size() == omegas.size());
    for (std::size_t i = 0; i < omegas.size(); ++i) CHECK(s[i] == sensitivity_estimate(m, omegas[i], so));
}
