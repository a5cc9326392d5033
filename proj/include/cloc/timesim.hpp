#pragma once

#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "cloc/linsys.hpp"
#include "cloc/resetsys.hpp"

namespace cloc {

// Reference signal r(t).
struct Reference {
    enum class Kind { Zero, Step, Sine } kind = Kind::Zero;
    double amplitude = 0.0;
    double omega = 0.0;  // rad/s, sine only

    static Reference zero() { return {}; }
    static Reference step(double amplitude = 1.0) { return {Kind::Step, amplitude, 0.0}; }
    static Reference sine(double omega, double amplitude = 1.0) { return {Kind::Sine, amplitude, omega}; }

    double operator()(double t) const;
};

// Output row c x + d r.
struct OutputMap {
    Eigen::RowVectorXd c;
    double d = 0.0;

    double operator()(const Eigen::VectorXd& x, double r) const { return c.dot(x) + d * r; }
};

// x' = A x + B r between resets; at sign changes of x_rl the block
// x[reset_offset .. reset_offset + n) is multiplied by reset_matrix.
struct HybridModel {
    Eigen::MatrixXd A;
    Eigen::VectorXd B;
    OutputMap y, e, u, x_rl;
    Eigen::Index reset_offset = -1;  // -1: no resetting states
    Eigen::MatrixXd reset_matrix;

    Eigen::Index order() const { return A.rows(); }
    bool has_reset() const { return reset_offset >= 0; }
};

using Controller = std::variant<RationalTF, ResetChain>;

struct Loop {
    Controller controller;
    RationalTF plant;
};

// Unity negative feedback around plant; the plant must be strictly proper.
HybridModel build_closed_loop(const Loop& loop);

// Chain driven directly by r: e = r, u = y = chain output.
HybridModel build_open_loop(const ResetChain& chain);

struct Sample {
    double t, r, y, e, u, x_rl;
};

struct ResetEvent {
    double time;
    double jump;        // |x_after - x_before| over the resetting block
    double state_norm;  // |x_before| over the resetting block
};

struct SimulationTrace {
    std::vector<double> time, r, y, e, u, x_rl;
    std::vector<double> reset_instants;
    std::vector<ResetEvent> resets;
};

struct SimOptions {
    double dt = 1e-5;
    double duration = 1.0;
    std::size_t record_stride = 1;
    double overflow_guard = 1e12;
    double grazing_floor = 1e-12;
};

// Largest |lambda(A)| dt; classical RK4 is unstable on the real axis beyond ~2.785.
double stiffness_ratio(const HybridModel& model, double dt);

// Recommended step: 1 / (50 f_max) with f_max the fastest corner in Hz.
double recommended_dt(const HybridModel& model);

// Fixed-step RK4 with interpolated zero-crossing resets. The observer sees
// every step (including t = 0). Throws DivergenceError past the guard.
void integrate(const HybridModel& model, const Reference& ref, const SimOptions& opt,
               const std::function<void(const Sample&)>& observer, std::vector<ResetEvent>* resets = nullptr);

SimulationTrace simulate(const HybridModel& model, const Reference& ref, const SimOptions& opt);
SimulationTrace simulate(const Loop& loop, const Reference& ref, const SimOptions& opt);

struct StepMetrics {
    bool settled = false;
    std::optional<double> overshoot_pct;
    std::optional<double> settling_time;  // 2% band
    std::optional<double> rise_time;      // 10% to 90%
    double final_value = 0.0;             // mean of the last 5% of the trace
};

StepMetrics step_metrics(const SimulationTrace& trace);

// |e|_2 / |r|_2 over the second half of a run of r = sin(omega t).
// Duration is max(cycles periods, min_duration).
struct SensitivityOptions {
    int cycles = 20;
    double min_duration = 0.0;
    double dt = 1e-5;
};

double sensitivity_estimate(const HybridModel& model, double omega, const SensitivityOptions& opt);
double sensitivity_estimate(const Loop& loop, double omega, const SensitivityOptions& opt);

// Independent runs evaluated concurrently; results ordered by grid index.
std::vector<double> sensitivity_sweep(const HybridModel& model, std::span<const double> omegas,
                                      const SensitivityOptions& opt);

SimulationTrace track_sine(const Loop& loop, double omega, double dt, double duration, double amplitude = 1.0);

}  // namespace cloc
