#pragma once

// Independent reference computations used to freeze and check results.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "cloc/timesim.hpp"

namespace oracle {

using cplx = std::complex<double>;

// Least-squares slope of y against log10(x) over points with lo <= x <= hi.
inline double log_slope(const std::vector<double>& x, const std::vector<double>& y, double lo, double hi) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] < lo * (1 - 1e-12) || x[i] > hi * (1 + 1e-12)) continue;
        const double u = std::log10(x[i]);
        sx += u;
        sy += y[i];
        sxx += u * u;
        sxy += u * y[i];
        ++n;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Central 80% of a log band.
inline std::pair<double, double> central_band(double lo, double hi, double fraction = 0.8) {
    const double a = std::log10(lo), b = std::log10(hi), m = 0.5 * (1 - fraction) * (b - a);
    return {std::pow(10.0, a + m), std::pow(10.0, b - m)};
}

// Steady-state describing function of a model driven by amplitude * sin(omega t):
// H_n = (2 j / (A T)) * integral of u(t) e^{-j n omega t} over whole periods.
struct Extraction {
    std::vector<cplx> harmonics;  // index n-1 holds H_n
};

inline Extraction extract_harmonics(const cloc::HybridModel& model, double omega, int n_max, double amplitude = 1.0,
                                    int settle_periods = 40, int window_periods = 5, int steps_per_period = 40000) {
    const double period = 2.0 * std::numbers::pi / omega;
    cloc::SimOptions so;
    so.dt = period / steps_per_period;
    so.duration = period * (settle_periods + window_periods);
    const double start = period * settle_periods;
    std::vector<cplx> acc(n_max, 0.0);
    double prev_t = -1.0, prev_u = 0.0;
    cloc::integrate(model, cloc::Reference::sine(omega, amplitude), so, [&](const cloc::Sample& s) {
        if (s.t >= start - 0.5 * so.dt && prev_t >= start - 0.5 * so.dt) {
            for (int n = 1; n <= n_max; ++n) {
                const cplx a = prev_u * std::polar(1.0, -n * omega * prev_t);
                const cplx b = s.u * std::polar(1.0, -n * omega * s.t);
                acc[n - 1] += 0.5 * (a + b) * so.dt;
            }
        }
        prev_t = s.t;
        prev_u = s.u;
    });
    Extraction ex;
    const double T = period * window_periods;
    for (int n = 1; n <= n_max; ++n) ex.harmonics.push_back(cplx(0.0, 2.0) / (amplitude * T) * acc[n - 1]);
    return ex;
}

inline double phase_diff_deg(cplx a, cplx b) {
    return std::abs(std::arg(a / b)) * 180.0 / std::numbers::pi;
}

}  // namespace oracle
