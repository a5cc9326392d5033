#include "cloc/timesim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <numbers>
#include <thread>

#include "cloc/errors.hpp"

namespace cloc {

double Reference::operator()(double t) const {
    switch (kind) {
        case Kind::Zero: return 0.0;
        case Kind::Step: return t >= 0.0 ? amplitude : 0.0;
        case Kind::Sine: return amplitude * std::sin(omega * t);
    }
    return 0.0;
}

namespace {

// Places blocks into one state vector and wires their inputs.
class Assembler {
public:
    explicit Assembler(Eigen::Index n) : A_(Eigen::MatrixXd::Zero(n, n)), B_(Eigen::VectorXd::Zero(n)), n_(n) {}

    Eigen::Index reserve(Eigen::Index order) {
        const Eigen::Index off = next_;
        next_ += order;
        return off;
    }

    OutputMap input() const { return {Eigen::RowVectorXd::Zero(n_), 1.0}; }

    // Output of a block (whose states start at off) that is not yet wired.
    OutputMap output_of(const StateSpace& blk, Eigen::Index off, const OutputMap& in) const {
        OutputMap out{in.c * blk.D(0, 0), in.d * blk.D(0, 0)};
        if (blk.order() > 0) out.c.segment(off, blk.order()) += blk.C.row(0);
        return out;
    }

    // Installs x_blk' = A_blk x_blk + B_blk in and returns the block output.
    OutputMap feed(const StateSpace& blk, Eigen::Index off, const OutputMap& in) {
        const Eigen::Index k = blk.order();
        if (k > 0) {
            A_.block(off, off, k, k) += blk.A;
            A_.middleRows(off, k) += blk.B.col(0) * in.c;
            B_.segment(off, k) += blk.B.col(0) * in.d;
        }
        return output_of(blk, off, in);
    }

    Eigen::MatrixXd A_;
    Eigen::VectorXd B_;

private:
    Eigen::Index n_;
    Eigen::Index next_ = 0;
};

OutputMap negate_plus_input(const OutputMap& y) { return {-y.c, 1.0 - y.d}; }

Eigen::VectorXd rk4_step(const Eigen::MatrixXd& A, const Eigen::VectorXd& B, const Eigen::VectorXd& x, double r0,
                         double rm, double r1, double h) {
    const Eigen::VectorXd k1 = A * x + B * r0;
    const Eigen::VectorXd k2 = A * (x + 0.5 * h * k1) + B * rm;
    const Eigen::VectorXd k3 = A * (x + 0.5 * h * k2) + B * rm;
    const Eigen::VectorXd k4 = A * (x + h * k3) + B * r1;
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

int sign_of(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

HybridModel build_closed_loop(const Loop& loop) {
    const StateSpace plant = realize(loop.plant);
    if (plant.feedthrough() != 0.0) throw ParameterError("closed-loop simulation needs a strictly proper plant");

    HybridModel m;
    if (const auto* tf = std::get_if<RationalTF>(&loop.controller)) {
        const StateSpace k = realize(*tf);
        Assembler as(plant.order() + k.order());
        const Eigen::Index p_off = as.reserve(plant.order());
        const Eigen::Index k_off = as.reserve(k.order());
        m.y = as.input();
        m.y.d = 0.0;
        m.y.c.segment(p_off, plant.order()) = plant.C.row(0);
        m.e = negate_plus_input(m.y);
        m.u = as.feed(k, k_off, m.e);
        as.feed(plant, p_off, m.u);
        m.x_rl = m.e;
        m.A = std::move(as.A_);
        m.B = std::move(as.B_);
        return m;
    }

    const auto& chain = std::get<ResetChain>(loop.controller);
    chain.reset.validate();
    const StateSpace pre = realize(chain.pre);
    const StateSpace& base = chain.reset.base;
    const StateSpace post = realize(chain.post);
    const std::optional<StateSpace> sf =
        chain.reset_signal_filter ? std::optional<StateSpace>(realize(*chain.reset_signal_filter)) : std::nullopt;

    Assembler as(plant.order() + pre.order() + base.order() + post.order() + (sf ? sf->order() : 0));
    const Eigen::Index p_off = as.reserve(plant.order());
    const Eigen::Index pre_off = as.reserve(pre.order());
    const Eigen::Index base_off = as.reserve(base.order());
    const Eigen::Index post_off = as.reserve(post.order());
    const Eigen::Index sf_off = sf ? as.reserve(sf->order()) : -1;

    m.y = as.input();
    m.y.d = 0.0;
    m.y.c.segment(p_off, plant.order()) = plant.C.row(0);
    m.e = negate_plus_input(m.y);
    const OutputMap v = as.feed(pre, pre_off, m.e);
    const OutputMap w = as.feed(base, base_off, v);
    m.u = as.feed(post, post_off, w);
    m.x_rl = sf ? as.feed(*sf, sf_off, v) : v;
    as.feed(plant, p_off, m.u);
    m.reset_offset = base_off;
    m.reset_matrix = chain.reset.reset_matrix;
    m.A = std::move(as.A_);
    m.B = std::move(as.B_);
    return m;
}

HybridModel build_open_loop(const ResetChain& chain) {
    chain.reset.validate();
    const StateSpace pre = realize(chain.pre);
    const StateSpace& base = chain.reset.base;
    const StateSpace post = realize(chain.post);
    const std::optional<StateSpace> sf =
        chain.reset_signal_filter ? std::optional<StateSpace>(realize(*chain.reset_signal_filter)) : std::nullopt;

    Assembler as(pre.order() + base.order() + post.order() + (sf ? sf->order() : 0));
    const Eigen::Index pre_off = as.reserve(pre.order());
    const Eigen::Index base_off = as.reserve(base.order());
    const Eigen::Index post_off = as.reserve(post.order());
    const Eigen::Index sf_off = sf ? as.reserve(sf->order()) : -1;

    HybridModel m;
    m.e = as.input();
    const OutputMap v = as.feed(pre, pre_off, m.e);
    const OutputMap w = as.feed(base, base_off, v);
    m.u = as.feed(post, post_off, w);
    m.y = m.u;
    m.x_rl = sf ? as.feed(*sf, sf_off, v) : v;
    m.reset_offset = base_off;
    m.reset_matrix = chain.reset.reset_matrix;
    m.A = std::move(as.A_);
    m.B = std::move(as.B_);
    return m;
}

double stiffness_ratio(const HybridModel& model, double dt) {
    if (model.order() == 0) return 0.0;
    const Eigen::VectorXcd ev = Eigen::EigenSolver<Eigen::MatrixXd>(model.A, false).eigenvalues();
    return ev.cwiseAbs().maxCoeff() * dt;
}

double recommended_dt(const HybridModel& model) {
    const double rate = stiffness_ratio(model, 1.0);
    if (!(rate > 0.0)) return 1e-3;
    return 1.0 / (50.0 * rate / (2.0 * std::numbers::pi));
}

void integrate(const HybridModel& model, const Reference& ref, const SimOptions& opt,
               const std::function<void(const Sample&)>& observer, std::vector<ResetEvent>* resets) {
    if (!(opt.dt > 0.0) || !(opt.duration > 0.0)) throw ParameterError("dt and duration must be positive");
    if (stiffness_ratio(model, opt.dt) > 2.7)
        throw ParameterError("dt too large for the fastest mode (RK4 stability bound); reduce dt");

    const Eigen::Index n = model.order();
    const double h = opt.dt;
    // RK4 on a linear system is an affine map of (x, r0, rm, r1); precompute it.
    Eigen::MatrixXd P(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        P.col(i) = rk4_step(model.A, model.B, Eigen::VectorXd::Unit(n, i), 0.0, 0.0, 0.0, h);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd b0 = rk4_step(model.A, model.B, zero, 1.0, 0.0, 0.0, h);
    const Eigen::VectorXd bm = rk4_step(model.A, model.B, zero, 0.0, 1.0, 0.0, h);
    const Eigen::VectorXd b1 = rk4_step(model.A, model.B, zero, 0.0, 0.0, 1.0, h);

    const auto steps = static_cast<long long>(std::llround(opt.duration / h));
    Eigen::VectorXd x = zero, xn(n);
    const Eigen::Index roff = model.reset_offset;
    const Eigen::Index rn = model.has_reset() ? model.reset_matrix.rows() : 0;

    auto emit = [&](double t, double r) {
        observer(Sample{t, r, model.y(x, r), model.e(x, r), model.u(x, r), model.x_rl(x, r)});
    };

    double r_prev = ref(0.0);
    double s_prev = model.has_reset() ? model.x_rl(x, r_prev) : 0.0;
    int side = sign_of(s_prev);
    emit(0.0, r_prev);

    for (long long i = 0; i < steps; ++i) {
        const double t0 = static_cast<double>(i) * h;
        const double t1 = static_cast<double>(i + 1) * h;
        const double r_mid = ref(t0 + 0.5 * h);
        const double r1 = ref(t1);
        xn.noalias() = P * x;
        xn += b0 * r_prev + bm * r_mid + b1 * r1;

        if (model.has_reset()) {
            double s1 = model.x_rl(xn, r1);
            const int s1_sign = sign_of(s1);
            const bool grazing = std::abs(s_prev) < opt.grazing_floor && std::abs(s1) < opt.grazing_floor;
            if (side != 0 && s1_sign != 0 && s1_sign != side && !grazing) {
                const double tau = (s_prev == 0.0) ? 0.0 : h * s_prev / (s_prev - s1);
                const double tc = t0 + tau;
                Eigen::VectorXd xc = rk4_step(model.A, model.B, x, r_prev, ref(t0 + 0.5 * tau), ref(tc), tau);
                const Eigen::VectorXd before = xc.segment(roff, rn);
                xc.segment(roff, rn) = model.reset_matrix * before;
                if (resets) resets->push_back({tc, (xc.segment(roff, rn) - before).norm(), before.norm()});
                const double rest = h - tau;
                xn = rk4_step(model.A, model.B, xc, ref(tc), ref(tc + 0.5 * rest), r1, rest);
                s1 = model.x_rl(xn, r1);
                if (sign_of(s1) != 0) side = sign_of(s1);
                else side = s1_sign;
            } else if (s1_sign != 0) {
                side = s1_sign;
            }
            s_prev = s1;
        }

        const double mag = xn.cwiseAbs().maxCoeff();
        if (!std::isfinite(mag) || mag > opt.overflow_guard) throw DivergenceError(t1, mag);
        x.swap(xn);
        r_prev = r1;
        emit(t1, r1);
    }
}

SimulationTrace simulate(const HybridModel& model, const Reference& ref, const SimOptions& opt) {
    if (opt.record_stride == 0) throw ParameterError("record stride must be positive");
    SimulationTrace tr;
    const auto expected = static_cast<std::size_t>(opt.duration / opt.dt / static_cast<double>(opt.record_stride)) + 2;
    for (auto* v : {&tr.time, &tr.r, &tr.y, &tr.e, &tr.u, &tr.x_rl}) v->reserve(expected);
    std::size_t k = 0;
    integrate(
        model, ref, opt,
        [&](const Sample& s) {
            if (k++ % opt.record_stride != 0) return;
            tr.time.push_back(s.t);
            tr.r.push_back(s.r);
            tr.y.push_back(s.y);
            tr.e.push_back(s.e);
            tr.u.push_back(s.u);
            tr.x_rl.push_back(s.x_rl);
        },
        &tr.resets);
    tr.reset_instants.reserve(tr.resets.size());
    for (const auto& ev : tr.resets) tr.reset_instants.push_back(ev.time);
    return tr;
}

SimulationTrace simulate(const Loop& loop, const Reference& ref, const SimOptions& opt) {
    return simulate(build_closed_loop(loop), ref, opt);
}

StepMetrics step_metrics(const SimulationTrace& trace) {
    const auto& y = trace.y;
    const auto& t = trace.time;
    const std::size_t n = y.size();
    if (n < 20 || t.size() != n) throw ParameterError("step metrics need at least 20 samples");

    StepMetrics m;
    const std::size_t tail = std::max<std::size_t>(1, n / 20);
    double fv = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) fv += y[i];
    fv /= static_cast<double>(tail);
    m.final_value = fv;
    if (!(std::abs(fv) > 0.0) || !std::isfinite(fv)) return m;

    const double sgn = fv > 0.0 ? 1.0 : -1.0;
    const double target = std::abs(fv);
    const double band = 0.02 * target;
    std::size_t last_out = 0;
    bool ever_out = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(y[i] - fv) > band) {
            last_out = i;
            ever_out = true;
        }
    }
    if (ever_out && last_out >= n - tail) return m;
    m.settled = true;
    m.settling_time = ever_out ? t[last_out + 1] : t[0];

    double peak = -std::numeric_limits<double>::infinity();
    for (double v : y) peak = std::max(peak, sgn * v);
    m.overshoot_pct = std::max(0.0, (peak - target) / target * 100.0);

    auto first_cross = [&](double level) -> std::optional<double> {
        for (std::size_t i = 1; i < n; ++i) {
            const double a = sgn * y[i - 1], b = sgn * y[i];
            if (a < level && b >= level) return t[i - 1] + (t[i] - t[i - 1]) * (level - a) / (b - a);
            if (i == 1 && a >= level) return t[0];
        }
        return std::nullopt;
    };
    const auto t10 = first_cross(0.1 * target);
    const auto t90 = first_cross(0.9 * target);
    if (t10 && t90) m.rise_time = *t90 - *t10;
    return m;
}

double sensitivity_estimate(const HybridModel& model, double omega, const SensitivityOptions& opt) {
    if (!(omega > 0.0)) throw ParameterError("sensitivity estimate needs omega > 0");
    if (opt.cycles < 20) throw ParameterError("sensitivity estimate needs at least 20 cycles");
    const double duration = std::max(opt.cycles * 2.0 * std::numbers::pi / omega, opt.min_duration);
    const double start = 0.5 * duration;
    double ee = 0.0, rr = 0.0;
    SimOptions so;
    so.dt = opt.dt;
    so.duration = duration;
    integrate(model, Reference::sine(omega), so, [&](const Sample& s) {
        if (s.t < start) return;
        ee += s.e * s.e;
        rr += s.r * s.r;
    });
    if (!(rr > 0.0)) throw NumericalError("reference has no energy in the evaluation window");
    return std::sqrt(ee / rr);
}

double sensitivity_estimate(const Loop& loop, double omega, const SensitivityOptions& opt) {
    return sensitivity_estimate(build_closed_loop(loop), omega, opt);
}

std::vector<double> sensitivity_sweep(const HybridModel& model, std::span<const double> omegas,
                                      const SensitivityOptions& opt) {
    std::vector<double> out(omegas.size());
    std::vector<std::exception_ptr> errors(omegas.size());
    std::atomic<std::size_t> next{0};
    const unsigned workers =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(omegas.size())));
    std::vector<std::future<void>> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.push_back(std::async(std::launch::async, [&] {
            for (std::size_t i = next++; i < omegas.size(); i = next++) {
                try {
                    out[i] = sensitivity_estimate(model, omegas[i], opt);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        }));
    }
    for (auto& f : pool) f.get();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

SimulationTrace track_sine(const Loop& loop, double omega, double dt, double duration, double amplitude) {
    if (!(omega > 0.0)) throw ParameterError("tracking needs omega > 0");
    SimOptions so;
    so.dt = dt;
    so.duration = duration;
    return simulate(loop, Reference::sine(omega, amplitude), so);
}

}  // namespace cloc
