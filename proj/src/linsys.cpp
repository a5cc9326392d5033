#include "cloc/linsys.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cloc/errors.hpp"

namespace cloc {

namespace {

constexpr double kRealTol = 1e-12;

bool is_real_root(cplx r) { return std::abs(r.imag()) <= kRealTol * std::max(1.0, std::abs(r)); }

// Snaps near-real roots onto the axis and checks conjugate closure.
std::vector<cplx> normalize_roots(std::vector<cplx> roots, const char* what) {
    std::vector<bool> matched(roots.size(), false);
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (is_real_root(roots[i])) {
            roots[i] = cplx(roots[i].real(), 0.0);
            matched[i] = true;
        }
    }
    for (std::size_t i = 0; i < roots.size(); ++i) {
        if (matched[i]) continue;
        const cplx target = std::conj(roots[i]);
        bool found = false;
        for (std::size_t j = i + 1; j < roots.size(); ++j) {
            if (!matched[j] && std::abs(roots[j] - target) <= 1e-9 * std::max(1.0, std::abs(target))) {
                roots[j] = target;
                matched[i] = matched[j] = true;
                found = true;
                break;
            }
        }
        if (!found) throw ParameterError(std::string(what) + " set is not closed under conjugation");
    }
    return roots;
}

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError(std::string(name) + " must be a positive finite number");
}

}  // namespace

RationalTF::RationalTF(double gain, std::vector<cplx> zeros, std::vector<cplx> poles)
    : gain_(gain), zeros_(normalize_roots(std::move(zeros), "zero")), poles_(normalize_roots(std::move(poles), "pole")) {
    if (!std::isfinite(gain_)) throw ParameterError("transfer function gain must be finite");
}

cplx RationalTF::evaluate(cplx s) const {
    cplx num(gain_, 0.0);
    for (const auto& z : zeros_) num *= (s - z);
    cplx den(1.0, 0.0);
    for (const auto& p : poles_) {
        const cplx d = s - p;
        if (std::abs(d) <= 1e-14 * std::max(1.0, std::abs(p))) throw SingularityError("transfer function evaluated at a pole");
        den *= d;
    }
    return num / den;
}

cplx RationalTF::freq_response(double omega) const {
    require_positive(omega, "omega");
    return evaluate(cplx(0.0, omega));
}

RationalTF RationalTF::operator*(const RationalTF& other) const {
    RationalTF out;
    out.gain_ = gain_ * other.gain_;
    out.zeros_ = zeros_;
    out.zeros_.insert(out.zeros_.end(), other.zeros_.begin(), other.zeros_.end());
    out.poles_ = poles_;
    out.poles_.insert(out.poles_.end(), other.poles_.begin(), other.poles_.end());
    return out;
}

RationalTF RationalTF::cancelled(double rel_tol) const {
    std::vector<cplx> zeros;
    std::vector<bool> pole_used(poles_.size(), false);
    for (const auto& z : zeros_) {
        bool cancelled_one = false;
        for (std::size_t j = 0; j < poles_.size(); ++j) {
            if (!pole_used[j] && std::abs(poles_[j] - z) <= rel_tol * std::max(1.0, std::abs(poles_[j]))) {
                pole_used[j] = true;
                cancelled_one = true;
                break;
            }
        }
        if (!cancelled_one) zeros.push_back(z);
    }
    std::vector<cplx> poles;
    for (std::size_t j = 0; j < poles_.size(); ++j)
        if (!pole_used[j]) poles.push_back(poles_[j]);
    return RationalTF(gain_, std::move(zeros), std::move(poles));
}

StateSpace StateSpace::gain(double k) {
    StateSpace ss;
    ss.A.resize(0, 0);
    ss.B.resize(0, 1);
    ss.C.resize(1, 0);
    ss.D = Eigen::MatrixXd::Constant(1, 1, k);
    return ss;
}

cplx StateSpace::evaluate(cplx s) const {
    if (order() == 0) return D(0, 0);
    Eigen::MatrixXcd M = -A.cast<cplx>();
    M.diagonal().array() += s;
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
    if (!(lu.rcond() > 1e-14)) throw SingularityError("state-space evaluated at an eigenvalue of A");
    const Eigen::VectorXcd x = lu.solve(B.cast<cplx>());
    return (C.cast<cplx>() * x)(0, 0) + D(0, 0);
}

cplx StateSpace::freq_response(double omega) const {
    require_positive(omega, "omega");
    return evaluate(cplx(0.0, omega));
}

cplx freq_response(const RationalTF& sys, double omega) { return sys.freq_response(omega); }
cplx freq_response(const StateSpace& sys, double omega) { return sys.freq_response(omega); }

RationalTF make_first_order_lag(double omega_p) {
    require_positive(omega_p, "lag corner");
    return RationalTF(omega_p, {}, {cplx(-omega_p, 0.0)});
}

RationalTF make_lead(double omega_z, double omega_p) {
    require_positive(omega_z, "lead zero corner");
    require_positive(omega_p, "lead pole corner");
    return RationalTF(omega_p / omega_z, {cplx(-omega_z, 0.0)}, {cplx(-omega_p, 0.0)}).cancelled();
}

RationalTF make_pi(double k, double omega_i) {
    if (omega_i < 0.0 || !std::isfinite(omega_i)) throw ParameterError("integrator corner must be >= 0");
    if (omega_i == 0.0) return RationalTF::constant(k);
    return RationalTF(k, {cplx(-omega_i, 0.0)}, {cplx(0.0, 0.0)});
}

RationalTF make_tamed_differentiator(double omega_d, double omega_t) {
    if (omega_d > omega_t) throw ParameterError("tamed differentiator needs omega_d <= omega_t");
    return make_lead(omega_d, omega_t);
}

RationalTF make_double_integrator(double gain) { return RationalTF(gain, {}, {cplx(0.0, 0.0), cplx(0.0, 0.0)}); }

RationalTF make_pid(double k_p, double omega_c, double omega_i, double omega_d, double omega_t) {
    if (!(0.0 < omega_i && omega_i < omega_d && omega_d < omega_c && omega_c < omega_t))
        throw ParameterError("PID corners must satisfy 0 < omega_i < omega_d < omega_c < omega_t");
    return make_pi(k_p, omega_i) * make_tamed_differentiator(omega_d, omega_t);
}

void ShapingFilterSpec::validate() const {
    require_positive(omega_l, "omega_l");
    require_positive(omega_h, "omega_h");
    if (omega_h < omega_l) throw ParameterError("shaping band needs omega_l <= omega_h");
    if (!(zeta > 1.0) || !(eta > 1.0)) throw ParameterError("zeta and eta must exceed 1");
    if (M < 1 || N < 1) throw ParameterError("zero and pole counts must be positive");
    const double rel = 1e-12;
    if (zero_corners().back() < omega_h * (1.0 - rel) || pole_corners().back() < omega_h * (1.0 - rel))
        throw ParameterError("ladder does not reach omega_h; increase M or N");
}

std::vector<double> ShapingFilterSpec::zero_corners() const {
    std::vector<double> out;
    double w = omega_l;
    for (int j = 0; j < M; ++j, w *= zeta) out.push_back(w);
    return out;
}

std::vector<double> ShapingFilterSpec::pole_corners() const {
    std::vector<double> out;
    double w = omega_l;
    for (int i = 0; i < N; ++i, w *= eta) out.push_back(w);
    return out;
}

RationalTF make_crone_q(const ShapingFilterSpec& spec) {
    spec.validate();
    std::vector<cplx> zeros, poles;
    double log_gain = 0.0;
    for (double w : spec.zero_corners()) {
        zeros.emplace_back(-w, 0.0);
        log_gain -= std::log(w);
    }
    for (double w : spec.pole_corners()) {
        poles.emplace_back(-w, 0.0);
        log_gain += std::log(w);
    }
    return RationalTF(std::exp(log_gain), std::move(zeros), std::move(poles)).cancelled();
}

double phase_slope(double zeta, double eta) {
    if (!(zeta > 1.0) || !(eta > 1.0)) throw ParameterError("phase_slope needs zeta > 1 and eta > 1");
    constexpr double half_pi = std::numbers::pi / 2.0;
    return half_pi / std::log10(zeta) - half_pi / std::log10(eta);
}

RationalTF make_oustaloup(double alpha, double omega_l, double omega_h, int order) {
    if (!(alpha > -2.0 && alpha < 2.0)) throw ParameterError("Oustaloup order alpha must lie in (-2, 2)");
    require_positive(omega_l, "omega_l");
    if (!(omega_h > omega_l)) throw ParameterError("Oustaloup band is empty");
    if (order < 1) throw ParameterError("Oustaloup order must be positive");
    if (alpha == 0.0) return RationalTF::constant(1.0);

    const double ratio = omega_h / omega_l;
    std::vector<cplx> zeros, poles;
    for (int k = 1; k <= order; ++k) {
        const double base = k - 0.5;
        zeros.emplace_back(-omega_l * std::pow(ratio, (base - alpha / 2.0) / order), 0.0);
        poles.emplace_back(-omega_l * std::pow(ratio, (base + alpha / 2.0) / order), 0.0);
    }
    RationalTF unit(1.0, std::move(zeros), std::move(poles));
    const double omega_m = std::sqrt(omega_l * omega_h);
    const double k = std::pow(omega_m, alpha) / std::abs(unit.freq_response(omega_m));
    return RationalTF(k, unit.zeros(), unit.poles());
}

namespace {

struct Section {
    std::vector<cplx> poles;  // one real pole or two (conjugate pair or two reals)
    std::vector<cplx> zeros;  // at most poles.size()
};

// Monic real polynomial coefficients, lowest degree first.
std::vector<double> monic_poly(const std::vector<cplx>& roots) {
    if (roots.empty()) return {1.0};
    if (roots.size() == 1) return {-roots[0].real(), 1.0};
    const cplx sum = roots[0] + roots[1];
    const cplx prod = roots[0] * roots[1];
    return {prod.real(), -sum.real(), 1.0};
}

cplx eval_section(const Section& s, cplx x) {
    cplx v(1.0, 0.0);
    for (const auto& z : s.zeros) v *= (x - z);
    for (const auto& p : s.poles) v /= (x - p);
    return v;
}

StateSpace realize_section(const Section& sec, double c) {
    StateSpace ss;
    const auto den = monic_poly(sec.poles);
    const auto num = monic_poly(sec.zeros);
    if (sec.poles.size() == 1) {
        const double p = sec.poles[0].real();
        // Input scaling keeps the state O(input) for fast poles.
        const double b = (p != 0.0) ? std::abs(p) : 1.0;
        ss.A = Eigen::MatrixXd::Constant(1, 1, p);
        ss.B = Eigen::MatrixXd::Constant(1, 1, b);
        if (sec.zeros.empty()) {
            ss.C = Eigen::MatrixXd::Constant(1, 1, c / b);
            ss.D = Eigen::MatrixXd::Constant(1, 1, 0.0);
        } else {
            const double z = sec.zeros[0].real();
            ss.C = Eigen::MatrixXd::Constant(1, 1, c * (p - z) / b);
            ss.D = Eigen::MatrixXd::Constant(1, 1, c);
        }
        return ss;
    }
    const double a0 = den[0];
    const double a1 = den[1];
    double b0 = 0.0, b1 = 0.0, b2 = 0.0;
    if (num.size() == 1) {
        b0 = num[0];
    } else if (num.size() == 2) {
        b0 = num[0];
        b1 = num[1];
    } else {
        b0 = num[0];
        b1 = num[1];
        b2 = num[2];
    }
    // Controllable canonical form with the first state scaled by wn.
    const double wn = (a0 > 0.0) ? std::sqrt(a0) : 1.0;
    ss.A.resize(2, 2);
    ss.A << 0.0, wn, -a0 / wn, -a1;
    ss.B.resize(2, 1);
    ss.B << 0.0, 1.0;
    ss.C.resize(1, 2);
    ss.C << c * (b0 - b2 * a0) / wn, c * (b1 - b2 * a1);
    ss.D = Eigen::MatrixXd::Constant(1, 1, c * b2);
    return ss;
}

}  // namespace

StateSpace realize(const RationalTF& tf_in) {
    const RationalTF tf = tf_in.cancelled();
    if (!tf.is_proper())
        throw ParameterError("cannot realize an improper transfer function; factor out the improper part first");
    if (tf.poles().empty()) return StateSpace::gain(tf.gain());

    // Pole sections.
    std::vector<Section> sections;
    for (const auto& p : tf.poles()) {
        if (p.imag() == 0.0) {
            sections.push_back({{p}, {}});
        } else if (p.imag() > 0.0) {
            sections.push_back({{p, std::conj(p)}, {}});
        }
    }
    std::stable_sort(sections.begin(), sections.end(),
                     [](const Section& a, const Section& b) { return std::abs(a.poles[0]) < std::abs(b.poles[0]); });

    std::vector<cplx> real_zeros;
    std::vector<cplx> complex_zeros;
    for (const auto& z : tf.zeros()) {
        if (z.imag() == 0.0) real_zeros.push_back(z);
        else if (z.imag() > 0.0) complex_zeros.push_back(z);
    }

    for (const auto& z : complex_zeros) {
        auto it = std::find_if(sections.begin(), sections.end(),
                               [](const Section& s) { return s.poles.size() == 2 && s.zeros.empty(); });
        if (it == sections.end()) {
            // Merge two empty first-order sections into one second-order section.
            auto a = std::find_if(sections.begin(), sections.end(),
                                  [](const Section& s) { return s.poles.size() == 1 && s.zeros.empty(); });
            if (a == sections.end()) throw ParameterError("cannot place complex zero pair in a proper section");
            auto b = std::find_if(a + 1, sections.end(),
                                  [](const Section& s) { return s.poles.size() == 1 && s.zeros.empty(); });
            if (b == sections.end()) throw ParameterError("cannot place complex zero pair in a proper section");
            a->poles.push_back(b->poles[0]);
            sections.erase(b);
            it = a;
        }
        it->zeros = {z, std::conj(z)};
    }
    // Sorted matching: the k-th smallest real zero joins the k-th section (by
    // pole magnitude) that still has room, which keeps each section's zero and
    // pole close and avoids large internal cancellations.
    std::sort(real_zeros.begin(), real_zeros.end(), [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < sections.size(); ++i)
        for (std::size_t k = sections[i].zeros.size(); k < sections[i].poles.size(); ++k) open.push_back(i);
    if (real_zeros.size() > open.size()) throw ParameterError("cannot place real zero in a proper section");
    // Spread zeros over the open slots so that the match is monotone.
    {
        const std::size_t nz = real_zeros.size(), ns = open.size();
        std::size_t start = 0;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t off = 0; off + nz <= ns; ++off) {
            double cost = 0.0;
            for (std::size_t k = 0; k < nz; ++k) {
                const double zp = std::max(std::abs(real_zeros[k]), 1e-300);
                const double pp = std::max(std::abs(sections[open[off + k]].poles[0]), 1e-300);
                cost += std::abs(std::log(zp / pp));
            }
            if (cost < best_cost) {
                best_cost = cost;
                start = off;
            }
        }
        for (std::size_t k = 0; k < nz; ++k) sections[open[start + k]].zeros.push_back(real_zeros[k]);
    }

    // Unit gain per section at DC (or at its characteristic frequency when a
    // root sits at the origin); the last section absorbs the remaining gain.
    std::vector<double> gains(sections.size(), 1.0);
    double product = 1.0;
    for (std::size_t i = 0; i + 1 < sections.size(); ++i) {
        bool origin = false;
        double w = 0.0;
        for (const auto& p : sections[i].poles) {
            origin = origin || std::abs(p) == 0.0;
            w = std::max(w, std::abs(p));
        }
        for (const auto& z : sections[i].zeros) {
            origin = origin || std::abs(z) == 0.0;
            w = std::max(w, std::abs(z));
        }
        if (w == 0.0) w = 1.0;
        const double mag = std::abs(eval_section(sections[i], origin ? cplx(0.0, w) : cplx(0.0, 0.0)));
        gains[i] = (mag > 0.0 && std::isfinite(mag)) ? 1.0 / mag : 1.0;
        product *= gains[i];
    }
    gains.back() = tf.gain() / product;

    StateSpace out = realize_section(sections[0], gains[0]);
    for (std::size_t i = 1; i < sections.size(); ++i) out = series(out, realize_section(sections[i], gains[i]));
    return out;
}

StateSpace series(const StateSpace& first, const StateSpace& second) {
    const Eigen::Index n1 = first.order();
    const Eigen::Index n2 = second.order();
    StateSpace out;
    out.A = Eigen::MatrixXd::Zero(n1 + n2, n1 + n2);
    out.A.topLeftCorner(n1, n1) = first.A;
    out.A.bottomLeftCorner(n2, n1) = second.B * first.C;
    out.A.bottomRightCorner(n2, n2) = second.A;
    out.B.resize(n1 + n2, 1);
    out.B.topRows(n1) = first.B;
    out.B.bottomRows(n2) = second.B * first.D;
    out.C.resize(1, n1 + n2);
    out.C.leftCols(n1) = second.D * first.C;
    out.C.rightCols(n2) = second.C;
    out.D = second.D * first.D;
    return out;
}

std::vector<cplx> feedback_poles(const StateSpace& open_loop) {
    const double denom = 1.0 + open_loop.feedthrough();
    if (std::abs(denom) < 1e-14) throw SingularityError("algebraic loop: 1 + D = 0");
    if (open_loop.order() == 0) return {};
    const Eigen::MatrixXd Acl = open_loop.A - open_loop.B * open_loop.C / denom;
    Eigen::EigenSolver<Eigen::MatrixXd> es(Acl, false);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
    std::vector<cplx> out;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
    return out;
}

std::vector<double> log_grid(double lo, double hi, std::size_t points) {
    require_positive(lo, "grid lower bound");
    require_positive(hi, "grid upper bound");
    if (hi < lo) throw ParameterError("grid upper bound below lower bound");
    if (points == 0) throw ParameterError("grid needs at least one point");
    if (points == 1) return {lo};
    std::vector<double> out(points);
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t i = 0; i < points; ++i)
        out[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1));
    out.front() = lo;
    out.back() = hi;
    return out;
}

std::vector<double> log_grid_per_decade(double lo, double hi, double points_per_decade) {
    require_positive(points_per_decade, "points per decade");
    require_positive(lo, "grid lower bound");
    if (hi < lo) throw ParameterError("grid upper bound below lower bound");
    const double decades = std::log10(hi / lo);
    const auto points = static_cast<std::size_t>(std::ceil(decades * points_per_decade)) + 1;
    return log_grid(lo, hi, std::max<std::size_t>(points, hi > lo ? 2 : 1));
}

std::vector<double> unwrap_phase(std::span<const double> phase) {
    std::vector<double> out(phase.begin(), phase.end());
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t i = 1; i < out.size(); ++i) {
        const double d = out[i] - out[i - 1];
        out[i] -= two_pi * std::round(d / two_pi);
    }
    return out;
}

BodeData bode(const RationalTF& sys, std::span<const double> omega) {
    BodeData b;
    b.omega.assign(omega.begin(), omega.end());
    std::vector<double> raw;
    for (double w : omega) {
        const cplx g = sys.freq_response(w);
        b.mag_db.push_back(20.0 * std::log10(std::abs(g)));
        raw.push_back(std::arg(g));
    }
    b.phase_rad = unwrap_phase(raw);
    return b;
}

}  // namespace cloc
