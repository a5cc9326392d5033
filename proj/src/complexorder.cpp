#include "cloc/complexorder.hpp"

#include <cmath>
#include <numbers>

#include "cloc/errors.hpp"

namespace cloc {

namespace {
void check_omega(double omega) {
    if (!(omega > 0.0) || !std::isfinite(omega)) throw ParameterError("complex-order response needs omega > 0");
}
}  // namespace

double ComplexOrderTarget::gain_db(double omega) const {
    check_omega(omega);
    return 20.0 * alpha * std::log10(omega) + 20.0 * std::log10(std::exp(-beta * std::numbers::pi / 2.0));
}

double ComplexOrderTarget::phase_rad(double omega) const {
    check_omega(omega);
    return alpha * std::numbers::pi / 2.0 + beta * std::log(10.0) * std::log10(omega);
}

std::complex<double> complex_order_response(const ComplexOrderTarget& target, double omega) {
    check_omega(omega);
    const double mag = std::pow(omega, target.alpha) * std::exp(-target.beta * std::numbers::pi / 2.0);
    return std::polar(mag, target.phase_rad(omega));
}

}  // namespace cloc
