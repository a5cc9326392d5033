#pragma once

#include <complex>

namespace cloc {

// Target response s^(alpha + j beta) evaluated on the imaginary axis.
struct ComplexOrderTarget {
    double alpha = 0.0;
    double beta = 0.0;

    // 20 alpha log10(w) + 20 log10(e^{-beta pi / 2})
    double gain_db(double omega) const;
    // alpha pi / 2 + beta ln(10) log10(w); affine in log10(w), never wrapped.
    double phase_rad(double omega) const;
};

// G(j omega) = j^alpha omega^alpha j^{j beta} omega^{j beta}.
// Throws ParameterError when omega <= 0.
std::complex<double> complex_order_response(const ComplexOrderTarget& target, double omega);

}  // namespace cloc
