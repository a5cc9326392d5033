#include "cloc/matrix_exp.hpp"

#include <array>
#include <cmath>

#include "cloc/errors.hpp"

namespace cloc {

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& A) {
    if (A.rows() != A.cols()) throw ParameterError("matrix exponential needs a square matrix");
    const Eigen::Index n = A.rows();
    if (n == 0) return A;
    if (!A.allFinite()) throw NumericalError("matrix exponential of a non-finite matrix");

    // Scale so that ||A / 2^s||_inf <= 0.5; the [6/6] Pade error is then below 1e-16.
    const double norm = A.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / 0.5))));
    const Eigen::MatrixXd X = A / std::ldexp(1.0, squarings);

    // c_k = (2q - k)! q! / ((2q)! k! (q - k)!), q = 6
    constexpr std::array<double, 7> c{1.0,
                                      1.0 / 2.0,
                                      5.0 / 44.0,
                                      1.0 / 66.0,
                                      1.0 / 792.0,
                                      1.0 / 15840.0,
                                      1.0 / 665280.0};
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd power = I;
    Eigen::MatrixXd num = c[0] * I;
    Eigen::MatrixXd den = c[0] * I;
    for (int k = 1; k <= 6; ++k) {
        power = power * X;
        num += c[k] * power;
        den += ((k % 2 == 0) ? c[k] : -c[k]) * power;
    }
    Eigen::MatrixXd E = den.partialPivLu().solve(num);
    for (int i = 0; i < squarings; ++i) E = E * E;
    return E;
}

}  // namespace cloc
