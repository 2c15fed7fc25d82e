#include "lmss/quadrature.hpp"

namespace lmss {

QuadResult gamma_integral_quadrature(double a, double b, double A, double rel_tol) {
    require(a > 0.0 && A > 0.0 && b >= 0.0, "gamma integral needs a > 0, b >= 0, A > 0");
    // Split at the natural scale x1 = A^{-1/a}; the tail is mapped to (0, 1] through x = x1 / s.
    const double x1 = std::pow(A, -1.0 / a);
    auto near = [&](double x, double, double) { return std::pow(x, b) * std::exp(-A * std::pow(x, a)); };
    auto far = [&](double s, double, double) {
        const double x = x1 / s;
        const double e = A * std::pow(x, a);
        if (e > 745.0) return 0.0;
        return std::pow(x, b) * std::exp(-e) * x1 / (s * s);
    };
    QuadResult r1 = integrate_panel(near, 0.0, x1, rel_tol);
    QuadResult r2 = integrate_panel(far, 0.0, 1.0, rel_tol);
    return {2.0 * (r1.value + r2.value), 2.0 * (r1.error + r2.error), 2.0 * (r1.l1 + r2.l1)};
}

}  // namespace lmss
