#pragma once

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <array>
#include <cmath>
#include <memory>
#include <string>

#include "lmss/error.hpp"

namespace lmss {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;  // estimated absolute error
    double l1 = 0.0;     // integral of |f|, for relative error checks
};

namespace detail {
// The rule grows its abscissa tables lazily, so nested integrations need one rule per depth.
inline constexpr int kMaxNesting = 8;
inline boost::math::quadrature::tanh_sinh<double>& ts_rule(int depth) {
    thread_local std::array<std::unique_ptr<boost::math::quadrature::tanh_sinh<double>>, kMaxNesting> rules;
    auto& r = rules.at(depth);
    if (!r) r = std::make_unique<boost::math::quadrature::tanh_sinh<double>>(12);
    return *r;
}
inline int& nesting_depth() {
    thread_local int depth = 0;
    return depth;
}
}  // namespace detail

// Integrates f(x, dl, dr) over [a, b], where dl = x - a and dr = b - x are exact distances to the
// endpoints, so integrands with endpoint singularities can be evaluated without cancellation.
template <class F>
QuadResult integrate_panel(F&& f, double a, double b, double rel_tol) {
    if (!(b > a)) return {};
    const double width = b - a;
    auto g = [&](double x, double xc) {
        double dl, dr;
        if (xc < 0) {
            dl = -xc;
            dr = width - dl;
        } else {
            dr = xc;
            dl = width - dr;
        }
        return f(x, dl, dr);
    };
    QuadResult r;
    int& depth = detail::nesting_depth();
    if (depth >= detail::kMaxNesting) fail(ErrorKind::numeric, "quadrature nested too deeply");
    struct Guard {
        int& d;
        ~Guard() { --d; }
    } guard{++depth};
    try {
        r.value = detail::ts_rule(depth - 1).integrate(g, a, b, rel_tol, &r.error, &r.l1);
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorKind::numeric, std::string("quadrature failed: ") + e.what());
    }
    if (!std::isfinite(r.value)) fail(ErrorKind::numeric, "quadrature produced a non-finite value");
    return r;
}

// Adaptive quadrature of int_R |x|^b exp(-A |x|^a) dx, independent of the Gamma-function closed form.
QuadResult gamma_integral_quadrature(double a, double b, double A, double rel_tol = 1e-12);

}  // namespace lmss
