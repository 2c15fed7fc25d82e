#pragma once

#include <string>
#include <vector>

#include "lmss/kernel.hpp"
#include "lmss/stable.hpp"

namespace lmss {

enum class Regime { supercritical, critical, subcritical };

const char* regime_name(Regime r);

// int_a^b (A + |t - t0|^alpha)^{-beta} dt across a decreasing list of A.
struct AsymptoticCheck {
    Regime regime = Regime::subcritical;
    double alpha = 0.0, beta = 0.0, a = 0.0, b = 0.0, t0 = 0.0;
    std::vector<double> A_values;
    std::vector<double> integral_values;
    std::vector<double> quad_errors;
    // Supercritical: log-log slope of the integral against A. Otherwise zero.
    double fitted_slope = 0.0;
    double theory_slope = 0.0;
    // Critical: integral / log((1 + (b-t0) A^{-1/alpha}) (1 + (t0-a) A^{-1/alpha})).
    // Subcritical: integral / integral at the largest A.
    // Supercritical: integral / A^{-(beta - 1/alpha)}.
    std::vector<double> ratios;
    double ratio_min = 0.0, ratio_max = 0.0;
    double slope_tolerance = 0.02;
    bool passed = false;
};

double int_equiv_integral(double alpha, double beta, double a, double b, double t0, double A,
                          double rel_tol = 1e-10, double* abs_error = nullptr);

AsymptoticCheck verify_int_equiv(double alpha, double beta, double a, double b, double t0,
                                 const std::vector<double>& A_values, const QuadratureSpec& quad = {});

struct TriangleCheck {
    double lhs = 0.0;
    double rhs = 0.0;
    bool satisfied = false;
};

// |sum x_l|^alpha <= (n^{alpha-1} v 1) sum |x_l|^alpha
TriangleCheck verify_triangle(double alpha, const std::vector<double>& x);

struct PWeights {
    std::string construction;
    int terms = 0;              // indices entering the conditions
    std::vector<double> p;
    double sum_inv_p = 0.0;
    double max_hq_over_p = 0.0;
    double delta_lhs = 0.0;     // (1 - Delta) sum h_l q / p_l
    double delta_rhs = 0.0;     // h_tau q + tau - sum h_tau / h_l
    double kappa = 0.0;         // midpoint of (0, excess / (2 tau))
    int l0 = 0;                 // 1-based; 0 when none exists
    bool p_at_least_one = false;
    bool sum_ok = false;
    bool ratio_ok = false;
    bool delta_ok = false;
    bool l0_ok = false;
    bool ok() const { return p_at_least_one && sum_ok && ratio_ok && delta_ok && l0_ok; }
};

struct PWeightsReport {
    std::vector<double> h;
    int d = 0;
    int n = 0;
    int tau = 0;
    double delta = 0.0;
    PWeights full;       // p_l = sum_{l'<=N} h_l / h_l', conditions over all N indices
    PWeights truncated;  // p_l = sum_{l'<=tau} h_l / h_l', conditions over l <= tau
    bool passed = false; // full.ok()
};

PWeightsReport verify_p_weights(const std::vector<double>& h, int d, int n);

struct SumZInstance {
    std::vector<Point> points;  // l-coordinates nondecreasing, all above epsilon
    std::vector<double> gaps;   // u_l^1 - eps, u_l^2 - u_l^1, ...
    double lhs = 0.0;
    double lhs_stderr = 0.0;
    double rhs_form = 0.0;      // prod_j gap_j^{-h_l(u^j)(1 + sum b)}
    double ratio = 0.0;
    bool held_out = false;
    bool satisfied = true;
};

struct SumZConfig {
    int n = 1;                      // 1..3
    std::size_t axis = 0;           // l, 0-based
    double epsilon = 0.05;
    double upper = 1.0;             // points lie in [epsilon, upper]^N
    std::vector<double> b;          // empty means zeros
    double min_gap = 1e-3;          // gaps are log-uniform in [min_gap, max_gap]
    double max_gap = 0.25;
    int calibration = 10;
    int held_out = 40;
    int sphere_samples = 256;       // direction samples for n >= 2
    double calibration_margin = 1.25;
    double sigma = 3.0;
    double max_rel_stderr = 0.25;
    double pass_fraction = 0.95;
    std::uint64_t seed = 1;
    QuadratureSpec quad{};
};

struct SumZReport {
    SumZConfig config;
    double c_fit = 0.0;
    double calibration_max_ratio = 0.0;
    double held_out_fraction = 0.0;
    std::vector<SumZInstance> instances;
    bool passed = false;
};

struct MCValue {
    double value = 0.0;
    double error = 0.0;  // one standard error
};

// int prod|x_i|^{b_i} exp(-||sum_j x_j Z_l(u^j)||_alpha^alpha) dx in polar form; exact for n = 1,
// sampled over directions otherwise.
MCValue sumZ_integral(const KernelModel& model, std::size_t axis, double epsilon, const std::vector<Point>& points,
                      const std::vector<double>& b, int sphere_samples, RngStream& rng, const QuadratureSpec& quad);

SumZReport verify_bound_sumZ(const KernelModel& model, const SumZConfig& cfg);

}  // namespace lmss
