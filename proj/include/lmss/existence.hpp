#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lmss/hurst.hpp"

namespace lmss {

struct InfimumResult {
    double value = 0.0;
    Point argmin;
    std::size_t ties = 0;  // final-scan points within the tie band of the minimum
};

// Grid scan of sum_l 1/h_l over rect, then refine_steps rescans of the neighbourhood of the best point.
InfimumResult infimum_sum_inv_h(const HurstSpec& spec, const Rect& rect, int grid_density = 65,
                                int refine_steps = 8, double tie_tol = 1e-9);

enum class Verdict { c1, c2, fail, indeterminate };
enum class C2Status { not_evaluated, converged, divergent, indeterminate };

const char* verdict_name(Verdict v);
const char* c2_status_name(C2Status s);

struct ExistenceOptions {
    double equality_tol = 1e-9;   // relative tie band for d = inf
    int grid_density = 65;
    int refine_steps = 8;
    double rel_tol = 1e-8;        // per-shell quadrature tolerance
    int max_shells = 80;
    double tail_rel_tol = 1e-9;   // geometric tail estimate relative to the running integral
    double divergence_cap = 1e10;
    double converge_ratio = 0.9;  // shell ratios at or below: geometric tail
    double diverge_ratio = 0.98;  // shell ratios at or above: divergent
};

struct ExistenceReport {
    double inf_sum_inv_h = 0.0;
    Point argmin;
    std::size_t ties = 0;
    int d = 0;
    Verdict verdict = Verdict::fail;
    bool exists = false;
    C2Status c2_status = C2Status::not_evaluated;
    std::optional<double> c2_integral;  // empty unless evaluated and finite
    double quad_error = 0.0;
    std::vector<double> partial_integrals;  // integral outside the excised cube, per refinement
    std::vector<double> shell_ratios;
    std::string reason;
};

ExistenceReport condition_c_check(const HurstSpec& spec, const Rect& rect, int d, const ExistenceOptions& opt = {});

// h(v) = 1/m - (v - q)^k on [q, upper]. Without an upper end: 1/m when h(1/m) > 0, otherwise
// q + 0.8 (1/m)^{1/k}, which keeps h positive.
HurstSpec example_hurst(int m, double q, double k, std::optional<double> upper = std::nullopt);
double example_default_upper(int m, double q, double k);

}  // namespace lmss
