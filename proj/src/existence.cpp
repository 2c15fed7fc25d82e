#include "lmss/existence.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "lmss/error.hpp"
#include "lmss/quadrature.hpp"

namespace lmss {

namespace {

double sum_inv_h(const HurstSpec& spec, const Point& u, std::vector<double>& h) {
    spec.eval_raw(u, h);
    double s = 0.0;
    for (double x : h) {
        if (!(x > 0.0)) return std::numeric_limits<double>::infinity();
        s += 1.0 / x;
    }
    return s;
}

struct Box {
    std::vector<double> lo, hi;
};

// A \ B as at most 2N boxes; B is clipped to A first.
std::vector<Box> box_difference(const Box& a, Box b) {
    const std::size_t N = a.lo.size();
    for (std::size_t l = 0; l < N; ++l) {
        b.lo[l] = std::clamp(b.lo[l], a.lo[l], a.hi[l]);
        b.hi[l] = std::clamp(b.hi[l], a.lo[l], a.hi[l]);
    }
    std::vector<Box> out;
    Box cur = a;
    for (std::size_t l = 0; l < N; ++l) {
        if (b.lo[l] > cur.lo[l]) {
            Box part = cur;
            part.hi[l] = b.lo[l];
            out.push_back(part);
        }
        if (b.hi[l] < cur.hi[l]) {
            Box part = cur;
            part.lo[l] = b.hi[l];
            out.push_back(part);
        }
        cur.lo[l] = b.lo[l];
        cur.hi[l] = b.hi[l];
    }
    return out;
}

Box cube_around(const Point& c, double r, const Rect& rect) {
    Box b{c, c};
    for (std::size_t l = 0; l < c.size(); ++l) {
        b.lo[l] = std::max(rect.lower[l], c[l] - r);
        b.hi[l] = std::min(rect.upper[l], c[l] + r);
    }
    return b;
}

// Nested tanh-sinh over a box; returns the value and the outermost error estimate.
QuadResult integrate_box(const std::function<double(const Point&)>& f, const Box& box, double tol) {
    const std::size_t N = box.lo.size();
    Point x(N);
    std::function<QuadResult(std::size_t)> level = [&](std::size_t l) {
        auto g = [&](double t, double, double) {
            x[l] = t;
            return l + 1 == N ? f(x) : level(l + 1).value;
        };
        return integrate_panel(g, box.lo[l], box.hi[l], tol);
    };
    return level(0);
}

double shell_integral(const std::function<double(const Point&)>& f, const std::vector<Box>& boxes, double tol,
                      double& err) {
    double v = 0.0;
    for (const Box& b : boxes) {
        bool empty = false;
        for (std::size_t l = 0; l < b.lo.size(); ++l) empty = empty || !(b.hi[l] > b.lo[l]);
        if (empty) continue;
        QuadResult r = integrate_box(f, b, tol);
        v += r.value;
        err += r.error;
    }
    return v;
}

}  // namespace

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::c1: return "C1";
        case Verdict::c2: return "C2";
        case Verdict::fail: return "fail";
        case Verdict::indeterminate: return "indeterminate";
    }
    return "unknown";
}

const char* c2_status_name(C2Status s) {
    switch (s) {
        case C2Status::not_evaluated: return "not_evaluated";
        case C2Status::converged: return "converged";
        case C2Status::divergent: return "divergent";
        case C2Status::indeterminate: return "indeterminate";
    }
    return "unknown";
}

InfimumResult infimum_sum_inv_h(const HurstSpec& spec, const Rect& rect, int grid_density, int refine_steps,
                                double tie_tol) {
    const std::size_t N = spec.dim();
    require(rect.dim() == N, "rect dimension mismatch");
    require(grid_density >= 2, "grid_density must be >= 2");
    require(refine_steps >= 0, "refine_steps must be >= 0");
    for (std::size_t l = 0; l < N; ++l) require(rect.upper[l] >= rect.lower[l], "rect must have lower <= upper");
    std::vector<double> h(N);
    InfimumResult res;
    res.value = std::numeric_limits<double>::infinity();
    std::vector<double> values;
    for_each_grid_point(rect, grid_density, [&](const Point& u) {
        const double v = sum_inv_h(spec, u, h);
        values.push_back(v);
        if (v < res.value) {
            res.value = v;
            res.argmin = u;
        }
    });
    require(std::isfinite(res.value), "sum of 1/h_l is infinite on the whole rect");
    const double band = tie_tol * std::max(1.0, std::abs(res.value));
    for (double v : values) res.ties += v - res.value <= band;

    Rect local = rect;
    for (int step = 0; step < refine_steps; ++step) {
        Rect next = local;
        for (std::size_t l = 0; l < N; ++l) {
            const double w = (local.upper[l] - local.lower[l]) / double(grid_density - 1);
            next.lower[l] = std::max(rect.lower[l], res.argmin[l] - w);
            next.upper[l] = std::min(rect.upper[l], res.argmin[l] + w);
        }
        local = next;
        for_each_grid_point(local, grid_density, [&](const Point& u) {
            const double v = sum_inv_h(spec, u, h);
            if (v < res.value) {
                res.value = v;
                res.argmin = u;
            }
        });
    }
    return res;
}

ExistenceReport condition_c_check(const HurstSpec& spec, const Rect& rect, int d, const ExistenceOptions& opt) {
    require(d >= 1, "d must be a positive integer");
    require(opt.equality_tol >= 0.0, "equality_tol must be nonnegative");
    const std::size_t N = spec.dim();
    InfimumResult inf = infimum_sum_inv_h(spec, rect, opt.grid_density, opt.refine_steps, opt.equality_tol);
    ExistenceReport rep;
    rep.inf_sum_inv_h = inf.value;
    rep.argmin = inf.argmin;
    rep.ties = inf.ties;
    rep.d = d;
    const double band = opt.equality_tol * std::max(1.0, std::abs(inf.value));
    const double gap = inf.value - double(d);
    if (gap > band) {
        rep.verdict = Verdict::c1;
        rep.exists = true;
        rep.reason = "d < inf sum 1/h_l";
        return rep;
    }
    if (gap < -band) {
        rep.verdict = Verdict::fail;
        rep.reason = "d > inf sum 1/h_l";
        return rep;
    }

    // Tie: decide finiteness of int (sum 1/h_l - d)^{-1}.
    double slice = 1.0;
    for (std::size_t l = 0; l + 1 < N; ++l) slice *= opt.grid_density;
    if (double(inf.ties) > slice) {
        rep.verdict = Verdict::fail;
        rep.c2_status = C2Status::divergent;
        rep.reason = "sum 1/h_l equals d on a set of positive measure; the C2 integrand is +inf there";
        return rep;
    }

    std::vector<double> h(N);
    std::function<double(const Point&)> integrand = [&](const Point& u) {
        const double g = sum_inv_h(spec, u, h) - double(d);
        return g > 0.0 ? 1.0 / g : std::numeric_limits<double>::infinity();
    };
    double max_edge = 0.0;
    for (std::size_t l = 0; l < N; ++l) max_edge = std::max(max_edge, rect.upper[l] - rect.lower[l]);
    const Box whole{rect.lower, rect.upper};
    double r = 0.25 * max_edge;
    double err = 0.0;
    try {
        double total = shell_integral(integrand, box_difference(whole, cube_around(inf.argmin, r, rect)), opt.rel_tol,
                                      err);
        rep.partial_integrals.push_back(total);
        double prev_shell = -1.0;
        for (int k = 1; k <= opt.max_shells; ++k) {
            const Box outer = cube_around(inf.argmin, r, rect);
            r *= 0.5;
            const double shell = shell_integral(integrand, box_difference(outer, cube_around(inf.argmin, r, rect)),
                                                opt.rel_tol, err);
            total += shell;
            rep.partial_integrals.push_back(total);
            if (prev_shell > 0.0) rep.shell_ratios.push_back(shell / prev_shell);
            prev_shell = shell;
            if (total > opt.divergence_cap) {
                rep.c2_status = C2Status::divergent;
                break;
            }
            if (shell == 0.0) {
                rep.c2_status = C2Status::converged;
                rep.c2_integral = total;
                break;
            }
            const std::size_t n = rep.shell_ratios.size();
            if (n >= 3) {
                const auto last = rep.shell_ratios.end();
                if (std::all_of(last - 3, last, [&](double q) { return q <= opt.converge_ratio; })) {
                    const double q = rep.shell_ratios.back();
                    const double tail = shell * q / (1.0 - q);
                    if (tail <= opt.tail_rel_tol * std::abs(total) || k == opt.max_shells) {
                        rep.c2_status = C2Status::converged;
                        rep.c2_integral = total + tail;
                        break;
                    }
                }
                if (std::all_of(last - 3, last, [&](double q) { return q >= opt.diverge_ratio; })) {
                    rep.c2_status = C2Status::divergent;
                    break;
                }
            }
        }
        if (rep.c2_status == C2Status::not_evaluated) rep.c2_status = C2Status::indeterminate;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::numeric) throw;
        // Only a non-finite integrand makes the panels fail here: sum 1/h_l - d <= 0 off the minimiser.
        rep.c2_status = C2Status::divergent;
        rep.reason = e.what();
    }
    rep.quad_error = err;
    switch (rep.c2_status) {
        case C2Status::converged:
            rep.verdict = Verdict::c2;
            rep.exists = true;
            if (rep.reason.empty()) rep.reason = "d = inf sum 1/h_l and the C2 integral converges";
            break;
        case C2Status::divergent:
            rep.verdict = Verdict::fail;
            if (rep.reason.empty()) rep.reason = "d = inf sum 1/h_l and the C2 integral diverges";
            break;
        default:
            rep.verdict = Verdict::indeterminate;
            rep.reason = "C2 integral neither converged nor diverged within the refinement budget";
    }
    return rep;
}

double example_default_upper(int m, double q, double k) {
    require(m >= 2, "the example needs an integer m >= 2");
    require(q >= 0.0 && std::isfinite(q), "the example needs q >= 0");
    require(k > 0.0 && std::isfinite(k), "the example needs k > 0");
    const double top = 1.0 / m;
    require(top > q, "the example needs q < 1/m");
    if (top - std::pow(top - q, k) > 0.0) return top;
    return q + 0.8 * std::pow(top, 1.0 / k);
}

HurstSpec example_hurst(int m, double q, double k, std::optional<double> upper) {
    const double up = upper ? *upper : example_default_upper(m, q, k);
    require(m >= 2, "the example needs an integer m >= 2");
    return HurstSpec::power_law(double(m), q, k, up);
}

}  // namespace lmss
