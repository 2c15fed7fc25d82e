#include "lmss/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "lmss/error.hpp"
#include "lmss/quadrature.hpp"

namespace lmss {

namespace {

// Distances to a singular abscissa are clamped from below so that products of negative powers over
// all axes stay finite in double precision.
constexpr double kMinDist = 1e-200;

double min_distance(std::size_t axes, double most_negative_exponent) {
    const double e = std::max(1.0, -most_negative_exponent);
    return std::max(kMinDist, std::exp(-650.0 / (double(axes) * e)));
}

struct Panel {
    double a = 0.0;
    double b = 0.0;
    bool tail = false;   // (-inf, b] mapped through v = b t^{-1/kappa}, t in (0, 1]
    double kappa = 1.0;  // tail decay rate: the integrand behaves like |v|^{-1-kappa}
};

struct AxisPlan {
    std::vector<Panel> panels;
    std::vector<double> u;  // coordinate of every point on this axis
    std::vector<double> e;  // exponent h_l(u^j) - 1/alpha of every point
};

inline double factor_finite(double u, double e, double x, double dr, double b, double min_dist) {
    // Near the right end x may round to b itself, so membership is decided by the panel, not by x.
    double t1 = 0.0;
    if (u == b)
        t1 = pos_pow(std::max(dr, min_dist), e);
    else if (x < u)
        t1 = pos_pow(u - x, e);
    double t2 = 0.0;
    if (b == 0.0)
        t2 = pos_pow(std::max(dr, min_dist), e);
    else if (x < 0.0)
        t2 = pos_pow(-x, e);
    return t1 - t2;
}

// (u + w)^e - w^e with w = -v, written to avoid cancellation for large w.
inline double factor_tail(double u, double e, double w) {
    if (u <= 0.0 || e == 0.0) return 0.0;
    return std::pow(w, e) * std::expm1(e * std::log1p(u / w));
}

class NormIntegrator {
  public:
    NormIntegrator(const std::vector<AxisPlan>& axes, const std::vector<double>& coeffs, double c, double alpha,
                   double tol, double min_dist)
        : axes_(axes), coeffs_(coeffs), c_(c), alpha_(alpha), tol_(tol), min_dist_(min_dist),
          buffers_(axes.size(), std::vector<double>(coeffs.size())) {}

    double run(double& err) {
        std::vector<double> ones(coeffs_.size(), 1.0);
        double v = integrate(0, ones.data());
        err = err_;
        return v;
    }

  private:
    double integrate(std::size_t l, const double* prod) {
        const AxisPlan& ax = axes_[l];
        const std::size_t n = coeffs_.size();
        const bool last = l + 1 == axes_.size();
        double total = 0.0;
        for (const Panel& p : ax.panels) {
            auto body = [&](const auto& factor_of, double jac) {
                std::vector<double>& next = buffers_[l];
                bool any = false;
                for (std::size_t j = 0; j < n; ++j) {
                    next[j] = prod[j] == 0.0 ? 0.0 : prod[j] * factor_of(j);
                    any = any || next[j] != 0.0;
                }
                if (!any) return 0.0;
                if (last) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += coeffs_[j] * next[j];
                    return std::pow(std::abs(c_ * s), alpha_) * jac;
                }
                return integrate(l + 1, next.data()) * jac;
            };
            QuadResult r;
            if (p.tail) {
                // With this map the integrand stays bounded as t -> 0.
                const double L = -p.b;
                r = integrate_panel(
                    [&](double t, double, double) {
                        const double w = L * std::pow(t, -1.0 / p.kappa);
                        const double jac = w / (p.kappa * t);
                        if (!std::isfinite(jac)) return 0.0;
                        return body([&](std::size_t j) { return factor_tail(ax.u[j], ax.e[j], w); }, jac);
                    },
                    0.0, 1.0, tol_);
            } else {
                r = integrate_panel(
                    [&](double x, double, double dr) {
                        return body([&](std::size_t j) { return factor_finite(ax.u[j], ax.e[j], x, dr, p.b, min_dist_); }, 1.0);
                    },
                    p.a, p.b, tol_);
            }
            total += r.value;
            if (l == 0) err_ += r.error;
        }
        return total;
    }

    const std::vector<AxisPlan>& axes_;
    const std::vector<double>& coeffs_;
    double c_, alpha_, tol_, min_dist_;
    std::vector<std::vector<double>> buffers_;
    double err_ = 0.0;
};

}  // namespace

void validate(const QuadratureSpec& q) {
    require(q.truncation_L > 0.0 && std::isfinite(q.truncation_L), "truncation_L must be positive");
    require(q.panels_per_axis >= 1, "panels_per_axis must be >= 1");
    require(q.target_rel_err > 0.0, "target_rel_err must be positive");
}

double kernel_g(std::span<const double> h, double alpha, std::span<const double> u, std::span<const double> v,
                double c_norm) {
    require(h.size() == u.size() && u.size() == v.size(), "kernel_g dimension mismatch");
    require(alpha > 0.0 && alpha <= 2.0, "alpha must lie in (0, 2]");
    for (std::size_t l = 0; l < h.size(); ++l)
        if (v[l] > u[l] && v[l] >= 0.0) return 0.0;
    double g = c_norm;
    for (std::size_t l = 0; l < h.size(); ++l) {
        const double e = h[l] - 1.0 / alpha;
        if (e < 0.0 && (v[l] == u[l] || v[l] == 0.0)) return std::numeric_limits<double>::infinity();
        g *= pos_pow(u[l] - v[l], e) - pos_pow(-v[l], e);
    }
    return g;
}

double kernel_norm_1d(double h, double alpha, double rel_tol) {
    require(h > 0.0 && h < 1.0, "h must lie in (0, 1)");
    require(alpha > 0.0 && alpha <= 2.0, "alpha must lie in (0, 2]");
    const double e = h - 1.0 / alpha;
    if (e == 0.0) return 1.0 / (h * alpha);
    // v in (0,1): int (1-v)^{e alpha} = 1/(h alpha). v = -w, w in (0,1] directly; w >= 1 through w = 1/s.
    auto near = [&](double w, double, double) {
        return std::pow(std::abs(std::pow(1.0 + w, e) - std::pow(std::max(w, min_distance(1, e)), e)), alpha);
    };
    auto far = [&](double s, double, double) {
        return std::pow(s, alpha * (1.0 - h) - 1.0) * std::pow(std::abs(std::expm1(e * std::log1p(s)) / s), alpha);
    };
    return 1.0 / (h * alpha) + integrate_panel(near, 0.0, 1.0, rel_tol).value +
           integrate_panel(far, 0.0, 1.0, rel_tol).value;
}

double normalizing_constant(std::span<const double> h, double alpha, const QuadratureSpec& quad) {
    validate(quad);
    require(!h.empty(), "normalizing_constant needs exponents");
    double c = 1.0;
    for (double hl : h) c *= std::pow(kernel_norm_1d(hl, alpha, std::min(quad.target_rel_err, 1e-13)), -1.0 / alpha);
    return c;
}

KernelModel::KernelModel(HurstSpec spec, double alpha, const QuadratureSpec& quad)
    : spec_(std::move(spec)), alpha_(alpha) {
    validate(StableParams{alpha, 1.0});
    c_norm_ = normalizing_constant(spec_.eval(spec_.norm_point()), alpha_, quad);
}

IntegrationBox IntegrationBox::whole(std::size_t n) {
    const double inf = std::numeric_limits<double>::infinity();
    return {std::vector<double>(n, -inf), std::vector<double>(n, inf)};
}

IntegrationBox IntegrationBox::positive(std::size_t n) {
    return {std::vector<double>(n, 0.0), std::vector<double>(n, std::numeric_limits<double>::infinity())};
}

NormResult lalpha_norm(const LinearCombination& comb, const KernelModel& model, const QuadratureSpec& quad,
                       const IntegrationBox* box) {
    validate(quad);
    const std::size_t n = comb.points.size();
    const std::size_t N = model.dim();
    require(n >= 1, "linear combination must be nonempty");
    require(comb.coeffs.size() == n, "one coefficient per point required");
    IntegrationBox whole = IntegrationBox::whole(N);
    if (!box) box = &whole;
    require(box->lower.size() == N && box->upper.size() == N, "integration box dimension mismatch");

    NormResult res;
    bool any_coeff = false;
    for (double a : comb.coeffs) any_coeff = any_coeff || a != 0.0;

    std::vector<AxisPlan> axes(N);
    for (auto& ax : axes) {
        ax.u.resize(n);
        ax.e.resize(n);
    }
    for (std::size_t j = 0; j < n; ++j) {
        require(comb.points[j].size() == N, "point dimension mismatch");
        std::vector<double> h = model.spec().eval(comb.points[j]);
        for (std::size_t l = 0; l < N; ++l) {
            axes[l].u[j] = comb.points[j][l];
            axes[l].e[j] = h[l] - 1.0 / model.alpha();
        }
    }
    if (!any_coeff) return res;

    for (std::size_t l = 0; l < N; ++l) {
        AxisPlan& ax = axes[l];
        const double umax = *std::max_element(ax.u.begin(), ax.u.end());
        const double lo_box = box->lower[l];
        const double hi = std::min(box->upper[l], umax);
        const bool tail = std::isinf(lo_box);
        const double lo = tail ? -quad.truncation_L : lo_box;
        if (!(hi > lo)) return res;  // the kernels vanish on the whole box
        std::vector<double> cuts{lo, hi};
        if (0.0 > lo && 0.0 < hi) cuts.push_back(0.0);
        if (quad.singularity_split)
            for (double u : ax.u)
                if (u > lo && u < hi) cuts.push_back(u);
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        if (tail) {
            double kappa = 2.0;
            for (double e : ax.e) kappa = std::min(kappa, model.alpha() * (1.0 - (e + 1.0 / model.alpha())));
            ax.panels.push_back({-std::numeric_limits<double>::infinity(), lo, true, kappa});
        }
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            const int parts = quad.panels_per_axis;
            for (int p = 0; p < parts; ++p) {
                double a = p == 0 ? cuts[k] : cuts[k] + (cuts[k + 1] - cuts[k]) * p / parts;
                double b = p + 1 == parts ? cuts[k + 1] : cuts[k] + (cuts[k + 1] - cuts[k]) * (p + 1) / parts;
                ax.panels.push_back({a, b, false, 1.0});
            }
        }
    }

    double most_negative = 0.0;
    for (const auto& ax : axes)
        for (double e : ax.e) most_negative = std::min(most_negative, e);
    // The level-difference estimate of tanh-sinh overstates the error of a converged rule, so the
    // rule tolerance is looser than the requested relative accuracy.
    const double rule_tol = std::max(std::pow(quad.target_rel_err, 0.75), 1e-14);
    NormIntegrator integ(axes, comb.coeffs, model.c_norm(), model.alpha(), rule_tol, min_distance(N, most_negative));
    double err = 0.0;
    res.alpha_power = integ.run(err);
    res.abs_error = err;
    res.norm = std::pow(res.alpha_power, 1.0 / model.alpha());
    return res;
}

NormResult lalpha_norm(const LinearCombination& comb, const HurstSpec& spec, double alpha,
                       const QuadratureSpec& quad) {
    KernelModel model(spec, alpha, quad);
    return lalpha_norm(comb, model, quad);
}

IncrementPair increment_ratio(const KernelModel& model, const Point& u, const Point& v, const QuadratureSpec& quad) {
    const std::size_t N = model.dim();
    require(u.size() == N && v.size() == N, "increment pair dimension mismatch");
    IncrementPair p{u, v};
    Point mid(N);
    for (std::size_t l = 0; l < N; ++l) mid[l] = 0.5 * (u[l] + v[l]);
    std::vector<double> h = model.spec().eval(mid);
    for (std::size_t l = 0; l < N; ++l) p.denom += pos_pow(std::abs(u[l] - v[l]), h[l]);
    if (p.denom == 0.0) return p;
    p.norm = lalpha_norm(LinearCombination{{1.0, -1.0}, {u, v}}, model, quad).norm;
    p.ratio = p.norm / p.denom;
    return p;
}

IncrementScan increment_ratio_scan(const KernelModel& model, const Rect& rect, int pairs, const QuadratureSpec& quad,
                                   RngStream& rng) {
    require(pairs >= 1, "pairs must be >= 1");
    require(rect.dim() == model.dim(), "rect dimension mismatch");
    IncrementScan scan;
    const std::size_t N = model.dim();
    for (int k = 0; k < pairs; ++k) {
        Point u(N), v(N);
        for (std::size_t l = 0; l < N; ++l) {
            u[l] = rect.lower[l] + (rect.upper[l] - rect.lower[l]) * rng.uniform();
            v[l] = rect.lower[l] + (rect.upper[l] - rect.lower[l]) * rng.uniform();
        }
        IncrementPair p = increment_ratio(model, u, v, quad);
        if (p.denom == 0.0) {
            ++scan.skipped;
            continue;
        }
        scan.min_ratio = std::min(scan.min_ratio, p.ratio);
        scan.max_ratio = std::max(scan.max_ratio, p.ratio);
        scan.pairs.push_back(std::move(p));
    }
    return scan;
}

}  // namespace lmss
