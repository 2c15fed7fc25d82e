#include "lmss/lemmas.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lmss/error.hpp"
#include "lmss/local_time.hpp"
#include "lmss/quadrature.hpp"

namespace lmss {

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::supercritical: return "supercritical";
        case Regime::critical: return "critical";
        case Regime::subcritical: return "subcritical";
    }
    return "unknown";
}

namespace {

// int_0^len (A + s^alpha)^{-beta} ds, split where s^alpha reaches A.
QuadResult one_sided(double alpha, double beta, double len, double A, double rel_tol) {
    QuadResult out;
    if (!(len > 0.0)) return out;
    auto f = [&](double s) { return std::pow(A + std::pow(s, alpha), -beta); };
    const double knee = std::pow(A, 1.0 / alpha);
    std::vector<double> cuts{0.0};
    if (knee < len) cuts.push_back(knee);
    cuts.push_back(len);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double lo = cuts[k];
        QuadResult r = integrate_panel([&](double x, double dl, double) { return f(lo == 0.0 ? dl : x); }, cuts[k],
                                       cuts[k + 1], rel_tol);
        out.value += r.value;
        out.error += r.error;
        out.l1 += r.l1;
    }
    return out;
}

}  // namespace

double int_equiv_integral(double alpha, double beta, double a, double b, double t0, double A, double rel_tol,
                          double* abs_error) {
    require(alpha > 0.0 && std::isfinite(alpha), "alpha must be positive");
    require(beta >= 0.0 && std::isfinite(beta), "beta must be nonnegative");
    require(a >= 0.0 && b > a, "need 0 <= a < b");
    require(t0 >= a && t0 <= b, "t0 must lie in [a, b]");
    require(A > 0.0 && std::isfinite(A), "A must be positive");
    QuadResult right = one_sided(alpha, beta, b - t0, A, rel_tol);
    QuadResult left = one_sided(alpha, beta, t0 - a, A, rel_tol);
    if (abs_error) *abs_error = right.error + left.error;
    return right.value + left.value;
}

AsymptoticCheck verify_int_equiv(double alpha, double beta, double a, double b, double t0,
                                 const std::vector<double>& A_values, const QuadratureSpec& quad) {
    validate(quad);
    require(A_values.size() >= 2, "need at least two values of A");
    for (std::size_t k = 0; k < A_values.size(); ++k) {
        require(A_values[k] > 0.0, "A values must be positive");
        if (k > 0) require(A_values[k] < A_values[k - 1], "A values must be strictly decreasing");
    }
    require(std::log10(A_values.front() / A_values.back()) >= 3.0 - 1e-9, "A values must span at least 3 decades");

    AsymptoticCheck c;
    c.alpha = alpha;
    c.beta = beta;
    c.a = a;
    c.b = b;
    c.t0 = t0;
    c.A_values = A_values;
    const double ab = alpha * beta;
    if (std::abs(ab - 1.0) <= 1e-12)
        c.regime = Regime::critical;
    else
        c.regime = ab > 1.0 ? Regime::supercritical : Regime::subcritical;

    for (double A : A_values) {
        double err = 0.0;
        c.integral_values.push_back(int_equiv_integral(alpha, beta, a, b, t0, A, quad.target_rel_err, &err));
        c.quad_errors.push_back(err);
    }
    for (std::size_t k = 0; k < A_values.size(); ++k) {
        const double A = A_values[k];
        double ref = 1.0;
        switch (c.regime) {
            case Regime::supercritical: ref = std::pow(A, -(beta - 1.0 / alpha)); break;
            case Regime::critical: {
                const double s = std::pow(A, -1.0 / alpha);
                ref = std::log1p((b - t0) * s) + std::log1p((t0 - a) * s);
                break;
            }
            case Regime::subcritical: ref = c.integral_values.front(); break;
        }
        c.ratios.push_back(c.integral_values[k] / ref);
    }
    c.ratio_min = *std::min_element(c.ratios.begin(), c.ratios.end());
    c.ratio_max = *std::max_element(c.ratios.begin(), c.ratios.end());
    const bool finite = std::isfinite(c.ratio_min) && std::isfinite(c.ratio_max) && c.ratio_min > 0.0;

    switch (c.regime) {
        case Regime::supercritical: {
            c.theory_slope = -(beta - 1.0 / alpha);
            c.fitted_slope = fit_loglog(c.A_values, c.integral_values, {}).slope;
            c.passed = finite && std::abs(c.fitted_slope - c.theory_slope) <= c.slope_tolerance * std::abs(c.theory_slope);
            break;
        }
        case Regime::critical: c.passed = finite && c.ratio_min >= 0.5 && c.ratio_max <= 2.0; break;
        case Regime::subcritical: c.passed = finite && c.ratio_max / c.ratio_min < 2.0; break;
    }
    return c;
}

TriangleCheck verify_triangle(double alpha, const std::vector<double>& x) {
    require(alpha > 0.0 && std::isfinite(alpha), "alpha must be positive");
    TriangleCheck t;
    double sum = 0.0, pow_sum = 0.0;
    for (double v : x) {
        sum += v;
        pow_sum += std::pow(std::abs(v), alpha);
    }
    const double n = double(x.size());
    const double factor = n > 0.0 ? std::max(std::pow(n, alpha - 1.0), 1.0) : 1.0;
    t.lhs = std::pow(std::abs(sum), alpha);
    t.rhs = factor * pow_sum;
    t.satisfied = t.lhs <= t.rhs * (1.0 + 1e-12) + 1e-300;
    return t;
}

namespace {

PWeights check_weights(std::string name, const std::vector<double>& h, int d, int terms, double delta) {
    PWeights w;
    w.construction = std::move(name);
    w.terms = terms;
    double inv = 0.0;
    for (int l = 0; l < terms; ++l) inv += 1.0 / h[l];
    w.p.resize(terms);
    for (int l = 0; l < terms; ++l) w.p[l] = h[l] * inv;

    const double q = double(d);
    w.p_at_least_one = true;
    for (int l = 0; l < terms; ++l) {
        w.p_at_least_one = w.p_at_least_one && w.p[l] >= 1.0 - 1e-15;
        w.sum_inv_p += 1.0 / w.p[l];
        w.max_hq_over_p = std::max(w.max_hq_over_p, h[l] * q / w.p[l]);
        w.delta_lhs += h[l] * q / w.p[l];
    }
    w.delta_lhs *= 1.0 - delta;
    // The last index entering the conditions plays the role of tau.
    const double h_last = h[terms - 1];
    w.delta_rhs = h_last * q + terms;
    for (int l = 0; l < terms; ++l) w.delta_rhs -= h_last / h[l];
    w.sum_ok = std::abs(w.sum_inv_p - 1.0) <= 1e-12;
    w.ratio_ok = w.max_hq_over_p < 1.0;
    w.delta_ok = w.delta_lhs <= w.delta_rhs + 1e-12;

    double prefix = 0.0;
    for (int l = 0; l < terms; ++l) prefix += 1.0 / h[l];
    const double excess = prefix - q;
    w.kappa = excess > 0.0 ? 0.5 * excess / (2.0 * terms) : 0.0;
    if (excess > 0.0) {
        for (int l = 0; l < terms && w.l0 == 0; ++l)
            if (h[l] * (q / w.p[l] + 2.0 * w.kappa) < 1.0) w.l0 = l + 1;
    }
    w.l0_ok = w.l0 > 0;
    return w;
}

}  // namespace

PWeightsReport verify_p_weights(const std::vector<double>& h, int d, int n) {
    require(!h.empty(), "h must be nonempty");
    require(n >= 1, "n must be >= 1");
    PWeightsReport r;
    r.h = h;
    r.d = d;
    r.n = n;
    r.delta = 1.0 / n;
    r.tau = gamma_index(h, d);  // validates h in (0,1) and d < sum 1/h_l
    const int N = int(h.size());
    r.full = check_weights("full", h, d, N, r.delta);
    r.truncated = check_weights("truncated", h, d, r.tau, r.delta);
    r.passed = r.full.ok();
    return r;
}

namespace {

// Direction functional F(theta) = ||sum_j theta_j Z_l(u^j)||_alpha^alpha.
class DirectionNorm {
  public:
    DirectionNorm(const KernelModel& model, std::size_t axis, double epsilon, const std::vector<Point>& points,
                  const QuadratureSpec& quad)
        : model_(model), points_(points), quad_(quad) {
        const std::size_t N = model.dim();
        box_.lower.assign(N, 0.0);
        box_.upper.assign(N, epsilon);
        box_.lower[axis] = epsilon;
        box_.upper[axis] = std::numeric_limits<double>::infinity();
        if (model.alpha() == 2.0) {
            const std::size_t n = points.size();
            gram_.assign(n * n, 0.0);
            for (std::size_t j = 0; j < n; ++j) gram_[j * n + j] = raw({unit(j, 1.0)});
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t k = j + 1; k < n; ++k) {
                    std::vector<double> plus(n, 0.0), minus(n, 0.0);
                    plus[j] = plus[k] = 1.0;
                    minus[j] = 1.0;
                    minus[k] = -1.0;
                    gram_[j * n + k] = gram_[k * n + j] = 0.25 * (raw(plus) - raw(minus));
                }
        }
    }

    double operator()(const std::vector<double>& theta) const {
        if (gram_.empty()) return raw(theta);
        const std::size_t n = theta.size();
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k < n; ++k) s += theta[j] * gram_[j * n + k] * theta[k];
        return s;
    }

    const std::vector<double>& gram() const { return gram_; }

  private:
    std::vector<double> unit(std::size_t j, double v) const {
        std::vector<double> e(points_.size(), 0.0);
        e[j] = v;
        return e;
    }
    double raw(const std::vector<double>& coeffs) const {
        return lalpha_norm(LinearCombination{coeffs, points_}, model_, quad_, &box_).alpha_power;
    }

    const KernelModel& model_;
    const std::vector<Point>& points_;
    QuadratureSpec quad_;
    IntegrationBox box_;
    std::vector<double> gram_;
};

double det_small(const std::vector<double>& m, std::size_t n) {
    if (n == 1) return m[0];
    if (n == 2) return m[0] * m[3] - m[1] * m[2];
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) + m[2] * (m[3] * m[7] - m[4] * m[6]);
}

}  // namespace

MCValue sumZ_integral(const KernelModel& model, std::size_t axis, double epsilon, const std::vector<Point>& points,
                      const std::vector<double>& b_in, int sphere_samples, RngStream& rng, const QuadratureSpec& quad) {
    const std::size_t n = points.size();
    require(n >= 1 && n <= 3, "the direction integral supports 1 <= n <= 3");
    require(axis < model.dim(), "axis out of range");
    require(epsilon > 0.0, "epsilon must be positive");
    std::vector<double> b = b_in.empty() ? std::vector<double>(n, 0.0) : b_in;
    require(b.size() == n, "one exponent b_i per point");
    double bsum = 0.0;
    for (double v : b) {
        require(v >= 0.0 && std::isfinite(v), "exponents b_i must be nonnegative");
        bsum += v;
    }
    for (const Point& u : points) {
        require(u.size() == model.dim(), "point dimension mismatch");
        require(u[axis] > epsilon, "points must lie above epsilon along the axis");
    }
    const double alpha = model.alpha();
    const double power = (double(n) + bsum) / alpha;
    const double radial = std::tgamma(power) / alpha;
    DirectionNorm F(model, axis, epsilon, points, quad);

    auto integrand = [&](const std::vector<double>& theta) {
        double w = 1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (b[i] != 0.0) w *= std::pow(std::abs(theta[i]), b[i]);
        const double f = F(theta);
        if (!(f > 0.0)) fail(ErrorKind::numeric, "degenerate direction: the Z_l kernels are linearly dependent");
        return w * std::pow(f, -power);
    };

    MCValue out;
    if (n == 1) {
        out.value = 2.0 * radial * integrand({1.0});
        return out;
    }
    if (alpha == 2.0 && bsum == 0.0) {
        const double det = det_small(F.gram(), n);
        if (!(det > 0.0)) fail(ErrorKind::numeric, "singular Gram matrix of the Z_l kernels");
        out.value = std::pow(std::numbers::pi, 0.5 * n) / std::sqrt(det);
        return out;
    }
    require(sphere_samples >= 2, "need at least two direction samples");
    // Sample directions in increment coordinates y_j = sum_{k>=j} x_k, scaled by the norms of
    // Z_l(u^j) - Z_l(u^{j-1}); the change of variables is unimodular up to the scaling.
    std::vector<double> scale(n);
    double jacobian = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> inc(n, 0.0);
        inc[j] = 1.0;
        if (j > 0) inc[j - 1] = -1.0;
        const double f = F(inc);
        if (!(f > 0.0)) fail(ErrorKind::numeric, "coincident points along the axis");
        scale[j] = std::pow(f, 1.0 / alpha);
        jacobian /= scale[j];
    }
    std::vector<double> theta(n), x(n), values;
    values.reserve(std::size_t(sphere_samples));
    for (int k = 0; k < sphere_samples; ++k) {
        if (n == 2) {
            // Stratified half circle; theta and -theta contribute equally.
            const double phi = std::numbers::pi * (k + rng.uniform()) / sphere_samples;
            theta = {std::cos(phi), std::sin(phi)};
        } else {
            double r2 = 0.0;
            for (double& t : theta) {
                t = rng.normal();
                r2 += t * t;
            }
            for (double& t : theta) t /= std::sqrt(r2);
        }
        for (std::size_t j = 0; j < n; ++j)
            x[j] = theta[j] / scale[j] - (j + 1 < n ? theta[j + 1] / scale[j + 1] : 0.0);
        values.push_back(integrand(x));
    }
    const double M = double(sphere_samples);
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= M;
    double var_mean = 0.0;
    if (n == 2) {
        // Collapsed strata: adjacent pairs give an upward-biased variance estimate.
        for (std::size_t k = 0; k + 1 < values.size(); k += 2) var_mean += (values[k] - values[k + 1]) * (values[k] - values[k + 1]);
        var_mean /= M * M;
    } else {
        for (double v : values) var_mean += (v - mean) * (v - mean);
        var_mean /= M * (M - 1.0);
    }
    const double area = n == 2 ? 2.0 * std::numbers::pi : 4.0 * std::numbers::pi;
    out.value = jacobian * radial * area * mean;
    out.error = jacobian * radial * area * std::sqrt(var_mean);
    return out;
}

SumZReport verify_bound_sumZ(const KernelModel& model, const SumZConfig& cfg) {
    require(cfg.n >= 1 && cfg.n <= 3, "n must be 1, 2 or 3");
    require(cfg.axis < model.dim(), "axis out of range");
    require(cfg.epsilon > 0.0 && cfg.upper > cfg.epsilon, "need 0 < epsilon < upper");
    require(cfg.min_gap > 0.0 && cfg.max_gap >= cfg.min_gap, "need 0 < min_gap <= max_gap");
    require(cfg.epsilon + cfg.n * cfg.max_gap <= cfg.upper, "gaps do not fit below the upper end");
    require(cfg.calibration >= 1 && cfg.held_out >= 1, "need calibration and held-out instances");
    require(cfg.calibration_margin >= 1.0, "calibration margin must be >= 1");
    validate(cfg.quad);
    std::vector<double> b = cfg.b.empty() ? std::vector<double>(cfg.n, 0.0) : cfg.b;
    require(b.size() == std::size_t(cfg.n), "one exponent b_i per point");
    double bsum = 0.0;
    for (double v : b) bsum += v;

    SumZReport rep;
    rep.config = cfg;
    const std::size_t N = model.dim();
    const std::size_t l = cfg.axis;
    RngStream geo(cfg.seed, 0);
    RngStream mc(cfg.seed, 1);
    const int total = cfg.calibration + cfg.held_out;
    for (int t = 0; t < total; ++t) {
        SumZInstance inst;
        inst.held_out = t >= cfg.calibration;
        double ul = cfg.epsilon;
        const double lg0 = std::log(cfg.min_gap), lg1 = std::log(cfg.max_gap);
        for (int j = 0; j < cfg.n; ++j) {
            const double gap = std::exp(lg0 + (lg1 - lg0) * geo.uniform());
            ul += gap;
            Point u(N);
            for (std::size_t k = 0; k < N; ++k)
                u[k] = k == l ? ul : cfg.epsilon + (cfg.upper - cfg.epsilon) * geo.uniform();
            inst.gaps.push_back(gap);
            inst.points.push_back(std::move(u));
        }
        MCValue lhs = sumZ_integral(model, l, cfg.epsilon, inst.points, b, cfg.sphere_samples, mc, cfg.quad);
        if (lhs.error > cfg.max_rel_stderr * lhs.value)
            fail(ErrorKind::numeric, "Monte Carlo variance too high for the Z_l integral");
        inst.lhs = lhs.value;
        inst.lhs_stderr = lhs.error;
        double log_rhs = 0.0;
        for (int j = 0; j < cfg.n; ++j) {
            const double hl = model.spec().eval(inst.points[j])[l];
            log_rhs -= hl * (1.0 + bsum) * std::log(inst.gaps[j]);
        }
        inst.rhs_form = std::exp(log_rhs);
        inst.ratio = inst.lhs / inst.rhs_form;
        rep.instances.push_back(std::move(inst));
    }
    for (int t = 0; t < cfg.calibration; ++t)
        rep.calibration_max_ratio = std::max(rep.calibration_max_ratio, rep.instances[t].ratio);
    rep.c_fit = cfg.calibration_margin * rep.calibration_max_ratio;
    int ok = 0;
    for (int t = cfg.calibration; t < total; ++t) {
        SumZInstance& inst = rep.instances[t];
        inst.satisfied = inst.lhs - cfg.sigma * inst.lhs_stderr <= rep.c_fit * inst.rhs_form;
        ok += inst.satisfied;
    }
    rep.held_out_fraction = double(ok) / cfg.held_out;
    rep.passed = rep.held_out_fraction >= cfg.pass_fraction;
    return rep;
}

}  // namespace lmss
