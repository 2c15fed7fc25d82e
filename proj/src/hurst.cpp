#include "lmss/hurst.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lmss/error.hpp"

namespace lmss {

namespace {

constexpr double kBoundTol = 1e-12;

void check_dims(std::size_t a, std::size_t b, const char* what) {
    if (a != b) fail(ErrorKind::invalid_argument, std::string("dimension mismatch: ") + what);
}

}  // namespace

Rect::Rect(std::vector<double> lo, std::vector<double> hi) : lower(std::move(lo)), upper(std::move(hi)) {
    check_dims(lower.size(), upper.size(), "rect bounds");
    require(!lower.empty(), "rect must have at least one axis");
    for (std::size_t l = 0; l < lower.size(); ++l) {
        require(std::isfinite(lower[l]) && std::isfinite(upper[l]), "rect bounds must be finite");
        require(lower[l] < upper[l], "rect must satisfy lower < upper on every axis");
    }
}

Rect Rect::cube(std::size_t n, double lo, double hi) {
    return Rect(std::vector<double>(n, lo), std::vector<double>(n, hi));
}

double Rect::volume() const {
    double v = 1.0;
    for (std::size_t l = 0; l < dim(); ++l) v *= upper[l] - lower[l];
    return v;
}

double Rect::min_edge() const {
    double e = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < dim(); ++l) e = std::min(e, upper[l] - lower[l]);
    return e;
}

bool Rect::contains(std::span<const double> u, double tol) const {
    if (u.size() != dim()) return false;
    for (std::size_t l = 0; l < dim(); ++l) {
        double slack = tol * std::max(1.0, std::abs(upper[l] - lower[l]));
        if (u[l] < lower[l] - slack || u[l] > upper[l] + slack) return false;
    }
    return true;
}

const char* kind_name(HurstKind kind) {
    switch (kind) {
        case HurstKind::constant: return "constant";
        case HurstKind::power_law: return "power_law";
        case HurstKind::affine: return "affine";
        case HurstKind::table: return "table";
    }
    return "unknown";
}

HurstSpec HurstSpec::constant(std::vector<double> h) {
    require(!h.empty(), "constant spec needs at least one exponent");
    HurstSpec s;
    s.kind_ = HurstKind::constant;
    s.dim_ = h.size();
    s.params_ = std::move(h);
    s.default_bounds();
    s.validate();
    return s;
}

HurstSpec HurstSpec::power_law(double m, double q, double k, double upper) {
    require(m > 1.0, "power_law needs m > 1");
    require(q >= 0.0, "power_law needs q >= 0");
    require(k > 0.0, "power_law needs k > 0");
    require(upper > q, "power_law needs upper > q");
    HurstSpec s;
    s.kind_ = HurstKind::power_law;
    s.dim_ = 1;
    s.params_ = {m, q, k, upper};
    s.domain_ = Rect({q}, {upper});
    double h_end = 1.0 / m - std::pow(upper - q, k);
    if (!(h_end > 0.0))
        fail(ErrorKind::domain, "power_law: h vanishes inside the domain; shrink the upper end");
    s.default_bounds();
    s.validate();
    return s;
}

HurstSpec HurstSpec::affine(std::vector<double> h0, std::vector<double> slope, Rect domain) {
    const std::size_t n = h0.size();
    require(n > 0, "affine spec needs h0");
    check_dims(slope.size(), n * n, "affine slope must be N x N");
    check_dims(domain.dim(), n, "affine domain");
    HurstSpec s;
    s.kind_ = HurstKind::affine;
    s.dim_ = n;
    s.params_ = std::move(h0);
    s.params_.insert(s.params_.end(), slope.begin(), slope.end());
    s.domain_ = std::move(domain);
    s.default_bounds();
    s.validate();
    return s;
}

HurstSpec HurstSpec::table(std::vector<std::vector<double>> axes, std::vector<double> values) {
    const std::size_t n = axes.size();
    require(n > 0, "table spec needs axes");
    std::size_t nodes = 1;
    std::vector<double> lo(n), hi(n);
    for (std::size_t l = 0; l < n; ++l) {
        require(axes[l].size() >= 2, "table axis needs at least two nodes");
        for (std::size_t i = 1; i < axes[l].size(); ++i)
            require(axes[l][i] > axes[l][i - 1], "table axis must be strictly increasing");
        nodes *= axes[l].size();
        lo[l] = axes[l].front();
        hi[l] = axes[l].back();
    }
    check_dims(values.size(), nodes * n, "table values must hold N numbers per node");
    HurstSpec s;
    s.kind_ = HurstKind::table;
    s.dim_ = n;
    s.axes_ = std::move(axes);
    s.params_ = std::move(values);
    s.domain_ = Rect(lo, hi);
    s.default_bounds();
    s.validate();
    return s;
}

HurstSpec& HurstSpec::set_bounds(std::vector<double> m, std::vector<double> M) {
    check_dims(m.size(), dim_, "lower bounds");
    check_dims(M.size(), dim_, "upper bounds");
    m_ = std::move(m);
    M_ = std::move(M);
    validate();
    return *this;
}

HurstSpec& HurstSpec::set_lipschitz(double c) {
    require(c >= 0.0 && std::isfinite(c), "lipschitz constant must be finite and >= 0");
    lipschitz_ = c;
    return *this;
}

HurstSpec& HurstSpec::set_norm_point(std::vector<double> p) {
    check_dims(p.size(), dim_, "norm point");
    if (domain_ && !domain_->contains(p, kBoundTol)) fail(ErrorKind::domain, "norm point outside the spec domain");
    for (double x : p) require(x >= 0.0, "norm point must lie in R_+^N");
    norm_point_ = std::move(p);
    return *this;
}

void HurstSpec::default_bounds() {
    m_.assign(dim_, std::numeric_limits<double>::infinity());
    M_.assign(dim_, -std::numeric_limits<double>::infinity());
    auto absorb = [&](std::span<const double> h) {
        for (std::size_t l = 0; l < dim_; ++l) {
            m_[l] = std::min(m_[l], h[l]);
            M_[l] = std::max(M_[l], h[l]);
        }
    };
    std::vector<double> h(dim_);
    switch (kind_) {
        case HurstKind::constant: absorb(params_); break;
        case HurstKind::power_law: {
            double a = domain_->lower[0], b = domain_->upper[0];
            eval_raw(std::span<const double>(&a, 1), h);
            absorb(h);
            eval_raw(std::span<const double>(&b, 1), h);
            absorb(h);
            break;
        }
        case HurstKind::affine:
            // Linear in u: extremes sit at the corners.
            for_each_grid_point(*domain_, 2, [&](const Point& u) {
                eval_raw(u, h);
                absorb(h);
            });
            break;
        case HurstKind::table:
            // Multilinear interpolation attains its extremes at the nodes.
            for (std::size_t i = 0; i < params_.size(); i += dim_) absorb(std::span<const double>(&params_[i], dim_));
            break;
    }
}

void HurstSpec::validate() const {
    for (std::size_t l = 0; l < dim_; ++l) {
        if (!(m_[l] > 0.0 && M_[l] < 1.0 && m_[l] <= M_[l]))
            fail(ErrorKind::domain, "Hurst bounds must satisfy 0 < m_l <= M_l < 1 on every axis");
    }
    if (kind_ == HurstKind::constant) {
        for (std::size_t l = 0; l < dim_; ++l)
            if (params_[l] < m_[l] - kBoundTol || params_[l] > M_[l] + kBoundTol)
                fail(ErrorKind::domain, "constant exponent outside declared bounds");
    }
}

bool HurstSpec::axis_separable() const {
    switch (kind_) {
        case HurstKind::constant:
        case HurstKind::power_law: return true;
        case HurstKind::affine:
            for (std::size_t r = 0; r < dim_; ++r)
                for (std::size_t c = 0; c < dim_; ++c)
                    if (r != c && params_[dim_ + r * dim_ + c] != 0.0) return false;
            return true;
        case HurstKind::table: return dim_ == 1;
    }
    return false;
}

Point HurstSpec::norm_point() const {
    if (norm_point_) return *norm_point_;
    Point p(dim_, 1.0);
    if (domain_)
        for (std::size_t l = 0; l < dim_; ++l) p[l] = std::clamp(p[l], domain_->lower[l], domain_->upper[l]);
    return p;
}

void HurstSpec::eval_raw(std::span<const double> u, std::span<double> out) const {
    switch (kind_) {
        case HurstKind::constant:
            std::copy(params_.begin(), params_.end(), out.begin());
            return;
        case HurstKind::power_law: {
            double dv = std::max(0.0, u[0] - params_[1]);
            out[0] = 1.0 / params_[0] - std::pow(dv, params_[2]);
            return;
        }
        case HurstKind::affine:
            for (std::size_t r = 0; r < dim_; ++r) {
                double acc = params_[r];
                for (std::size_t c = 0; c < dim_; ++c) acc += params_[dim_ + r * dim_ + c] * u[c];
                out[r] = acc;
            }
            return;
        case HurstKind::table: {
            std::vector<std::size_t> base(dim_);
            std::vector<double> frac(dim_);
            for (std::size_t l = 0; l < dim_; ++l) {
                const auto& ax = axes_[l];
                double x = std::clamp(u[l], ax.front(), ax.back());
                auto it = std::upper_bound(ax.begin(), ax.end(), x);
                std::size_t i = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - ax.begin() - 1, 0), ax.size() - 2);
                base[l] = i;
                frac[l] = (x - ax[i]) / (ax[i + 1] - ax[i]);
            }
            std::fill(out.begin(), out.end(), 0.0);
            const std::size_t corners = std::size_t(1) << dim_;
            for (std::size_t mask = 0; mask < corners; ++mask) {
                double w = 1.0;
                std::size_t node = 0;
                for (std::size_t l = 0; l < dim_; ++l) {
                    bool up = (mask >> l) & 1u;
                    w *= up ? frac[l] : 1.0 - frac[l];
                    node = node * axes_[l].size() + base[l] + (up ? 1 : 0);
                }
                if (w == 0.0) continue;
                for (std::size_t c = 0; c < dim_; ++c) out[c] += w * params_[node * dim_ + c];
            }
            return;
        }
    }
}

void HurstSpec::eval_into(std::span<const double> u, std::span<double> out) const {
    check_dims(u.size(), dim_, "evaluation point");
    check_dims(out.size(), dim_, "evaluation output");
    for (std::size_t l = 0; l < dim_; ++l)
        if (!(u[l] >= 0.0)) fail(ErrorKind::domain, "evaluation point must lie in R_+^N");
    if (domain_ && !domain_->contains(u, kBoundTol)) fail(ErrorKind::domain, "evaluation point outside the spec domain");
    eval_raw(u, out);
    for (std::size_t l = 0; l < dim_; ++l) {
        if (out[l] < m_[l] - kBoundTol || out[l] > M_[l] + kBoundTol || !(out[l] > 0.0 && out[l] < 1.0))
            fail(ErrorKind::domain, "Hurst bound violation: h_" + std::to_string(l + 1) + " = " +
                                        std::to_string(out[l]) + " outside [m, M]");
    }
}

std::vector<double> HurstSpec::eval(std::span<const double> u) const {
    std::vector<double> h(dim_);
    eval_into(u, h);
    return h;
}

double HurstSpec::eval_axis(std::size_t l, double ul) const {
    require(axis_separable(), "eval_axis needs an axis-separable spec");
    require(l < dim_, "axis index out of range");
    switch (kind_) {
        case HurstKind::constant: return params_[l];
        case HurstKind::affine: return params_[l] + params_[dim_ + l * dim_ + l] * ul;
        default: {
            double h = 0.0;
            eval_raw(std::span<const double>(&ul, 1), std::span<double>(&h, 1));
            return h;
        }
    }
}

double rho_metric(std::span<const double> u, std::span<const double> v, std::span<const double> m,
                  std::span<const double> M) {
    check_dims(u.size(), v.size(), "rho points");
    check_dims(u.size(), m.size(), "rho lower exponents");
    check_dims(u.size(), M.size(), "rho upper exponents");
    double r = 0.0;
    for (std::size_t l = 0; l < u.size(); ++l) {
        double d = std::abs(u[l] - v[l]);
        if (d == 0.0) continue;
        r += std::min(std::pow(d, m[l]), std::pow(d, M[l]));
    }
    return r;
}

HurstDiagnostics check_h1_h2(const HurstSpec& spec, const Rect& rect, int grid_density) {
    require(grid_density >= 2, "grid_density must be >= 2");
    check_dims(rect.dim(), spec.dim(), "rect");
    const std::size_t n = spec.dim();
    std::vector<Point> pts;
    std::vector<std::vector<double>> hs;
    HurstDiagnostics rep;
    rep.lipschitz_declared = spec.lipschitz_c().has_value();
    for_each_grid_point(rect, grid_density, [&](const Point& u) {
        std::vector<double> h(n);
        spec.eval_raw(u, h);
        for (std::size_t l = 0; l < n; ++l) {
            double over = std::max(spec.lower_bounds()[l] - h[l], h[l] - spec.upper_bounds()[l]);
            if (over > kBoundTol) {
                ++rep.bound_violations;
                if (over > rep.worst_violation_amount) {
                    rep.worst_violation_amount = over;
                    rep.worst_violation = u;
                }
            }
        }
        pts.push_back(u);
        hs.push_back(std::move(h));
    });
    for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            double rho = rho_metric(pts[i], pts[j], spec.lower_bounds(), spec.upper_bounds());
            if (rho <= 0.0) continue;
            ++rep.pairs;
            for (std::size_t l = 0; l < n; ++l)
                rep.max_ratio = std::max(rep.max_ratio, std::abs(hs[i][l] - hs[j][l]) / rho);
        }
    }
    if (rep.lipschitz_declared) rep.lipschitz_ok = rep.max_ratio <= *spec.lipschitz_c() * (1.0 + 1e-12);
    return rep;
}

int gamma_index(std::span<const double> h, int d) {
    require(!h.empty(), "gamma_index needs a nonempty exponent vector");
    require(d >= 1, "d must be a positive integer");
    double s = 0.0;
    for (std::size_t l = 0; l < h.size(); ++l) {
        require(h[l] > 0.0 && h[l] < 1.0, "exponents must lie in (0,1)");
        s += 1.0 / h[l];
        if (double(d) < s) return int(l) + 1;
    }
    fail(ErrorKind::domain, "condition C1 violated: d >= sum of 1/h_l");
}

double prefix_excess(std::span<const double> h, int d) {
    int g = gamma_index(h, d);
    double s = 0.0;
    for (int l = 0; l < g; ++l) s += 1.0 / h[l];
    return s - d;
}

double beta_exponent(std::span<const double> h, int d, std::span<const int> perm) {
    std::vector<double> hp(h.begin(), h.end());
    if (!perm.empty()) {
        check_dims(perm.size(), h.size(), "permutation");
        std::vector<bool> seen(h.size(), false);
        for (std::size_t l = 0; l < h.size(); ++l) {
            require(perm[l] >= 0 && std::size_t(perm[l]) < h.size() && !seen[perm[l]], "invalid permutation");
            seen[perm[l]] = true;
            hp[l] = h[perm[l]];
        }
    }
    int g = gamma_index(hp, d);
    double s = 0.0;
    for (int l = 0; l < g; ++l) s += 1.0 / hp[l];
    return double(hp.size()) - g + hp[g - 1] * (s - d);
}

double beta_bar(const HurstSpec& spec, const Rect& rect, int d, int grid_density) {
    const std::size_t n = spec.dim();
    if (n > 4) fail(ErrorKind::invalid_argument, "beta_bar enumerates permutations only up to N = 4");
    require(grid_density >= 2, "grid_density must be >= 2");
    std::vector<int> perm(n);
    double best = -std::numeric_limits<double>::infinity();
    for_each_grid_point(rect, grid_density, [&](const Point& u) {
        std::vector<double> h = spec.eval(u);
        std::iota(perm.begin(), perm.end(), 0);
        do {
            best = std::max(best, beta_exponent(h, d, perm));
        } while (std::next_permutation(perm.begin(), perm.end()));
    });
    return best;
}

std::vector<double> holder_p_weights(std::span<const double> h) {
    require(!h.empty(), "holder_p_weights needs a nonempty exponent vector");
    double inv = 0.0;
    for (double x : h) {
        require(x > 0.0 && x < 1.0, "exponents must lie in (0,1)");
        inv += 1.0 / x;
    }
    std::vector<double> p(h.size());
    for (std::size_t l = 0; l < h.size(); ++l) p[l] = h[l] * inv;
    return p;
}

OpenInterval kappa_range(std::span<const double> h, int d, int n) {
    require(n >= 1, "moment order n must be >= 1");
    int g = gamma_index(h, d);
    double a = prefix_excess(h, d);
    if (!(a > 0.0)) fail(ErrorKind::domain, "empty kappa interval: condition C1 fails");
    return {0.0, std::min(1.0, a / (2.0 * g)) / n};
}

ExponentReport exponent_report(std::span<const double> h, int d, int n) {
    ExponentReport r;
    r.gamma = gamma_index(h, d);
    r.beta = beta_exponent(h, d);
    r.p_weights = holder_p_weights(h);
    r.kappa = kappa_range(h, d, n);
    return r;
}

}  // namespace lmss
