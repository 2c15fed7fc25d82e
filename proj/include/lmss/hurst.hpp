#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace lmss {

using Point = std::vector<double>;

struct Rect {
    std::vector<double> lower;
    std::vector<double> upper;

    Rect() = default;
    Rect(std::vector<double> lo, std::vector<double> hi);
    static Rect cube(std::size_t n, double lo, double hi);

    std::size_t dim() const { return lower.size(); }
    double volume() const;
    double min_edge() const;
    bool contains(std::span<const double> u, double tol = 0.0) const;
};

enum class HurstKind { constant, power_law, affine, table };

const char* kind_name(HurstKind kind);

// Functional Hurst index u -> (h_1(u), ..., h_N(u)) from a closed set of built-in families.
class HurstSpec {
  public:
    static HurstSpec constant(std::vector<double> h);
    // h(v) = 1/m - (v - q)^k on [q, upper]; N = 1.
    static HurstSpec power_law(double m, double q, double k, double upper);
    // h(u) = h0 + slope * u, slope row-major N x N; restricted to domain.
    static HurstSpec affine(std::vector<double> h0, std::vector<double> slope, Rect domain);
    // Multilinear interpolation on a tensor grid; values node-major (last axis fastest), N per node.
    static HurstSpec table(std::vector<std::vector<double>> axes, std::vector<double> values);

    HurstSpec& set_bounds(std::vector<double> m, std::vector<double> M);
    HurstSpec& set_lipschitz(double c);
    HurstSpec& set_norm_point(std::vector<double> p);

    std::size_t dim() const { return dim_; }
    HurstKind kind() const { return kind_; }
    bool is_constant() const { return kind_ == HurstKind::constant; }
    // True when h_l depends on u_l only, which allows per-axis kernel tables.
    bool axis_separable() const;

    const std::vector<double>& lower_bounds() const { return m_; }
    const std::vector<double>& upper_bounds() const { return M_; }
    std::optional<double> lipschitz_c() const { return lipschitz_; }
    const std::optional<Rect>& domain() const { return domain_; }
    Point norm_point() const;

    // Checked evaluation: u must be in R_+^N and the domain, result within [m, M].
    std::vector<double> eval(std::span<const double> u) const;
    void eval_into(std::span<const double> u, std::span<double> out) const;
    // No domain or bound checks; used by diagnostics that report violations themselves.
    void eval_raw(std::span<const double> u, std::span<double> out) const;
    // Component l as a function of u_l alone; requires axis_separable().
    double eval_axis(std::size_t l, double ul) const;

    // Raw parameters, for serialization.
    const std::vector<double>& params() const { return params_; }
    const std::vector<std::vector<double>>& table_axes() const { return axes_; }
    std::optional<Point> declared_norm_point() const { return norm_point_; }

  private:
    HurstSpec() = default;
    void default_bounds();
    void validate() const;

    HurstKind kind_ = HurstKind::constant;
    std::size_t dim_ = 0;
    std::vector<double> params_;
    std::vector<std::vector<double>> axes_;
    std::vector<double> m_, M_;
    std::optional<double> lipschitz_;
    std::optional<Rect> domain_;
    std::optional<Point> norm_point_;
};

double rho_metric(std::span<const double> u, std::span<const double> v, std::span<const double> m,
                  std::span<const double> M);

struct HurstDiagnostics {
    double max_ratio = 0.0;  // max |h_l(u)-h_l(v)| / rho(u,v) over pairs and l
    std::size_t pairs = 0;
    bool lipschitz_declared = false;
    bool lipschitz_ok = true;
    std::size_t bound_violations = 0;
    Point worst_violation;
    double worst_violation_amount = 0.0;
    bool pass() const { return bound_violations == 0 && lipschitz_ok; }
};

HurstDiagnostics check_h1_h2(const HurstSpec& spec, const Rect& rect, int grid_density);

// Smallest m with d < sum_{l<=m} 1/h_l; throws DomainError when none exists.
int gamma_index(std::span<const double> h, int d);
// perm holds 0-based indices; empty means identity.
double beta_exponent(std::span<const double> h, int d, std::span<const int> perm = {});
double beta_bar(const HurstSpec& spec, const Rect& rect, int d, int grid_density);
std::vector<double> holder_p_weights(std::span<const double> h);
// sum_{l<=gamma} 1/h_l - d
double prefix_excess(std::span<const double> h, int d);

struct OpenInterval {
    double lo = 0.0;
    double hi = 0.0;
    double midpoint() const { return 0.5 * (lo + hi); }
    bool empty() const { return !(hi > lo); }
};

OpenInterval kappa_range(std::span<const double> h, int d, int n);

struct ExponentReport {
    int gamma = 0;
    double beta = 0.0;
    std::vector<double> p_weights;
    OpenInterval kappa;
};

ExponentReport exponent_report(std::span<const double> h, int d, int n);

// Visits every point of a tensor grid with `density` points per axis (endpoints included).
template <class F>
void for_each_grid_point(const Rect& rect, int density, F&& f) {
    const std::size_t n = rect.dim();
    std::vector<int> idx(n, 0);
    Point u(n);
    while (true) {
        for (std::size_t l = 0; l < n; ++l) {
            double t = density > 1 ? double(idx[l]) / double(density - 1) : 0.5;
            u[l] = idx[l] == density - 1 ? rect.upper[l] : rect.lower[l] + t * (rect.upper[l] - rect.lower[l]);
        }
        f(std::as_const(u));
        std::size_t l = n;
        while (l > 0) {
            --l;
            if (++idx[l] < density) break;
            idx[l] = 0;
            if (l == 0) return;
        }
        if (n == 0) return;
    }
}

}  // namespace lmss
