#pragma once

#include <limits>
#include <span>
#include <vector>

#include "lmss/hurst.hpp"
#include "lmss/stable.hpp"

namespace lmss {

struct QuadratureSpec {
    double truncation_L = 10.0;  // split point of the exact tail map on (-inf, -L]
    int panels_per_axis = 1;     // extra uniform subdivisions of every panel
    bool singularity_split = true;
    double target_rel_err = 1e-8;
};

void validate(const QuadratureSpec& q);

struct LinearCombination {
    std::vector<double> coeffs;
    std::vector<Point> points;
};

// Positive-part power with the convention x_+^0 = 1 for x > 0.
inline double pos_pow(double x, double e) {
    if (!(x > 0.0)) return 0.0;
    return e == 0.0 ? 1.0 : std::pow(x, e);
}

// Kernel c * prod_l [(u_l - v_l)_+^{h_l - 1/alpha} - (-v_l)_+^{h_l - 1/alpha}]; +inf at the exact singular point.
double kernel_g(std::span<const double> h, double alpha, std::span<const double> u, std::span<const double> v,
                double c_norm);

// int_R |(1-v)_+^{h-1/alpha} - (-v)_+^{h-1/alpha}|^alpha dv
double kernel_norm_1d(double h, double alpha, double rel_tol = 1e-13);

// Makes the unit point have norm one: prod_l kernel_norm_1d(h_l, alpha)^{-1/alpha}.
double normalizing_constant(std::span<const double> h, double alpha, const QuadratureSpec& quad = {});

// Hurst spec plus alpha with the normalizing constant taken at the spec's reference point.
class KernelModel {
  public:
    KernelModel(HurstSpec spec, double alpha, const QuadratureSpec& quad = {});

    const HurstSpec& spec() const { return spec_; }
    double alpha() const { return alpha_; }
    double c_norm() const { return c_norm_; }
    std::size_t dim() const { return spec_.dim(); }

  private:
    HurstSpec spec_;
    double alpha_;
    double c_norm_;
};

// Per-axis integration bounds; infinite entries are allowed.
struct IntegrationBox {
    std::vector<double> lower;
    std::vector<double> upper;
    static IntegrationBox whole(std::size_t n);
    static IntegrationBox positive(std::size_t n);
};

struct NormResult {
    double norm = 0.0;         // (int |sum a_j g_j|^alpha)^{1/alpha}
    double alpha_power = 0.0;  // int |sum a_j g_j|^alpha
    double abs_error = 0.0;    // estimated absolute error of alpha_power
    double tail_bound = 0.0;   // contribution not integrated (zero: the tail is mapped exactly)
};

NormResult lalpha_norm(const LinearCombination& comb, const KernelModel& model, const QuadratureSpec& quad,
                       const IntegrationBox* box = nullptr);
NormResult lalpha_norm(const LinearCombination& comb, const HurstSpec& spec, double alpha,
                       const QuadratureSpec& quad);

struct IncrementPair {
    Point u, v;
    double norm = 0.0;
    double denom = 0.0;
    double ratio = 0.0;
};

struct IncrementScan {
    double min_ratio = std::numeric_limits<double>::infinity();
    double max_ratio = 0.0;
    std::size_t skipped = 0;
    std::vector<IncrementPair> pairs;
};

IncrementPair increment_ratio(const KernelModel& model, const Point& u, const Point& v, const QuadratureSpec& quad);
IncrementScan increment_ratio_scan(const KernelModel& model, const Rect& rect, int pairs, const QuadratureSpec& quad,
                                   RngStream& rng);

}  // namespace lmss
