#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace lmss {

// Deterministic random stream: identical (seed, stream_id) gives an identical sequence.
class RngStream {
  public:
    RngStream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_; }
    std::mt19937_64& engine() { return engine_; }

    double uniform();  // open interval (0, 1)
    double normal();
    double exponential();
    double gamma(double shape);
    int sign();

  private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

struct StableParams {
    double alpha = 2.0;
    double scale = 1.0;
};

void validate(const StableParams& p);

// Symmetric alpha-stable variates with characteristic function exp(-|scale t|^alpha).
double sample_sas_one(const StableParams& p, RngStream& rng);
void fill_sas(const StableParams& p, std::span<double> out, RngStream& rng);
std::vector<double> sample_sas(const StableParams& p, std::size_t count, RngStream& rng);

std::complex<double> empirical_cf(std::span<const double> samples, double t);

// int_R |x|^b exp(-A |x|^a) dx = (2/a) Gamma((1+b)/a) A^{-(1+b)/a}
double gamma_integral_closed_form(double a, double b, double A);

struct ExpBoundReport {
    double lhs_estimate = 0.0;
    double lhs_stderr = 0.0;
    double rhs_bound = 0.0;
    double c31 = 0.0;
    bool satisfied = false;
    // Same bound with the subset-sum constant below.
    double c31_subset = 0.0;
    double rhs_subset = 0.0;
    bool satisfied_subset = false;
    double slack() const { return rhs_bound > 0.0 ? lhs_estimate / rhs_bound : 0.0; }
};

// Constant of the multivariate exp-integral bound:
// prod_i (n^{b_i-1} v 1) (2/alpha)^n (sup over index tuples of Gamma((1 + sum_i b_{j_i})/alpha))^n
double exp_bound_constant(std::span<const double> b, double alpha);
// Variant with the supremum taken over Gamma((1 + sum_{i in S} b_i)/alpha) for subsets S, empty included.
// Each factor of the per-tuple Gamma product has this form, so the variant always dominates it.
double exp_bound_constant_subset(std::span<const double> b, double alpha);

// Monte Carlo check of
//   int prod|x_i|^{b_i} exp(-sum_i |sum_j a_ij x_j|^alpha) dx <= c |prod a_ii|^{-1} prod_{b_i>0} sum_j |u_ij|^{b_i}
// with u = a^{-1}. `matrix` is row-major n x n upper triangular.
ExpBoundReport mc_exp_integral_bound_check(std::span<const double> matrix, std::span<const double> b, double alpha,
                                           std::size_t trials, RngStream& rng);

}  // namespace lmss
