#include "lmss/stable.hpp"

#include <cmath>
#include <numbers>

#include "lmss/error.hpp"

namespace lmss {

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_(stream_id) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream_id),
                      std::uint32_t(stream_id >> 32)};
    engine_.seed(seq);
}

double RngStream::uniform() {
    // 53-bit mantissa, shifted by half an ulp so 0 and 1 are never returned.
    return (double(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

double RngStream::exponential() { return -std::log(uniform()); }

double RngStream::gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

int RngStream::sign() { return (engine_() >> 63) ? 1 : -1; }

void validate(const StableParams& p) {
    if (!(p.alpha > 0.0 && p.alpha <= 2.0)) fail(ErrorKind::invalid_argument, "alpha must lie in (0, 2]");
    if (!(p.scale > 0.0 && std::isfinite(p.scale))) fail(ErrorKind::invalid_argument, "scale must be positive");
}

double sample_sas_one(const StableParams& p, RngStream& rng) {
    const double a = p.alpha;
    if (a == 2.0) return p.scale * std::numbers::sqrt2 * rng.normal();
    const double v = std::numbers::pi * (rng.uniform() - 0.5);
    if (a == 1.0) return p.scale * std::tan(v);
    const double w = rng.exponential();
    const double x = std::sin(a * v) / std::pow(std::cos(v), 1.0 / a) *
                     std::pow(std::cos((1.0 - a) * v) / w, (1.0 - a) / a);
    return p.scale * x;
}

void fill_sas(const StableParams& p, std::span<double> out, RngStream& rng) {
    validate(p);
    for (double& x : out) x = sample_sas_one(p, rng);
}

std::vector<double> sample_sas(const StableParams& p, std::size_t count, RngStream& rng) {
    require(count >= 1, "sample count must be >= 1");
    std::vector<double> out(count);
    fill_sas(p, out, rng);
    return out;
}

std::complex<double> empirical_cf(std::span<const double> samples, double t) {
    require(!samples.empty(), "empirical_cf needs samples");
    double re = 0.0, im = 0.0;
    for (double x : samples) {
        re += std::cos(t * x);
        im += std::sin(t * x);
    }
    const double n = double(samples.size());
    return {re / n, im / n};
}

double gamma_integral_closed_form(double a, double b, double A) {
    if (!(a > 0.0)) fail(ErrorKind::invalid_argument, "gamma integral needs a > 0");
    if (!(A > 0.0)) fail(ErrorKind::invalid_argument, "gamma integral needs A > 0");
    if (!(b >= 0.0)) fail(ErrorKind::invalid_argument, "gamma integral needs b >= 0");
    const double s = (1.0 + b) / a;
    return 2.0 / a * std::exp(std::lgamma(s) - s * std::log(A));
}

double exp_bound_constant(std::span<const double> b, double alpha) {
    const std::size_t n = b.size();
    require(n >= 1 && n <= 4, "bound constant supports 1 <= n <= 4");
    require(alpha > 0.0 && alpha <= 2.0, "alpha must lie in (0, 2]");
    double pref = 1.0;
    for (double bi : b) {
        require(bi >= 0.0, "exponents b_i must be >= 0");
        pref *= std::max(std::pow(double(n), bi - 1.0), 1.0);
    }
    // Enumerate all n^n index tuples.
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= n;
    double sup = 0.0;
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += b[c % n];
            c /= n;
        }
        sup = std::max(sup, std::tgamma((1.0 + s) / alpha));
    }
    return pref * std::pow(2.0 / alpha, double(n)) * std::pow(sup, double(n));
}

double exp_bound_constant_subset(std::span<const double> b, double alpha) {
    const std::size_t n = b.size();
    require(n >= 1 && n <= 4, "bound constant supports 1 <= n <= 4");
    require(alpha > 0.0 && alpha <= 2.0, "alpha must lie in (0, 2]");
    double pref = 1.0;
    for (double bi : b) {
        require(bi >= 0.0, "exponents b_i must be >= 0");
        pref *= std::max(std::pow(double(n), bi - 1.0), 1.0);
    }
    double sup = 0.0;
    for (std::size_t mask = 0; mask < (std::size_t(1) << n); ++mask) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1) s += b[i];
        sup = std::max(sup, std::tgamma((1.0 + s) / alpha));
    }
    return pref * std::pow(2.0 / alpha, double(n)) * std::pow(sup, double(n));
}

ExpBoundReport mc_exp_integral_bound_check(std::span<const double> matrix, std::span<const double> b, double alpha,
                                           std::size_t trials, RngStream& rng) {
    const std::size_t n = b.size();
    require(n >= 1 && n <= 4, "bound check supports 1 <= n <= 4");
    require(matrix.size() == n * n, "matrix must be n x n");
    require(trials >= 2, "need at least two Monte Carlo trials");
    validate(StableParams{alpha, 1.0});
    for (std::size_t i = 0; i < n; ++i) {
        if (matrix[i * n + i] == 0.0) fail(ErrorKind::invalid_argument, "matrix has a zero diagonal entry");
        for (std::size_t j = 0; j < i; ++j)
            require(matrix[i * n + j] == 0.0, "matrix must be upper triangular");
    }
    // Back substitution for u = a^{-1} (upper triangular).
    std::vector<double> u(n * n, 0.0);
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t ii = n; ii-- > 0;) {
            double rhs = ii == col ? 1.0 : 0.0;
            for (std::size_t j = ii + 1; j < n; ++j) rhs -= matrix[ii * n + j] * u[j * n + col];
            u[ii * n + col] = rhs / matrix[ii * n + ii];
        }
    }
    double det = 1.0;
    for (std::size_t i = 0; i < n; ++i) det *= matrix[i * n + i];

    // Substituting y = a x turns the weight into a product of densities exp(-|y|^alpha)/z1.
    const double z1 = 2.0 / alpha * std::tgamma(1.0 / alpha);
    const double norm = std::pow(z1, double(n)) / std::abs(det);
    bool any_b = false;
    for (double bi : b) any_b = any_b || bi != 0.0;

    ExpBoundReport rep;
    if (!any_b) {
        rep.lhs_estimate = norm;
        rep.lhs_stderr = 0.0;
    } else {
        std::vector<double> y(n);
        double mean = 0.0, m2 = 0.0;
        for (std::size_t t = 0; t < trials; ++t) {
            for (std::size_t i = 0; i < n; ++i) y[i] = rng.sign() * std::pow(rng.gamma(1.0 / alpha), 1.0 / alpha);
            double w = 1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (b[i] == 0.0) continue;
                double xi = 0.0;
                for (std::size_t j = 0; j < n; ++j) xi += u[i * n + j] * y[j];
                w *= std::pow(std::abs(xi), b[i]);
            }
            double delta = w - mean;
            mean += delta / double(t + 1);
            m2 += delta * (w - mean);
        }
        rep.lhs_estimate = norm * mean;
        rep.lhs_stderr = norm * std::sqrt(m2 / double(trials - 1) / double(trials));
    }
    rep.c31 = exp_bound_constant(b, alpha);
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (b[i] == 0.0) continue;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += std::pow(std::abs(u[i * n + j]), b[i]);
        prod *= s;
    }
    rep.rhs_bound = rep.c31 / std::abs(det) * prod;
    const double rel_se = rep.lhs_estimate > 0.0 ? rep.lhs_stderr / rep.lhs_estimate : 0.0;
    rep.satisfied = rep.lhs_estimate <= rep.rhs_bound * (1.0 + 3.0 * rel_se) * (1.0 + 1e-12);
    rep.c31_subset = exp_bound_constant_subset(b, alpha);
    rep.rhs_subset = rep.c31_subset / std::abs(det) * prod;
    rep.satisfied_subset = rep.lhs_estimate <= rep.rhs_subset * (1.0 + 3.0 * rel_se) * (1.0 + 1e-12);
    return rep;
}

}  // namespace lmss
