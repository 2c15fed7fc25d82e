#include <doctest.h>

#include <cmath>
#include <numbers>

#include "lmss/error.hpp"
#include "lmss/lemmas.hpp"

using namespace lmss;

namespace {

std::vector<double> decades(double hi, double lo, int per_decade) {
    std::vector<double> out;
    const int steps = int(std::lround(std::log10(hi / lo) * per_decade));
    for (int k = 0; k <= steps; ++k) out.push_back(hi * std::pow(10.0, -double(k) / per_decade));
    return out;
}

}  // namespace

TEST_CASE("int_equiv integral against the arctan closed form") {
    // int_0^1 (A + t^2)^{-1} dt = A^{-1/2} atan(A^{-1/2})
    for (double A : {1e-1, 1e-3, 1e-6}) {
        const double exact = std::atan(1.0 / std::sqrt(A)) / std::sqrt(A);
        CHECK(int_equiv_integral(2.0, 1.0, 0.0, 1.0, 0.0, A) == doctest::Approx(exact).epsilon(1e-10));
    }
    CHECK(int_equiv_integral(2.0, 1.0, 0.0, 1.0, 0.0, 1e-3) == doctest::Approx(48.673274462456586).epsilon(1e-10));
    // Interior t0 splits into two one-sided pieces.
    const double A = 1e-2;
    const double two = (std::atan(0.3 / std::sqrt(A)) + std::atan(0.7 / std::sqrt(A))) / std::sqrt(A);
    CHECK(int_equiv_integral(2.0, 1.0, 0.0, 1.0, 0.3, A) == doctest::Approx(two).epsilon(1e-10));
    CHECK_THROWS_AS(int_equiv_integral(2.0, 1.0, 0.5, 0.4, 0.45, A), Error);
    CHECK_THROWS_AS(int_equiv_integral(2.0, 1.0, 0.0, 1.0, 1.5, A), Error);
}

TEST_CASE("supercritical slopes approach -(beta - 1/alpha)") {
    const std::vector<double> As = decades(1e-4, 1e-7, 2);
    struct P {
        double alpha, beta;
    };
    for (P p : {P{2.0, 1.0}, P{1.5, 1.0}, P{2.0, 2.0}}) {
        AsymptoticCheck c = verify_int_equiv(p.alpha, p.beta, 0.0, 1.0, 0.0, As);
        INFO("alpha ", p.alpha, " beta ", p.beta, " slope ", c.fitted_slope);
        CHECK(c.regime == Regime::supercritical);
        CHECK(c.theory_slope == doctest::Approx(-(p.beta - 1.0 / p.alpha)));
        CHECK(c.passed);
        CHECK(std::isfinite(c.ratio_max));
    }
}

TEST_CASE("critical regime ratio to the log expression") {
    AsymptoticCheck c = verify_int_equiv(1.0, 1.0, 0.0, 1.0, 0.0, decades(1e-1, 1e-6, 1));
    CHECK(c.regime == Regime::critical);
    for (double r : c.ratios) CHECK(r == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(c.passed);
    AsymptoticCheck mid = verify_int_equiv(2.0, 0.5, 0.0, 2.0, 0.7, decades(1e-1, 1e-6, 1));
    CHECK(mid.regime == Regime::critical);
    CHECK(mid.ratio_min >= 0.5);
    CHECK(mid.ratio_max <= 2.0);
}

TEST_CASE("subcritical integral stays bounded") {
    AsymptoticCheck c = verify_int_equiv(2.0, 0.25, 0.0, 1.0, 0.0, decades(1e-1, 1e-6, 1));
    CHECK(c.regime == Regime::subcritical);
    CHECK(c.ratio_max / c.ratio_min < 2.0);
    CHECK(c.passed);
    CHECK_THROWS_AS(verify_int_equiv(2.0, 0.25, 0.0, 1.0, 0.0, {1e-1, 1e-2}), Error);
    CHECK_THROWS_AS(verify_int_equiv(2.0, 0.25, 0.0, 1.0, 0.0, {1e-4, 1e-1}), Error);
}

TEST_CASE("triangle inequality") {
    TriangleCheck a = verify_triangle(0.5, {1.0, 1.0});
    CHECK(a.lhs == doctest::Approx(std::sqrt(2.0)));
    CHECK(a.rhs == doctest::Approx(2.0));
    CHECK(a.satisfied);
    TriangleCheck b = verify_triangle(2.0, {1.0, 1.0});
    CHECK(b.lhs == 4.0);
    CHECK(b.rhs == 4.0);
    CHECK(b.satisfied);

    RngStream rng(77, 0);
    int failures = 0;
    for (int t = 0; t < 10000; ++t) {
        const double alpha = 0.05 + 1.95 * rng.uniform();
        std::vector<double> x(1 + std::size_t(rng.uniform() * 8.0));
        for (double& v : x) v = rng.normal() * std::exp(3.0 * rng.normal());
        failures += !verify_triangle(alpha, x).satisfied;
    }
    CHECK(failures == 0);
}

TEST_CASE("p weights") {
    SUBCASE("two equal exponents") {
        PWeightsReport r = verify_p_weights({0.5, 0.5}, 1, 4);
        CHECK(r.tau == 1);
        REQUIRE(r.full.p.size() == 2);
        CHECK(r.full.p[0] == doctest::Approx(2.0));
        CHECK(r.full.p[1] == doctest::Approx(2.0));
        CHECK(r.full.max_hq_over_p == doctest::Approx(0.25));
        CHECK(r.full.delta_ok);
        CHECK(r.passed);
        CHECK(r.truncated.p == std::vector<double>{1.0});
        CHECK(r.truncated.ok());
    }
    SUBCASE("one axis") {
        PWeightsReport r = verify_p_weights({0.6}, 1, 3);
        CHECK(r.full.p == std::vector<double>{1.0});
        CHECK(r.full.ratio_ok == (0.6 * 1 < 1.0));
        CHECK(r.passed);
    }
    SUBCASE("tau equals N") {
        PWeightsReport r = verify_p_weights({0.9, 0.9}, 2, 10);
        CHECK(r.tau == 2);
        CHECK(r.full.sum_ok);
        CHECK(r.full.ratio_ok);
        CHECK(r.full.delta_ok);
        CHECK(r.full.l0_ok);
        CHECK(r.full.p == r.truncated.p);
    }
    SUBCASE("random exponents") {
        RngStream rng(3, 0);
        int built = 0;
        for (int t = 0; t < 2000; ++t) {
            std::vector<double> h(1 + std::size_t(rng.uniform() * 4.0));
            double inv = 0.0;
            for (double& v : h) {
                v = 0.05 + 0.9 * rng.uniform();
                inv += 1.0 / v;
            }
            const int d = 1 + int(rng.uniform() * std::floor(inv));
            if (!(double(d) < inv)) continue;
            PWeightsReport r = verify_p_weights(h, d, 1 + int(rng.uniform() * 20.0));
            ++built;
            CHECK(std::abs(r.full.sum_inv_p - 1.0) <= 1e-12);
            CHECK(std::abs(r.truncated.sum_inv_p - 1.0) <= 1e-12);
            CHECK(r.full.p_at_least_one);
            CHECK(r.truncated.ratio_ok);
            CHECK(r.truncated.l0_ok);
        }
        CHECK(built > 1000);
    }
    CHECK_THROWS_AS(verify_p_weights({0.5, 0.5}, 4, 2), Error);
}

TEST_CASE("Z_l integral: one point has a closed form") {
    // ||Z(u)||_alpha = c (u - eps)^h / (h alpha)^{1/alpha} for constant h on one axis,
    // so the integral is 2 Gamma(1 + 1/alpha) / ||Z(u)||_alpha.
    for (double alpha : {2.0, 1.5, 0.8}) {
        const double h = 0.6;
        KernelModel model(HurstSpec::constant({h}), alpha);
        RngStream rng(1, 0);
        for (double u : {0.06, 0.3, 0.9}) {
            const double eps = 0.05;
            const double norm = model.c_norm() * std::pow(u - eps, h) / std::pow(h * alpha, 1.0 / alpha);
            MCValue v = sumZ_integral(model, 0, eps, {{u}}, {}, 16, rng, {});
            INFO("alpha ", alpha, " u ", u);
            CHECK(v.value == doctest::Approx(2.0 * std::tgamma(1.0 + 1.0 / alpha) / norm).epsilon(1e-7));
            CHECK(v.error == 0.0);
        }
    }
}

TEST_CASE("Z_l integral grows like the gap to the power -h") {
    KernelModel model(HurstSpec::constant({0.4, 0.7}), 1.5);
    RngStream rng(2, 0);
    std::vector<double> gaps{1e-1, 1e-2, 1e-3, 1e-4}, lhs;
    for (double g : gaps) lhs.push_back(sumZ_integral(model, 0, 0.1, {{0.1 + g, 0.5}}, {}, 16, rng, {}).value);
    const double slope = std::log(lhs.back() / lhs.front()) / std::log(gaps.back() / gaps.front());
    CHECK(slope == doctest::Approx(-0.4).epsilon(0.05));
}

TEST_CASE("Gaussian case: direction sampling agrees with the Gram determinant") {
    KernelModel model(HurstSpec::constant({0.5, 0.7}), 2.0);
    std::vector<Point> pts{{0.3, 0.4}, {0.5, 0.9}};
    RngStream rng(5, 0);
    MCValue exact = sumZ_integral(model, 0, 0.1, pts, {}, 16, rng, {});
    // A tiny b forces the sampled path; the weight is 1 to within 1e-9 away from the axes.
    MCValue sampled = sumZ_integral(model, 0, 0.1, pts, {1e-12, 0.0}, 4096, rng, {});
    CHECK(exact.error == 0.0);
    CHECK(sampled.value == doctest::Approx(exact.value).epsilon(3.0 * sampled.error / exact.value + 1e-9));
}

TEST_CASE("held-out bound with a calibrated constant") {
    SUBCASE("n = 2, Gaussian, 50 seeds") {
        KernelModel model(HurstSpec::constant({0.6}), 2.0);
        int passed = 0;
        for (std::uint64_t seed = 1; seed <= 50; ++seed) {
            SumZConfig cfg;
            cfg.n = 2;
            cfg.calibration = 8;
            cfg.held_out = 20;
            cfg.seed = seed;
            passed += verify_bound_sumZ(model, cfg).passed;
        }
        CHECK(passed >= 48);
    }
    SUBCASE("n = 2, alpha = 1.5, two axes") {
        KernelModel model(HurstSpec::constant({0.5, 0.7}), 1.5);
        SumZConfig cfg;
        cfg.n = 2;
        cfg.calibration = 6;
        cfg.held_out = 20;
        cfg.sphere_samples = 64;
        cfg.seed = 11;
        SumZReport r = verify_bound_sumZ(model, cfg);
        CHECK(r.held_out_fraction >= 0.95);
        CHECK(r.c_fit == doctest::Approx(1.25 * r.calibration_max_ratio));
    }
    SUBCASE("n = 3 with moment weights") {
        KernelModel model(HurstSpec::constant({0.6}), 2.0);
        SumZConfig cfg;
        cfg.n = 3;
        cfg.b = {1.0, 0.0, 0.5};
        cfg.calibration = 8;
        cfg.held_out = 20;
        cfg.sphere_samples = 2048;
        cfg.seed = 4;
        SumZReport r = verify_bound_sumZ(model, cfg);
        CHECK(r.passed);
    }
    KernelModel model(HurstSpec::constant({0.6}), 2.0);
    SumZConfig bad;
    bad.n = 4;
    CHECK_THROWS_AS(verify_bound_sumZ(model, bad), Error);
    bad.n = 3;
    bad.max_gap = 0.5;
    CHECK_THROWS_AS(verify_bound_sumZ(model, bad), Error);
}
