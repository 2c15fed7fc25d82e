#include <doctest.h>

#include <cmath>

#include "lmss/error.hpp"
#include "lmss/existence.hpp"
#include "lmss/stable.hpp"

using namespace lmss;

TEST_CASE("infimum of sum 1/h") {
    InfimumResult c = infimum_sum_inv_h(HurstSpec::constant({0.5, 0.5}), Rect::cube(2, 0.1, 1.0));
    CHECK(c.value == doctest::Approx(4.0).epsilon(1e-15));

    HurstSpec ex = example_hurst(2, 0.0, 0.5);
    InfimumResult e = infimum_sum_inv_h(ex, *ex.domain());
    CHECK(e.value == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(e.argmin[0] == 0.0);
    CHECK(e.ties == 1);

    HurstSpec lin = HurstSpec::affine({0.4}, {0.1}, Rect({0.0}, {1.0}));
    InfimumResult l = infimum_sum_inv_h(lin, Rect({0.0}, {1.0}));
    CHECK(l.value == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(l.argmin[0] == 1.0);

    // Interior minimum off the scan grid is found by refinement.
    HurstSpec tbl = HurstSpec::table({{0.0, 0.3137, 1.0}}, {0.3, 0.6, 0.3});
    InfimumResult t = infimum_sum_inv_h(tbl, Rect({0.0}, {1.0}));
    CHECK(t.value == doctest::Approx(1.0 / 0.6).epsilon(1e-9));
    CHECK(t.argmin[0] == doctest::Approx(0.3137).epsilon(1e-6));
}

TEST_CASE("example spec construction") {
    HurstSpec a = example_hurst(2, 0.0, 0.5);
    CHECK(a.domain()->upper[0] == doctest::Approx(0.2));
    CHECK(a.eval(std::vector<double>{0.0})[0] == doctest::Approx(0.5));
    CHECK(a.eval(std::vector<double>{0.2})[0] == doctest::Approx(0.5 - std::sqrt(0.2)).epsilon(1e-14));
    CHECK(a.eval(std::vector<double>{0.2})[0] == doctest::Approx(0.0528).epsilon(1e-3));
    HurstSpec b = example_hurst(2, 0.0, 1.0, 0.49);
    CHECK(b.eval(std::vector<double>{0.3})[0] == doctest::Approx(0.2));
    CHECK(example_default_upper(2, 0.0, 1.0) == doctest::Approx(0.4));
    CHECK(example_default_upper(3, 0.0, 2.0) == doctest::Approx(1.0 / 3.0));
    CHECK_THROWS_AS(example_hurst(1, 0.0, 0.5), Error);
    CHECK_THROWS_AS(example_hurst(2, 0.0, 0.5, 0.3), Error);
    CHECK_THROWS_AS(example_hurst(2, 0.6, 0.5), Error);
}

TEST_CASE("classification of the worked example") {
    struct Case {
        double k;
        int d;
        Verdict verdict;
        bool exists;
    };
    const Case cases[] = {
        {0.5, 2, Verdict::c2, true},
        {0.5, 1, Verdict::c1, true},
        {1.0, 2, Verdict::fail, false},
        {1.0, 1, Verdict::c1, true},
    };
    for (const Case& c : cases) {
        HurstSpec spec = example_hurst(2, 0.0, c.k, c.k == 1.0 ? std::optional<double>(0.49) : std::nullopt);
        ExistenceReport r = condition_c_check(spec, *spec.domain(), c.d);
        INFO("k = ", c.k, " d = ", c.d, " verdict ", verdict_name(r.verdict), " ", r.reason);
        CHECK(r.verdict == c.verdict);
        CHECK(r.exists == c.exists);
        if (c.verdict == Verdict::c1) CHECK(r.c2_status == C2Status::not_evaluated);
    }
}

TEST_CASE("C2 integral of the k = 1/2 example matches the closed form") {
    // int_0^{0.2} (1/(4 sqrt v) - 1/2) dv = sqrt(0.2)/2 - 0.1
    HurstSpec spec = example_hurst(2, 0.0, 0.5);
    ExistenceReport r = condition_c_check(spec, *spec.domain(), 2);
    REQUIRE(r.c2_integral.has_value());
    CHECK(*r.c2_integral == doctest::Approx(0.12360679774997897).epsilon(1e-6));
    CHECK(r.c2_status == C2Status::converged);
    CHECK(r.shell_ratios.back() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-3));
}

TEST_CASE("k = 1 example diverges with shell ratios near one") {
    HurstSpec spec = example_hurst(2, 0.0, 1.0, 0.49);
    ExistenceReport r = condition_c_check(spec, *spec.domain(), 2);
    CHECK(r.c2_status == C2Status::divergent);
    CHECK_FALSE(r.c2_integral.has_value());
    REQUIRE(r.shell_ratios.size() >= 3);
    CHECK(r.shell_ratios.back() == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("constant exponents never satisfy C2") {
    RngStream rng(12, 0);
    for (int t = 0; t < 25; ++t) {
        const int d = 3 + int(rng.uniform() * 4.0);
        const double x = 1.2 + (d - 2.4) * rng.uniform();
        HurstSpec spec = HurstSpec::constant({1.0 / x, 1.0 / (d - x)});
        ExistenceReport r = condition_c_check(spec, Rect::cube(2, 0.1, 1.0), d);
        INFO("d = ", d, " inf = ", r.inf_sum_inv_h);
        CHECK(r.verdict == Verdict::fail);
        CHECK_FALSE(r.exists);
    }
}

TEST_CASE("verdict C1 is monotone in d") {
    HurstSpec spec = HurstSpec::affine({0.3, 0.45}, {0.1, 0.0, 0.0, -0.2}, Rect::cube(2, 0.0, 1.0));
    bool seen_c1 = false;
    for (int d = 8; d >= 1; --d) {
        ExistenceReport r = condition_c_check(spec, Rect::cube(2, 0.0, 1.0), d);
        if (seen_c1) CHECK(r.verdict == Verdict::c1);
        seen_c1 = seen_c1 || r.verdict == Verdict::c1;
    }
    CHECK(seen_c1);
}

TEST_CASE("two-axis tie with an integrable corner singularity") {
    HurstSpec spec = HurstSpec::affine({0.5, 0.5}, {-0.1, 0.0, 0.0, -0.1}, Rect::cube(2, 0.0, 1.0));
    ExistenceReport r = condition_c_check(spec, Rect::cube(2, 0.0, 1.0), 4);
    CHECK(r.inf_sum_inv_h == doctest::Approx(4.0));
    CHECK(r.verdict == Verdict::c2);
    REQUIRE(r.c2_integral.has_value());
    CHECK(std::isfinite(*r.c2_integral));
}

TEST_CASE("existence input checks") {
    HurstSpec spec = HurstSpec::constant({0.5});
    CHECK_THROWS_AS(condition_c_check(spec, Rect({0.0}, {1.0}), 0), Error);
    CHECK_THROWS_AS(infimum_sum_inv_h(spec, Rect::cube(2, 0.0, 1.0)), Error);
}
