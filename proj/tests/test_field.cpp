#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "lmss/error.hpp"
#include "lmss/field.hpp"

using namespace lmss;

namespace {

std::vector<double> one(double t) { return {t}; }

double variance(const std::vector<double>& x) {
    double m = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / double(x.size() - 1);
}

// Two-sample Kolmogorov-Smirnov statistic.
double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(double(i) / double(a.size()) - double(j) / double(b.size())));
    }
    return d;
}

}  // namespace

TEST_CASE("grid geometry puts zero on a cell boundary and enforces the budget") {
    GridGeometry g = GridGeometry::make(1, 0.3, 1.0, one(1.0));
    CHECK(g.lower_index == -4);
    CHECK(g.counts[0] == 8);
    CHECK(g.boundary(g.zero_index()) == 0.0);
    CHECK(g.upper(0) == doctest::Approx(1.2));

    GridGeometry a = GridGeometry::make(2, 0.125, 1.0, std::vector<double>{1.0, 0.5}, kDefaultMaxCells, 4);
    CHECK(a.lower_index % 4 == 0);
    CHECK(a.counts[0] % 4 == 0);
    CHECK(a.counts[1] % 4 == 0);
    CHECK(a.total_cells() == std::uint64_t(a.counts[0] * a.counts[1]));

    CHECK_THROWS_AS(GridGeometry::make(2, 1e-3, 10.0, std::vector<double>{1.0, 1.0}, 1000), Error);
    try {
        GridGeometry::make(2, 1e-3, 10.0, std::vector<double>{1.0, 1.0}, 1000);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::budget);
    }
    CHECK_THROWS_AS(GridGeometry::make(1, 0.0, 1.0, one(1.0)), Error);
    CHECK_THROWS_AS(GridGeometry::make(1, 0.1, -1.0, one(1.0)), Error);
}

TEST_CASE("measure cells carry SaS(volume^{1/alpha}) increments") {
    const double s = 0.5;
    GridGeometry g = GridGeometry::make(2, s, s, std::vector<double>{s, s});
    REQUIRE(g.total_cells() == 4);
    std::vector<double> first;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) first.push_back(MeasureGrid::build(g, 2.0, seed, 0).increments()[0]);
    CHECK(variance(first) == doctest::Approx(2.0 * s * s).epsilon(0.05));

    // Bitwise equal to direct sampling with scale = cell volume at alpha = 1.
    MeasureGrid m = MeasureGrid::build(g, 1.0, 9, 3);
    RngStream rng(9, 3);
    std::vector<double> direct = sample_sas({1.0, s * s}, 4, rng);
    CHECK(std::equal(direct.begin(), direct.end(), m.increments().begin()));

    MeasureGrid again = MeasureGrid::build(g, 1.0, 9, 3);
    CHECK(std::equal(again.increments().begin(), again.increments().end(), m.increments().begin()));
    CHECK_THROWS_AS(MeasureGrid::build(g, 2.5, 1, 0), Error);
}

TEST_CASE("coarsening sums children and matches the coarse geometry") {
    GridGeometry fine = GridGeometry::make(2, 0.25, 1.0, std::vector<double>{1.0, 0.5}, kDefaultMaxCells, 2);
    MeasureGrid m = MeasureGrid::build(fine, 1.5, 4, 1);
    MeasureGrid c = m.coarsen();
    CHECK(c.geometry() == GridGeometry::make(2, 0.5, 1.0, std::vector<double>{1.0, 0.5}));
    std::vector<std::int64_t> ci{1, 2};
    double sum = 0.0;
    for (std::int64_t a = 0; a < 2; ++a)
        for (std::int64_t b = 0; b < 2; ++b) {
            std::vector<std::int64_t> fi{2 * ci[0] + a, 2 * ci[1] + b};
            sum += m.at(fi);
        }
    CHECK(c.at(ci) == doctest::Approx(sum).epsilon(1e-15));
    const double total_f = std::accumulate(m.increments().begin(), m.increments().end(), 0.0);
    const double total_c = std::accumulate(c.increments().begin(), c.increments().end(), 0.0);
    CHECK(total_c == doctest::Approx(total_f).epsilon(1e-12));

    GridGeometry odd = GridGeometry::make(1, 0.25, 0.75, one(1.0));
    CHECK_THROWS_AS(MeasureGrid::build(odd, 2.0, 1, 0).coarsen(), Error);
}

TEST_CASE("measure cache round trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "lmss_test_cache";
    fs::remove_all(dir);
    GridGeometry g = GridGeometry::make(1, 0.1, 1.0, one(1.0));
    MeasureGrid a = MeasureGrid::build_cached(g, 1.2, 5, 2, dir.string());
    CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}) == 1);
    MeasureGrid b = MeasureGrid::build_cached(g, 1.2, 5, 2, dir.string());
    CHECK(std::equal(a.increments().begin(), a.increments().end(), b.increments().begin()));
    const std::string file = fs::directory_iterator(dir)->path().string();
    CHECK_FALSE(MeasureGrid::load(file, g, 1.2, 6, 2).has_value());
    CHECK_FALSE(MeasureGrid::load(file, g, 1.3, 5, 2).has_value());
    fs::remove_all(dir);
}

TEST_CASE("axis weights: singular cell uses the L^alpha cell mean") {
    GridGeometry g = GridGeometry::make(1, 0.25, 1.0, one(1.0));
    const double alpha = 1.5, e = 0.3 - 1.0 / alpha, x = 0.6;
    std::vector<double> w = axis_weights(g, x, e, alpha);
    // Cell [0.5, 0.75] holds x.
    const std::int64_t k = g.zero_index() + 2;
    const double ha = e * alpha + 1.0;
    CHECK(w[std::size_t(k)] == doctest::Approx(std::pow(std::pow(0.1, ha) / (ha * 0.25), 1.0 / alpha)));
    CHECK(w[std::size_t(k + 1)] == 0.0);
    CHECK(w[std::size_t(k - 1)] == doctest::Approx(std::pow(x - 0.375, e)));
    // Cell [-0.25, 0] carries the cell mean of the second term.
    const std::int64_t z = g.zero_index() - 1;
    CHECK(w[std::size_t(z)] ==
          doctest::Approx(std::pow(x + 0.125, e) - std::pow(std::pow(0.25, ha) / (ha * 0.25), 1.0 / alpha)));
}

TEST_CASE("discrete kernel norm approaches the quadrature norm on the truncated domain") {
    for (double h : {0.3, 0.5, 0.8}) {
        const double alpha = 2.0, L = 2.0, s = 1.0 / 1024;
        KernelModel model(HurstSpec::constant({h}), alpha);
        GridGeometry g = GridGeometry::make(1, s, L, one(1.0));
        std::vector<double> w = axis_weights(g, 0.7, h - 0.5, alpha);
        double discrete = 0.0;
        for (double v : w) discrete += v * v * s;
        discrete *= model.c_norm() * model.c_norm();
        IntegrationBox box{{-L}, {std::numeric_limits<double>::infinity()}};
        QuadratureSpec q;
        q.target_rel_err = 1e-10;
        const double exact = lalpha_norm({{1.0}, {{0.7}}}, model, q, &box).alpha_power;
        CHECK(discrete == doctest::Approx(exact).epsilon(0.02));
    }
}

TEST_CASE("Brownian path increments have variance proportional to the lag") {
    KernelModel model(HurstSpec::constant({0.5}), 2.0);
    GridGeometry g = GridGeometry::make(1, 1.0 / 512, 1.0, one(1.0));
    EvalGrid grid(Rect({0.0}, {1.0}), 8);
    FieldSynthesizer synth(model, g, grid);
    CHECK(synth.separable());
    std::vector<double> inc;
    for (std::uint64_t r = 0; r < 200; ++r) {
        std::vector<double> x = synth.apply(MeasureGrid::build(g, 2.0, 77, r));
        for (std::size_t i = 0; i + 1 < x.size(); ++i) inc.push_back(x[i + 1] - x[i]);
    }
    // Var X(t) = 2t under the exp(-|t|^alpha) convention.
    CHECK(variance(inc) / (2.0 * 0.125) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("field components are independent") {
    KernelModel model(HurstSpec::constant({0.5}), 2.0);
    GridGeometry g = GridGeometry::make(1, 1.0 / 256, 1.0, one(1.0));
    EvalGrid grid(Rect({0.0}, {1.0}), 9);
    std::vector<double> a, b;
    for (std::uint64_t r = 0; r < 200; ++r) {
        std::vector<MeasureGrid> ms{MeasureGrid::build(g, 2.0, 5, r * 256), MeasureGrid::build(g, 2.0, 5, r * 256 + 1)};
        FieldSample fs = synthesize_field(model, grid, ms);
        REQUIRE(fs.d == 2);
        for (std::size_t p = 0; p + 1 < grid.size(); ++p) {
            a.push_back(fs.value(p + 1, 0) - fs.value(p, 0));
            b.push_back(fs.value(p + 1, 1) - fs.value(p, 1));
        }
    }
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += a[i] * b[i];
        saa += a[i] * a[i];
        sbb += b[i] * b[i];
    }
    CHECK(std::abs(sab / std::sqrt(saa * sbb)) < 0.05);
}

TEST_CASE("constant-H field has unit scale at u = 1") {
    const double h = 0.7;
    KernelModel model(HurstSpec::constant({h}), 2.0);
    GridGeometry g = GridGeometry::make(1, 1.0 / 256, 10.0, one(1.0));
    FieldSynthesizer synth(model, g, std::vector<Point>{{1.0}});
    std::vector<double> x;
    for (std::uint64_t r = 0; r < 2000; ++r) x.push_back(synth.apply(MeasureGrid::build(g, 2.0, 3, r))[0]);
    CHECK(variance(x) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("tensor contraction agrees with per-point synthesis") {
    KernelModel model(HurstSpec::constant({0.4, 0.8}), 1.6);
    GridGeometry g = GridGeometry::make(2, 1.0 / 32, 1.0, std::vector<double>{1.0, 1.0});
    EvalGrid grid(Rect({0.0, 0.0}, {1.0, 1.0}), std::vector<int>{3, 5});
    std::vector<Point> pts;
    for (std::size_t p = 0; p < grid.size(); ++p) pts.push_back(grid.point(p));
    FieldSynthesizer tensor(model, g, grid);
    FieldSynthesizer points(model, g, pts);
    REQUIRE(tensor.separable());
    REQUIRE_FALSE(points.separable());
    MeasureGrid m = MeasureGrid::build(g, 1.6, 11, 0);
    std::vector<double> a = tensor.apply(m), b = points.apply(m);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-11));
}

TEST_CASE("multifractional field with coupled exponents goes through the per-point path") {
    HurstSpec spec = HurstSpec::affine({0.5, 0.6}, {0.1, 0.05, -0.05, 0.1}, Rect::cube(2, 0.0, 1.0));
    KernelModel model(spec, 2.0);
    GridGeometry g = GridGeometry::make(2, 1.0 / 16, 1.0, std::vector<double>{1.0, 1.0});
    EvalGrid grid(Rect::cube(2, 0.0, 1.0), 4);
    FieldSynthesizer synth(model, g, grid);
    CHECK_FALSE(synth.separable());
    std::vector<MeasureGrid> ms{MeasureGrid::build(g, 2.0, 1, 0)};
    FieldSample a = synthesize_field(model, grid, ms), b = synthesize_field(model, grid, ms);
    CHECK(a.values == b.values);
    for (double v : a.values) CHECK(std::isfinite(v));
}

TEST_CASE("synthesis rejects points outside the lattice") {
    KernelModel model(HurstSpec::constant({0.5}), 2.0);
    GridGeometry g = GridGeometry::make(1, 0.1, 1.0, one(1.0));
    CHECK_THROWS_AS(FieldSynthesizer(model, g, std::vector<Point>{{2.0}}), Error);
    CHECK_THROWS_AS(FieldSynthesizer(model, g, std::vector<Point>{{0.0}}), Error);
    FieldSynthesizer ok(model, g, std::vector<Point>{{0.5}});
    CHECK_THROWS_AS(ok.apply(MeasureGrid::build(g, 1.5, 1, 0)), Error);
}

TEST_CASE("seed-coupled refinement converges") {
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(v.size() / 2), v.end());
        return v[v.size() / 2];
    };
    for (double alpha : {2.0, 1.5}) {
        KernelModel model(HurstSpec::constant({0.75}), alpha);
        GridGeometry fine = GridGeometry::make(1, 1.0 / 1024, 4.0, one(1.0), kDefaultMaxCells, 8);
        const std::vector<Point> u{{0.3}, {0.71}};
        std::vector<double> d1, d2, d3;
        for (std::uint64_t seed = 0; seed < 40; ++seed) {
            MeasureGrid m0 = MeasureGrid::build(fine, alpha, seed, 0);
            MeasureGrid m1 = m0.coarsen(), m2 = m1.coarsen(), m3 = m2.coarsen();
            auto eval = [&](const MeasureGrid& m) { return FieldSynthesizer(model, m.geometry(), u).apply(m); };
            std::vector<double> x0 = eval(m0), x1 = eval(m1), x2 = eval(m2), x3 = eval(m3);
            for (std::size_t p = 0; p < u.size(); ++p) {
                d1.push_back(std::abs(x3[p] - x2[p]));
                d2.push_back(std::abs(x2[p] - x1[p]));
                d3.push_back(std::abs(x1[p] - x0[p]));
            }
        }
        // Stable sums are heavy tailed, so the typical size is the median; the trend is the
        // least-squares slope of its logarithm over the three levels.
        const double m1 = median(d1), m2 = median(d2), m3 = median(d3);
        INFO("alpha ", alpha, " medians ", m1, " ", m2, " ", m3);
        CHECK(std::log(m3) - std::log(m1) < 0.0);
        CHECK(m3 < 0.75 * m1);
    }
}

TEST_CASE("increments along an axis are stationary for constant H") {
    KernelModel model(HurstSpec::constant({0.7}), 1.5);
    GridGeometry g = GridGeometry::make(1, 1.0 / 256, 10.0, one(1.0));
    FieldSynthesizer synth(model, g, std::vector<Point>{{0.25}, {0.375}, {0.75}, {0.875}});
    std::vector<double> left, right;
    for (std::uint64_t r = 0; r < 800; ++r) {
        std::vector<double> x = synth.apply(MeasureGrid::build(g, 1.5, 21, r));
        if (r % 2 == 0)
            left.push_back(x[1] - x[0]);
        else
            right.push_back(x[3] - x[2]);
    }
    const double n = double(left.size());
    // Critical value at p = 0.01.
    CHECK(ks_statistic(left, right) < 1.628 * std::sqrt(2.0 / n));
}

TEST_CASE("decomposition partitions [0, u] and reproduces the restricted field") {
    SUBCASE("one axis has no doubly-beyond cells") {
        KernelModel model(HurstSpec::constant({0.6}), 1.7);
        GridGeometry g = GridGeometry::make(1, 1.0 / 64, 1.0, one(1.0));
        Decomposition d = decompose_components(model, {0.8}, MeasureGrid::build(g, 1.7, 2, 0), 0.3);
        CHECK(d.y2 == 0.0);
        CHECK(d.cells_y2 == 0);
        CHECK(d.cells_total == d.cells_y1 + d.cells_z[0]);
    }
    SUBCASE("cell counts for u = (1, 1), eps = 0.5") {
        KernelModel model(HurstSpec::constant({0.5, 0.7}), 2.0);
        const double s = 1.0 / 16;
        GridGeometry g = GridGeometry::make(2, s, 1.0, std::vector<double>{1.0, 1.0});
        Decomposition d = decompose_components(model, {1.0, 1.0}, MeasureGrid::build(g, 2.0, 2, 0), 0.5);
        CHECK(d.cells_total == 256);
        CHECK(d.cells_y1 == 64);
        CHECK(d.cells_z[0] == 64);
        CHECK(d.cells_z[1] == 64);
        CHECK(d.cells_y2 == 64);
    }
    SUBCASE("reconstruction on random seeds") {
        KernelModel model(HurstSpec::constant({0.45, 0.8}), 1.3);
        GridGeometry g = GridGeometry::make(2, 1.0 / 64, 1.0, std::vector<double>{1.0, 1.0});
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Decomposition d = decompose_components(model, {0.9, 0.55}, MeasureGrid::build(g, 1.3, seed, 0), 0.2);
            CHECK(d.reconstruction_error() <= 1e-9 * std::abs(d.y));
        }
    }
    SUBCASE("Brownian case: restricted part equals the field") {
        KernelModel model(HurstSpec::constant({0.5}), 2.0);
        GridGeometry g = GridGeometry::make(1, 1.0 / 128, 1.0, one(1.0));
        MeasureGrid m = MeasureGrid::build(g, 2.0, 8, 0);
        const double x = FieldSynthesizer(model, g, std::vector<Point>{{0.61}}).apply(m)[0];
        Decomposition d = decompose_components(model, {0.61}, m, 0.25);
        CHECK(d.y == doctest::Approx(x).epsilon(1e-12));
    }
    SUBCASE("epsilon must stay below u") {
        KernelModel model(HurstSpec::constant({0.5}), 2.0);
        GridGeometry g = GridGeometry::make(1, 1.0 / 128, 1.0, one(1.0));
        CHECK_THROWS_AS(decompose_components(model, {0.3}, MeasureGrid::build(g, 2.0, 1, 0), 0.4), Error);
    }
}

TEST_CASE("norm chain over the component domains") {
    QuadratureSpec q;
    q.target_rel_err = 1e-6;
    SUBCASE("single point holds with strict slack") {
        KernelModel model(HurstSpec::constant({0.5, 0.7}), 1.5);
        NormChainReport r = component_norm_inequality_check(model, {{1.0, 1.0}}, {1.0}, 0.5, q);
        CHECK(r.holds);
        CHECK(r.x_alpha == doctest::Approx(1.0).epsilon(1e-5));
        CHECK(r.x_alpha > r.y_alpha + 1e-3);
        CHECK(r.y_alpha > r.z_sum + 1e-3);
    }
    SUBCASE("zero coefficients") {
        KernelModel model(HurstSpec::constant({0.5, 0.7}), 1.5);
        NormChainReport r = component_norm_inequality_check(model, {{1.0, 1.0}, {0.5, 0.5}}, {0.0, 0.0}, 0.25, q);
        CHECK(r.holds);
        CHECK(r.x_alpha == 0.0);
        CHECK(r.z_sum == 0.0);
    }
    SUBCASE("increments of nearby points") {
        KernelModel model(HurstSpec::constant({0.6, 0.8}), 1.8);
        RngStream rng(31, 0);
        for (int t = 0; t < 3; ++t) {
            std::vector<Point> pts(2, Point(2));
            for (auto& p : pts)
                for (double& v : p) v = 0.5 + 0.1 * rng.uniform();
            NormChainReport r = component_norm_inequality_check(model, pts, {1.0, -1.0}, 0.25, q);
            CHECK(r.holds);
        }
    }
    CHECK_THROWS_AS(component_norm_inequality_check(KernelModel(HurstSpec::constant({0.5}), 2.0),
                                                    std::vector<Point>(7, Point{0.5}), std::vector<double>(7, 1.0),
                                                    0.1, q),
                    Error);
}
