#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "lmss/existence.hpp"
#include "lmss/field.hpp"
#include "lmss/lemmas.hpp"
#include "lmss/local_time.hpp"
#include "lmss/parallel.hpp"
#include "lmss/quadrature.hpp"
#include "lmss/runner.hpp"
#include "lmss/stable.hpp"

using namespace lmss;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome(int threads)> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome gamma_integral_grid(int) {
    double worst = 0.0;
    int points = 0;
    for (double a : {0.7, 1.0, 2.0})
        for (double b : {0.0, 1.0, 2.0})
            for (double A : {0.5, 1.0, 3.0}) {
                const double q = gamma_integral_quadrature(a, b, A).value;
                const double c = gamma_integral_closed_form(a, b, A);
                worst = std::max(worst, std::abs(q - c) / c);
                ++points;
            }
    return {points == 27 && worst <= 1e-6, fmt("%d points, max rel err %.2e <= 1e-6", points, worst)};
}

Outcome stable_cf(int threads) {
    const double alphas[] = {0.7, 1.0, 1.5, 2.0};
    std::vector<double> worst(4);
    parallel_for(4, threads, [&](std::size_t i) {
        RngStream rng(20240, i);
        std::vector<double> x = sample_sas({alphas[i], 1.0}, 100000, rng);
        for (double t : {0.5, 1.0, 2.0})
            worst[i] = std::max(worst[i], std::abs(empirical_cf(x, t) - std::exp(-std::pow(t, alphas[i]))));
    });
    const double w = *std::max_element(worst.begin(), worst.end());
    return {w <= 0.02, fmt("max |phi_n - exp(-|t|^a)| = %.4f <= 0.02 over 4 alphas x 3 t, 1e5 samples", w)};
}

Outcome existence_classification(int) {
    struct Case {
        double k;
        int d;
        Verdict expect;
    };
    const Case cases[] = {{0.5, 2, Verdict::c2}, {0.5, 1, Verdict::c1}, {1.0, 2, Verdict::fail}, {1.0, 1, Verdict::c1}};
    int ok = 0;
    std::string got;
    for (const Case& c : cases) {
        const HurstSpec spec = example_hurst(2, 0.0, c.k, c.k == 1.0 ? std::optional<double>(0.49) : std::nullopt);
        const ExistenceReport r = condition_c_check(spec, *spec.domain(), c.d);
        ok += r.verdict == c.expect && r.exists == (c.expect != Verdict::fail);
        got += fmt(" k=%g,d=%d:%s", c.k, c.d, verdict_name(r.verdict));
    }
    return {ok == 4, fmt("%d/4 exact;", ok) + got};
}

Outcome lemma3_asymptotics(int) {
    std::vector<double> deep, wide;
    for (int k = 0; k <= 6; ++k) deep.push_back(1e-4 * std::pow(10.0, -0.5 * k));
    for (int k = 0; k <= 5; ++k) wide.push_back(1e-1 * std::pow(10.0, -double(k)));
    QuadratureSpec q;
    bool ok = true;
    std::string d;
    for (auto [a, b] : {std::pair{2.0, 1.0}, {1.5, 1.0}, {2.0, 2.0}}) {
        AsymptoticCheck r = verify_int_equiv(a, b, 0.0, 1.0, 0.0, deep, q);
        const double rel = std::abs(r.fitted_slope - r.theory_slope) / std::abs(r.theory_slope);
        ok = ok && r.regime == Regime::supercritical && rel <= 0.02;
        d += fmt("super(%g,%g) slope %.4f vs %.4f; ", a, b, r.fitted_slope, r.theory_slope);
    }
    AsymptoticCheck sub = verify_int_equiv(2.0, 0.25, 0.0, 1.0, 0.0, wide, q);
    const double spread = sub.ratio_max / sub.ratio_min;
    ok = ok && sub.regime == Regime::subcritical && spread < 2.0;
    d += fmt("sub(2,0.25) max/min %.3f; ", spread);
    for (auto [a, b, t0] : {std::tuple{1.0, 1.0, 0.0}, {2.0, 0.5, 0.4}}) {
        AsymptoticCheck r = verify_int_equiv(a, b, 0.0, 1.0, t0, wide, q);
        ok = ok && r.regime == Regime::critical && r.ratio_min >= 0.5 && r.ratio_max <= 2.0;
        d += fmt("crit(%g,%g) ratio in [%.4f, %.4f]; ", a, b, r.ratio_min, r.ratio_max);
    }
    return {ok, d + "A over >= 3 decades"};
}

// Standardized Brownian paths: the alpha = 2 field has Var X(t) = 2t.
Outcome brownian_local_time(int threads) {
    const int points = 512, replicates = 1000;
    const KernelModel model(HurstSpec::constant({0.5}), 2.0);
    const double s = 0.5 / points;
    const GridGeometry g = GridGeometry::make(1, s, s, std::vector<double>{1.0});
    const EvalGrid grid(Rect({0.0}, {1.0}), points);
    const FieldSynthesizer synth(model, g, grid);
    std::vector<double> est(replicates), raw(replicates);
    parallel_for(replicates, threads, [&](std::size_t r) {
        FieldSample fs;
        fs.grid = grid;
        fs.values = synth.apply(MeasureGrid::build(g, 2.0, 5, replicate_stream(r, 0)));
        raw[r] = local_time_estimate(occupation_histogram(fs, grid.rect, {0.0}, 64), {0.0});
        for (double& v : fs.values) v /= std::numbers::sqrt2;
        est[r] = local_time_estimate(occupation_histogram(fs, grid.rect, {0.0}, 64), {0.0});
    });
    double m = 0.0, m_raw = 0.0;
    for (int r = 0; r < replicates; ++r) {
        m += est[r] / replicates;
        m_raw += raw[r] / replicates;
    }
    const double oracle = std::sqrt(2.0 / std::numbers::pi);
    const double rel = std::abs(m - oracle) / oracle;
    return {rel <= 0.1, fmt("mean L(0,[0,1]) of X/sqrt2 = %.4f vs %.4f (rel %.3f <= 0.1), %d replicates; "
                            "unscaled %.4f vs 1/sqrt(pi) = %.4f",
                            m, oracle, rel, replicates, m_raw, 1.0 / std::sqrt(std::numbers::pi))};
}

Outcome moment_scaling(int threads) {
    ProbeConfig bm;
    bm.spec = HurstSpec::constant({0.5});
    bm.scales = {0.5, 0.25, 0.125, 0.0625, 0.03125};
    bm.anchor = {0.0};
    bm.replicates = 256;
    bm.points_per_axis = 128;
    bm.truncation_L = 1e-3;
    bm.seed = 2;
    bm.threads = threads;
    const ScalingReport r1 = moment_scaling_probe(bm);

    ProbeConfig sheet;
    sheet.spec = HurstSpec::constant({0.5, 0.5});
    sheet.scales = {0.25, 0.125, 0.0625, 0.03125};
    sheet.anchor = {0.5, 0.5};
    sheet.replicates = 128;
    sheet.spacing = 1.0 / 1024;
    sheet.truncation_L = 1e-3;
    sheet.points_per_axis = 64;
    sheet.seed = 3;
    sheet.threads = threads;
    const ScalingReport r2 = moment_scaling_probe(sheet);
    const bool ok = std::abs(r1.fitted_slope - 0.5) <= 0.1 && r2.fitted_slope >= r2.theory_exponent - 0.15;
    return {ok, fmt("Brownian slope %.3f +- %.3f (0.5 +- 0.1); sheet slope %.3f +- %.3f >= %.2f",
                    r1.fitted_slope, r1.slope_stderr, r2.fitted_slope, r2.slope_stderr, r2.theory_exponent - 0.15)};
}

Outcome decomposition_identity(int threads) {
    const KernelModel model(HurstSpec::constant({0.45, 0.8}), 1.3);
    const GridGeometry g = GridGeometry::make(2, 1.0 / 64, 1.0, std::vector<double>{1.0, 1.0});
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Decomposition d = decompose_components(model, {0.9, 0.55}, MeasureGrid::build(g, 1.3, seed, 0), 0.2);
        worst = std::max(worst, d.reconstruction_error() / std::abs(d.y));
    }

    QuadratureSpec q;
    q.target_rel_err = 1e-6;
    const int trials = 50;
    std::vector<int> held(trials);
    parallel_for(trials, threads, [&](std::size_t t) {
        RngStream rng(700, t);
        const double alpha = 0.8 + 1.2 * rng.uniform();
        const KernelModel m(HurstSpec::constant({0.3 + 0.6 * rng.uniform(), 0.3 + 0.6 * rng.uniform()}), alpha, q);
        const std::size_t n = 1 + t % 2;
        const double eps = 0.1 + 0.3 * rng.uniform();
        std::vector<Point> pts(n, Point(2));
        std::vector<double> coeffs(n);
        for (std::size_t j = 0; j < n; ++j) {
            for (double& v : pts[j]) v = eps + 0.05 + (1.0 - eps - 0.05) * rng.uniform();
            coeffs[j] = rng.normal();
        }
        held[t] = component_norm_inequality_check(m, pts, coeffs, eps, q).holds;
    });
    int ok = 0;
    for (int h : held) ok += h;
    return {worst <= 1e-9 && ok == trials,
            fmt("max relative reconstruction error %.2e <= 1e-9 on 20 seeds; norm chain %d/%d", worst, ok, trials)};
}

Outcome exp_bound(int threads) {
    RngStream sanity_rng(1, 0);
    double one[1] = {1.0}, zero[1] = {0.0};
    const ExpBoundReport s = mc_exp_integral_bound_check(one, zero, 2.0, 1000, sanity_rng);
    const double rp = std::sqrt(std::numbers::pi);
    const bool sanity = std::abs(s.lhs_estimate - rp) <= 1e-12 && std::abs(s.rhs_bound - rp) <= 1e-12;

    bool all = sanity;
    std::string d = fmt("n=1 sanity %.12f = %.12f; ", s.lhs_estimate, s.rhs_bound);
    for (std::size_t n = 1; n <= 3; ++n) {
        std::vector<int> ok(100), ok_subset(100);
        std::vector<double> slack(100);
        parallel_for(100, threads, [&](std::size_t t) {
            RngStream rng(1000 + t, n);
            const double alpha = std::array{1.0, 1.5, 2.0}[t % 3];
            std::vector<double> m(n * n, 0.0), b(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i; j < n; ++j)
                    m[i * n + j] = i == j ? (0.5 + 1.5 * rng.uniform()) * (rng.uniform() < 0.5 ? -1.0 : 1.0)
                                          : rng.normal();
            for (double& x : b) x = 2.0 * rng.uniform();
            const ExpBoundReport r = mc_exp_integral_bound_check(m, b, alpha, 20000, rng);
            ok[t] = r.satisfied;
            ok_subset[t] = r.satisfied_subset;
            slack[t] = r.slack();
        });
        int k = 0, ks = 0;
        for (std::size_t t = 0; t < 100; ++t) {
            k += ok[t];
            ks += ok_subset[t];
        }
        all = all && k == 100;
        d += fmt("n=%zu %d/100 (max lhs/rhs %.3f, subset constant %d/100); ", n, k,
                 *std::max_element(slack.begin(), slack.end()), ks);
    }
    return {all, d + "b_i ~ U(0,2)"};
}

Outcome increment_scan(int) {
    const KernelModel model(HurstSpec::constant({0.5}), 2.0);
    RngStream rng(9, 0);
    const IncrementScan s = increment_ratio_scan(model, Rect({0.05}, {1.0}), 200, {}, rng);
    const double dev = std::max(std::abs(s.max_ratio - 1.0), std::abs(s.min_ratio - 1.0));

    const fs::path dir = fs::temp_directory_path() / ("lmss_accept_cal_" + std::to_string(::getpid()));
    RunOptions opt;
    opt.output_dir = dir.string();
    const RunOutcome run_out = run(R"({"command": "calibrate-constants", "seed": 0})", opt);
    if (run_out.exit_code != 0) return {false, "calibrate-constants failed: " + run_out.message};
    const json now = json::parse(slurp(dir / "golden_constants.json"));
    const json gold = json::parse(slurp(fs::path(LMSS_SOURCE_DIR) / "data" / "golden_constants.json"));
    fs::remove_all(dir);
    bool locked = now["envelopes"].size() == gold["envelopes"].size();
    std::string env;
    for (std::size_t i = 0; locked && i < gold["envelopes"].size(); ++i) {
        const json &a = now["envelopes"][i], &b = gold["envelopes"][i];
        for (const char* key : {"min_ratio", "max_ratio"}) {
            const double x = a[key], y = b[key];
            locked = locked && std::isfinite(x) && x > 0.0 && std::abs(x - y) <= 1e-9 * std::abs(y);
        }
        env += fmt(" %s [%.4f, %.4f]", b["name"].get<std::string>().c_str(), a["min_ratio"].get<double>(),
                   a["max_ratio"].get<double>());
    }
    return {dev <= 1e-3 && locked,
            fmt("Brownian |ratio - 1| <= %.2e (<= 1e-3) over %zu pairs; golden envelopes %s:", dev, s.pairs.size(),
                locked ? "match" : "DIFFER") +
                env};
}

Outcome determinism(int threads) {
    const fs::path configs = fs::path(LMSS_SOURCE_DIR) / "tests" / "configs";
    const fs::path base = fs::temp_directory_path() / ("lmss_accept_det_" + std::to_string(::getpid()));
    std::set<std::string> seen;
    int files = 0, same = 0;
    std::string bad;
    std::vector<fs::path> paths;
    for (const auto& e : fs::directory_iterator(configs)) paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());
    for (const fs::path& cfg : paths) {
        const std::string text = slurp(cfg);
        const std::string name = cfg.stem().string();
        RunOptions a, b;
        a.output_dir = (base / name / "a").string();
        b.output_dir = (base / name / "b").string();
        b.threads = std::max(threads, 2);
        if (name.starts_with("bad_")) continue;
        const RunOutcome ra = run(text, a);
        if (ra.exit_code != 0) return {false, name + ": first run failed: " + ra.message};
        const RunOutcome rb = run(text, b);
        if (rb.exit_code != 0) return {false, name + ": second run failed: " + rb.message};
        seen.insert(json::parse(text)["command"].get<std::string>());
        for (const auto& f : fs::directory_iterator(*a.output_dir)) {
            if (f.path().filename() == "manifest.json") continue;
            ++files;
            if (slurp(f.path()) == slurp(fs::path(*b.output_dir) / f.path().filename()))
                ++same;
            else
                bad += " " + name + "/" + f.path().filename().string();
        }
    }
    fs::remove_all(base);
    const bool every = seen.size() == command_names().size();
    return {every && files > 0 && same == files,
            fmt("%zu/%zu subcommands, %d/%d data files byte-identical (threads 1 vs %d)", seen.size(),
                command_names().size(), same, files, std::max(threads, 2)) +
                bad};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<int> only, expect_fail;
    int threads = int(std::max(1u, std::thread::hardware_concurrency()));
    app.add_option("--only", only, "criterion ids to run");
    app.add_option("--expect-fail", expect_fail, "criterion ids documented as failing");
    app.add_option("--threads", threads)->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {1, "closed-form gamma integral", 5, gamma_integral_grid},
        {2, "stable sampler characteristic function", 30, stable_cf},
        {3, "existence classification of the worked example", 10, existence_classification},
        {4, "integral asymptotics", 10, lemma3_asymptotics},
        {5, "Brownian local time", 300, brownian_local_time},
        {6, "moment scaling", 900, moment_scaling},
        {7, "decomposition identity and norm chain", 120, decomposition_identity},
        {8, "triangular exp-integral bound", 120, exp_bound},
        {9, "increment-bound scan", 300, increment_scan},
        {10, "determinism of every subcommand", 600, determinism},
    };
    const std::set<int> selected(only.begin(), only.end()), expected(expect_fail.begin(), expect_fail.end());
    int unexpected = 0;
    for (const Criterion& c : all) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run(threads);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool pass = o.passed && secs < c.limit_s;
        std::printf("%s %2d  %s: %s [%.1f s, limit %.0f s]%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs, c.limit_s, !pass && expected.count(c.id) ? " (known failure)" : "");
        std::fflush(stdout);
        unexpected += pass == bool(expected.count(c.id));
    }
    return unexpected == 0 ? 0 : 1;
}
