#include "lmss/runner.hpp"

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>

#include "lmss/existence.hpp"
#include "lmss/field.hpp"
#include "lmss/lemmas.hpp"
#include "lmss/local_time.hpp"
#include "lmss/parallel.hpp"

namespace lmss {

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::invalid_argument:
        case ErrorKind::schema: return exit_schema;
        case ErrorKind::numeric:
        case ErrorKind::domain: return exit_numeric;
        case ErrorKind::budget: return exit_budget;
        case ErrorKind::io: return exit_io;
    }
    return exit_internal;
}

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"simulate",      "localtime",     "check-existence",
                                                "verify-lemmas", "scan-increments", "scaling-probe",
                                                "calibrate-constants"};
    return names;
}

namespace {

namespace fs = std::filesystem;

struct Context {
    std::string command;
    std::uint64_t seed = 0;
    int threads = 1;
    std::uint64_t max_cells = kDefaultMaxCells;
    std::string cache_dir;
    std::vector<std::pair<std::string, std::string>> outputs;
    json summary = json::object();

    void charge(double count, const std::string& what) const {
        if (count > double(max_cells))
            fail(ErrorKind::budget, what + " (" + format_double(count) + ") exceed max_cells = " +
                                        std::to_string(max_cells));
    }
    void emit(std::string name, std::string content) { outputs.emplace_back(std::move(name), std::move(content)); }
    void emit_json(std::string name, const json& j) { emit(std::move(name), j.dump(2) + "\n"); }
};

std::string csv_line(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) s += ',';
        s += cells[i];
    }
    s += '\n';
    return s;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t derived_seed(std::uint64_t seed, const std::string& section, std::size_t index) {
    return fnv1a64(std::to_string(seed) + ":" + section + ":" + std::to_string(index));
}

json rect_json(const Rect& r) { return {{"lower", r.lower}, {"upper", r.upper}}; }

json quad_json(const QuadratureSpec& q) {
    return {{"truncation_L", q.truncation_L},
            {"panels_per_axis", q.panels_per_axis},
            {"singularity_split", q.singularity_split},
            {"target_rel_err", q.target_rel_err}};
}

void write_atomic(const fs::path& path, const std::string& content) {
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::io, "cannot open " + tmp.string() + " for writing");
        out.write(content.data(), std::streamsize(content.size()));
        out.flush();
        if (!out) fail(ErrorKind::io, "write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        fail(ErrorKind::io, "cannot move output into place: " + path.string());
    }
}

Rect domain_or(Fields& f, const HurstSpec& spec, const std::string& key) {
    if (f.has(key)) return rect_from_json(f.require_key(key), f.path(key));
    if (spec.domain()) return *spec.domain();
    schema_error(f.path(key) + ": required when the spec has no domain");
}

void check_rect_for(const Rect& rect, const HurstSpec& spec, const std::string& where) {
    if (rect.dim() != spec.dim()) schema_error(where + ": dimension does not match the spec");
    for (double lo : rect.lower)
        if (lo < 0.0) schema_error(where + ": must lie in the nonnegative orthant");
}

// ---------------------------------------------------------------- simulate / localtime

struct SimSetup {
    std::unique_ptr<KernelModel> model;
    GridGeometry geom;
    EvalGrid grid;
    double alpha = 2.0;
    std::size_t d = 1;
    int replicates = 1;
    double truncation_L = 1.0;
    QuadratureSpec quad;
};

SimSetup parse_simulation(Context& ctx, Fields& f) {
    SimSetup s;
    HurstSpec spec = spec_from_json(f.require_key("spec"), "spec");
    s.alpha = alpha_of(f);
    const std::int64_t d = f.integer("d", 1);
    if (d < 1 || d > 255) schema_error("d: must lie in 1..255");
    s.d = std::size_t(d);
    Fields g = f.object("grid");
    Rect rect = rect_from_json(g.require_key("rect"), "grid.rect");
    check_rect_for(rect, spec, "grid.rect");
    const std::size_t N = rect.dim();
    std::vector<int> counts;
    const json& pts = g.require_key("points");
    if (pts.is_number_integer()) {
        counts.assign(N, pts.get<int>());
    } else {
        for (double v : numbers_of(pts, "grid.points")) counts.push_back(int(v));
        if (counts.size() != N) schema_error("grid.points: need one count per axis");
    }
    for (int c : counts)
        if (c < 1) schema_error("grid.points: counts must be >= 1");
    g.finish();
    for (std::size_t l = 0; l < N; ++l)
        if (!(rect.upper[l] > rect.lower[l])) schema_error("grid.rect: every edge must have positive length");

    s.replicates = int(f.integer("replicates", 1));
    if (s.replicates < 1) schema_error("replicates: must be >= 1");
    s.truncation_L = f.number("truncation_L", 1.0);
    if (!(s.truncation_L > 0.0)) schema_error("truncation_L: must be positive");
    double spacing = f.number("spacing", 0.0);
    if (spacing < 0.0) schema_error("spacing: must be nonnegative");
    if (spacing == 0.0) {
        spacing = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < N; ++l)
            spacing = std::min(spacing, (rect.upper[l] - rect.lower[l]) / (2.0 * counts[l]));
    }
    s.quad = quad_from_json(f.get("quad"));

    s.grid = EvalGrid(rect, counts);
    ctx.charge(double(s.grid.size()) * s.replicates * double(s.d), "field values");
    s.geom = GridGeometry::make(N, spacing, s.truncation_L, rect.upper, ctx.max_cells);
    s.model = std::make_unique<KernelModel>(std::move(spec), s.alpha, s.quad);
    return s;
}

std::vector<FieldSample> synthesize_replicates(const Context& ctx, const SimSetup& s) {
    FieldSynthesizer synth(*s.model, s.geom, s.grid);
    std::vector<FieldSample> out(std::size_t(s.replicates));
    parallel_for(out.size(), ctx.threads, [&](std::size_t r) {
        FieldSample fs;
        fs.grid = s.grid;
        fs.d = s.d;
        fs.alpha = s.alpha;
        fs.seed = ctx.seed;
        fs.spacing = s.geom.spacing;
        fs.values.assign(s.grid.size() * s.d, 0.0);
        for (std::size_t k = 0; k < s.d; ++k) {
            MeasureGrid m = MeasureGrid::build_cached(s.geom, s.alpha, ctx.seed, replicate_stream(r, k), ctx.cache_dir);
            std::vector<double> v = synth.apply(m);
            for (std::size_t p = 0; p < v.size(); ++p) fs.values[p * s.d + k] = v[p];
        }
        out[r] = std::move(fs);
    });
    return out;
}

json simulation_meta(const Context& ctx, const SimSetup& s) {
    return {{"alpha", s.alpha},
            {"d", s.d},
            {"replicates", s.replicates},
            {"seed", ctx.seed},
            {"grid", {{"rect", rect_json(s.grid.rect)}, {"points", s.grid.counts}}},
            {"lattice",
             {{"spacing", s.geom.spacing},
              {"truncation_L", s.truncation_L},
              {"cells", s.geom.total_cells()},
              {"geometry_hash", hex64(s.geom.hash())}}},
            {"c_norm", s.model->c_norm()},
            {"streams", "replicate * 256 + component"}};
}

void cmd_simulate(Context& ctx, Fields& f) {
    SimSetup s = parse_simulation(ctx, f);
    f.finish();
    std::vector<FieldSample> fields = synthesize_replicates(ctx, s);
    const std::size_t N = s.grid.dim();
    std::vector<std::string> head{"replicate"};
    for (std::size_t l = 0; l < N; ++l) head.push_back("u" + std::to_string(l + 1));
    for (std::size_t k = 0; k < s.d; ++k) head.push_back("x" + std::to_string(k + 1));
    std::string csv = csv_line(head);
    for (std::size_t r = 0; r < fields.size(); ++r)
        for (std::size_t p = 0; p < s.grid.size(); ++p) {
            std::vector<std::string> row{std::to_string(r)};
            for (double u : s.grid.point(p)) row.push_back(format_double(u));
            for (std::size_t k = 0; k < s.d; ++k) row.push_back(format_double(fields[r].value(p, k)));
            csv += csv_line(row);
        }
    json meta = simulation_meta(ctx, s);
    meta["columns"] = head;
    meta["rows"] = fields.size() * s.grid.size();
    ctx.emit("field.csv", std::move(csv));
    ctx.emit_json("field.json", meta);
    ctx.summary = {{"rows", meta["rows"]}, {"lattice_cells", s.geom.total_cells()}};
}

void cmd_localtime(Context& ctx, Fields& f) {
    SimSetup s = parse_simulation(ctx, f);
    std::vector<Point> levels;
    if (const json* lv = f.get("levels")) {
        if (!lv->is_array() || lv->empty()) schema_error("levels: expected a nonempty array");
        for (const json& x : *lv) {
            if (x.is_number())
                levels.push_back({x.get<double>()});
            else
                levels.push_back(numbers_of(x, "levels"));
            if (levels.back().size() != s.d) schema_error("levels: every level needs d components");
        }
    } else {
        levels.push_back(Point(s.d, 0.0));
    }
    Rect window = f.has("window") ? rect_from_json(f.require_key("window"), "window") : s.grid.rect;
    const int half_bins = int(f.integer("half_bins", 64));
    if (half_bins < 1) schema_error("half_bins: must be >= 1");
    std::optional<double> bandwidth;
    if (f.has("bandwidth")) {
        bandwidth = f.number("bandwidth");
        if (!(*bandwidth > 0.0)) schema_error("bandwidth: must be positive");
    }
    const double value_scale = f.number("value_scale", 1.0);
    if (!(value_scale > 0.0)) schema_error("value_scale: must be positive");
    std::optional<double> smoothing;
    if (f.has("smoothing_k")) {
        smoothing = f.number("smoothing_k");
        if (!(*smoothing > 0.0)) schema_error("smoothing_k: must be positive");
    }
    f.finish();
    ctx.charge(std::pow(2.0 * half_bins + 1.0, double(s.d)), "histogram bins");

    std::vector<FieldSample> fields = synthesize_replicates(ctx, s);
    const std::size_t L = levels.size(), R = fields.size();
    std::vector<double> est(R * L), smooth(R * L);
    std::vector<int> flagged(R * L);
    parallel_for(R, ctx.threads, [&](std::size_t r) {
        FieldSample& fs = fields[r];
        if (value_scale != 1.0)
            for (double& v : fs.values) v *= value_scale;
        for (std::size_t i = 0; i < L; ++i) {
            LocalTimeHistogram h = occupation_histogram(fs, window, levels[i], half_bins, bandwidth);
            est[r * L + i] = local_time_estimate(h, levels[i]);
            flagged[r * L + i] = h.overflow_flagged();
            if (smoothing) smooth[r * L + i] = smoothed_local_time(fs, window, levels[i], *smoothing);
        }
    });

    std::vector<std::string> head{"replicate", "level"};
    for (std::size_t k = 0; k < s.d; ++k) head.push_back("x" + std::to_string(k + 1));
    head.push_back("estimate");
    head.push_back("overflow_flagged");
    if (smoothing) head.push_back("smoothed");
    std::string csv = csv_line(head);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t i = 0; i < L; ++i) {
            std::vector<std::string> row{std::to_string(r), std::to_string(i)};
            for (double x : levels[i]) row.push_back(format_double(x));
            row.push_back(format_double(est[r * L + i]));
            row.push_back(std::to_string(flagged[r * L + i]));
            if (smoothing) row.push_back(format_double(smooth[r * L + i]));
            csv += csv_line(row);
        }

    json meta = simulation_meta(ctx, s);
    meta["window"] = rect_json(window);
    meta["half_bins"] = half_bins;
    meta["bandwidth"] = bandwidth ? json(*bandwidth) : json("scott");
    meta["value_scale"] = value_scale;
    if (smoothing) meta["smoothing_k"] = *smoothing;
    meta["columns"] = head;
    json per_level = json::array();
    for (std::size_t i = 0; i < L; ++i) {
        double sum = 0.0, sum2 = 0.0, ssum = 0.0;
        int nflag = 0;
        for (std::size_t r = 0; r < R; ++r) {
            sum += est[r * L + i];
            sum2 += est[r * L + i] * est[r * L + i];
            ssum += smooth[r * L + i];
            nflag += flagged[r * L + i];
        }
        const double mean = sum / double(R);
        const double var = R > 1 ? std::max(0.0, (sum2 - double(R) * mean * mean) / double(R - 1)) : 0.0;
        json e = {{"level", levels[i]},
                  {"mean", mean},
                  {"stderr", std::sqrt(var / double(R))},
                  {"overflow_flagged", nflag}};
        if (smoothing) e["smoothed_mean"] = ssum / double(R);
        per_level.push_back(e);
    }
    meta["levels"] = per_level;
    ctx.emit("localtime.csv", std::move(csv));
    ctx.emit_json("localtime.json", meta);
    ctx.summary = {{"levels", per_level}};
}

// ---------------------------------------------------------------- check-existence

void cmd_check_existence(Context& ctx, Fields& f) {
    const bool has_spec = f.has("spec"), has_example = f.has("example");
    if (has_spec == has_example) schema_error("exactly one of spec or example is required");
    std::optional<HurstSpec> spec;
    json source;
    if (has_spec) {
        spec = spec_from_json(f.require_key("spec"), "spec");
        source = f.require_key("spec");
    } else {
        Fields e = f.object("example");
        const std::int64_t m = e.integer("m");
        const double q = e.number("q", 0.0), k = e.number("k");
        std::optional<double> upper;
        if (e.has("upper")) upper = e.number("upper");
        e.finish();
        try {
            spec = example_hurst(int(m), q, k, upper);
        } catch (const Error& err) {
            if (err.kind() == ErrorKind::invalid_argument) schema_error(std::string("example: ") + err.what());
            throw;
        }
        source = {{"example", {{"m", m}, {"q", q}, {"k", k}, {"upper", spec->domain()->upper[0]}}}};
    }
    const Rect rect = domain_or(f, *spec, "rect");
    check_rect_for(rect, *spec, "rect");
    const std::int64_t d = f.integer("d");
    if (d < 1) schema_error("d: must be a positive integer");
    ExistenceOptions opt;
    if (f.has("options")) {
        Fields o = f.object("options");
        opt.equality_tol = o.number("equality_tol", opt.equality_tol);
        opt.grid_density = int(o.integer("grid_density", opt.grid_density));
        opt.refine_steps = int(o.integer("refine_steps", opt.refine_steps));
        opt.rel_tol = o.number("rel_tol", opt.rel_tol);
        opt.max_shells = int(o.integer("max_shells", opt.max_shells));
        opt.tail_rel_tol = o.number("tail_rel_tol", opt.tail_rel_tol);
        opt.divergence_cap = o.number("divergence_cap", opt.divergence_cap);
        opt.converge_ratio = o.number("converge_ratio", opt.converge_ratio);
        opt.diverge_ratio = o.number("diverge_ratio", opt.diverge_ratio);
        o.finish();
        if (opt.grid_density < 2 || opt.refine_steps < 0 || opt.max_shells < 1 || !(opt.rel_tol > 0.0))
            schema_error("options: grid_density >= 2, refine_steps >= 0, max_shells >= 1, rel_tol > 0 required");
    }
    f.finish();
    ctx.charge(std::pow(double(opt.grid_density), double(rect.dim())), "infimum scan points");

    ExistenceReport r = condition_c_check(*spec, rect, int(d), opt);
    json rep = {{"source", source},
                {"rect", rect_json(rect)},
                {"d", d},
                {"inf_sum_inv_h", r.inf_sum_inv_h},
                {"argmin", r.argmin},
                {"ties", r.ties},
                {"verdict", verdict_name(r.verdict)},
                {"exists", r.exists},
                {"c2_status", c2_status_name(r.c2_status)},
                {"c2_integral", r.c2_integral ? json(*r.c2_integral) : json(nullptr)},
                {"c2_integral_infinite", r.c2_status == C2Status::divergent},
                {"quad_error", r.quad_error},
                {"partial_integrals", r.partial_integrals},
                {"shell_ratios", r.shell_ratios},
                {"reason", r.reason},
                {"options",
                 {{"equality_tol", opt.equality_tol},
                  {"grid_density", opt.grid_density},
                  {"refine_steps", opt.refine_steps},
                  {"rel_tol", opt.rel_tol},
                  {"max_shells", opt.max_shells},
                  {"tail_rel_tol", opt.tail_rel_tol},
                  {"divergence_cap", opt.divergence_cap},
                  {"converge_ratio", opt.converge_ratio},
                  {"diverge_ratio", opt.diverge_ratio}}}};
    std::string csv = csv_line({"refinement", "partial_integral", "shell_ratio"});
    for (std::size_t k = 0; k < r.partial_integrals.size(); ++k) {
        // ratio k-2 compares shell k with shell k-1
        const std::string ratio = k >= 2 && k - 2 < r.shell_ratios.size() ? format_double(r.shell_ratios[k - 2]) : "";
        csv += csv_line({std::to_string(k), format_double(r.partial_integrals[k]), ratio});
    }
    ctx.emit_json("existence.json", rep);
    ctx.emit("existence_shells.csv", std::move(csv));
    ctx.summary = {{"verdict", rep["verdict"]}, {"exists", r.exists}, {"inf_sum_inv_h", r.inf_sum_inv_h},
                   {"c2_integral", rep["c2_integral"]}};
}

// ---------------------------------------------------------------- verify-lemmas

struct LemmaTable {
    std::string csv = csv_line({"check", "case", "passed", "metric", "value"});
    json detail = json::array();
    int total = 0, passed = 0;

    void add(const std::string& check, std::size_t idx, bool ok, const std::string& metric, double value, json info) {
        csv += csv_line({check, std::to_string(idx), ok ? "1" : "0", metric, format_double(value)});
        info["check"] = check;
        info["case"] = idx;
        info["passed"] = ok;
        detail.push_back(std::move(info));
        ++total;
        passed += ok;
    }
};

std::vector<double> decade_list(double hi, double lo, int per_decade) {
    std::vector<double> out;
    const int steps = int(std::lround(std::log10(hi / lo) * per_decade));
    for (int k = 0; k <= steps; ++k) out.push_back(hi * std::pow(10.0, -double(k) / per_decade));
    return out;
}

json default_lemma_suite() {
    json hsp = {{"kind", "constant"}, {"h", {0.6}}};
    json hsp2 = {{"kind", "constant"}, {"h", {0.5, 0.7}}};
    return {{"int_equiv",
             {{{"alpha", 2.0}, {"beta", 1.0}},
              {{"alpha", 1.5}, {"beta", 1.0}},
              {{"alpha", 2.0}, {"beta", 2.0}},
              {{"alpha", 1.0}, {"beta", 1.0}, {"A", decade_list(1e-1, 1e-6, 1)}},
              {{"alpha", 2.0}, {"beta", 0.25}, {"A", decade_list(1e-1, 1e-6, 1)}}}},
            {"triangle", {{"trials", 10000}}},
            {"p_weights",
             {{{"h", {0.5, 0.5}}, {"d", 1}, {"n", 4}},
              {{"h", {0.6}}, {"d", 1}, {"n", 3}},
              {{"h", {0.9, 0.9}}, {"d", 2}, {"n", 10}}}},
            {"bound_sumZ",
             {{{"spec", hsp}, {"alpha", 2.0}, {"n", 1}},
              {{"spec", hsp}, {"alpha", 2.0}, {"n", 2}},
              {{"spec", hsp2}, {"alpha", 1.5}, {"n", 2}, {"sphere_samples", 64}, {"held_out", 20}}}},
            {"exp_bound", {{{"n", 1}}, {{"n", 2}}, {{"n", 3}}}}};
}

void lemma_int_equiv(const json& cases, LemmaTable& t) {
    if (!cases.is_array()) schema_error("int_equiv: expected an array");
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const std::string where = "int_equiv[" + std::to_string(i) + "]";
        Fields c(cases[i], where);
        const double alpha = c.number("alpha"), beta = c.number("beta");
        const double a = c.number("a", 0.0), b = c.number("b", 1.0), t0 = c.number("t0", a);
        std::vector<double> A = c.has("A") ? c.numbers("A") : decade_list(1e-4, 1e-7, 2);
        QuadratureSpec quad = quad_from_json(c.get("quad"), where + ".quad");
        c.finish();
        AsymptoticCheck r;
        try {
            r = verify_int_equiv(alpha, beta, a, b, t0, A, quad);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::invalid_argument) schema_error(where + ": " + e.what());
            throw;
        }
        json info = {{"regime", regime_name(r.regime)}, {"alpha", alpha},        {"beta", beta},
                     {"a", a},                          {"b", b},                {"t0", t0},
                     {"A", r.A_values},                 {"integrals", r.integral_values},
                     {"quad_errors", r.quad_errors},    {"ratios", r.ratios},    {"ratio_min", r.ratio_min},
                     {"ratio_max", r.ratio_max}};
        if (r.regime == Regime::supercritical) {
            info["fitted_slope"] = r.fitted_slope;
            info["theory_slope"] = r.theory_slope;
            info["slope_tolerance"] = r.slope_tolerance;
            t.add("int_equiv", i, r.passed, "fitted_slope", r.fitted_slope, info);
        } else if (r.regime == Regime::critical) {
            t.add("int_equiv", i, r.passed, "ratio_max", r.ratio_max, info);
        } else {
            t.add("int_equiv", i, r.passed, "spread", r.ratio_max / r.ratio_min, info);
        }
    }
}

void lemma_triangle(const json& j, std::uint64_t seed, LemmaTable& t, const Context& ctx) {
    Fields c(j, "triangle");
    const std::int64_t trials = c.integer("trials", 10000);
    const std::int64_t max_len = c.integer("max_len", 8);
    c.finish();
    if (trials < 1 || max_len < 1) schema_error("triangle: trials and max_len must be >= 1");
    ctx.charge(double(trials) * double(max_len), "triangle fuzz values");
    RngStream rng(seed, 0);
    std::int64_t failures = 0;
    double worst = 0.0;
    for (std::int64_t k = 0; k < trials; ++k) {
        const double alpha = 0.05 + 1.95 * rng.uniform();
        std::vector<double> x(1 + std::size_t(rng.uniform() * double(max_len)));
        for (double& v : x) v = rng.normal() * std::exp(3.0 * rng.normal());
        TriangleCheck r = verify_triangle(alpha, x);
        failures += !r.satisfied;
        if (r.rhs > 0.0) worst = std::max(worst, r.lhs / r.rhs);
    }
    t.add("triangle", 0, failures == 0, "failures", double(failures),
          {{"trials", trials}, {"max_len", max_len}, {"max_lhs_over_rhs", worst}});
}

json weights_json(const PWeights& w) {
    return {{"construction", w.construction}, {"terms", w.terms},         {"p", w.p},
            {"sum_inv_p", w.sum_inv_p},       {"max_hq_over_p", w.max_hq_over_p},
            {"delta_lhs", w.delta_lhs},       {"delta_rhs", w.delta_rhs}, {"kappa", w.kappa},
            {"l0", w.l0},                     {"p_at_least_one", w.p_at_least_one},
            {"sum_ok", w.sum_ok},             {"ratio_ok", w.ratio_ok},   {"delta_ok", w.delta_ok},
            {"l0_ok", w.l0_ok},               {"ok", w.ok()}};
}

void lemma_p_weights(const json& cases, LemmaTable& t) {
    if (!cases.is_array()) schema_error("p_weights: expected an array");
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const std::string where = "p_weights[" + std::to_string(i) + "]";
        Fields c(cases[i], where);
        std::vector<double> h = c.numbers("h");
        const std::int64_t d = c.integer("d"), n = c.integer("n");
        c.finish();
        try {
            PWeightsReport r = verify_p_weights(h, int(d), int(n));
            t.add("p_weights", i, r.passed, "sum_inv_p", r.full.sum_inv_p,
                  {{"h", h},
                   {"d", d},
                   {"n", n},
                   {"tau", r.tau},
                   {"delta", r.delta},
                   {"full", weights_json(r.full)},
                   {"truncated", weights_json(r.truncated)}});
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::invalid_argument) schema_error(where + ": " + e.what());
            if (e.kind() != ErrorKind::domain) throw;
            t.add("p_weights", i, false, "sum_inv_p", 0.0,
                  {{"h", h}, {"d", d}, {"n", n}, {"infeasible", e.what()}});
        }
    }
}

void lemma_bound_sumZ(const json& cases, std::uint64_t seed, LemmaTable& t) {
    if (!cases.is_array()) schema_error("bound_sumZ: expected an array");
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const std::string where = "bound_sumZ[" + std::to_string(i) + "]";
        Fields c(cases[i], where);
        HurstSpec spec = spec_from_json(c.require_key("spec"), where + ".spec");
        const double alpha = alpha_of(c);
        SumZConfig cfg;
        cfg.n = int(c.integer("n", cfg.n));
        cfg.axis = std::size_t(c.integer("axis", 0));
        cfg.epsilon = c.number("epsilon", cfg.epsilon);
        cfg.upper = c.number("upper", cfg.upper);
        if (auto b = c.numbers_opt("b")) cfg.b = *b;
        cfg.min_gap = c.number("min_gap", cfg.min_gap);
        cfg.max_gap = c.number("max_gap", cfg.max_gap);
        cfg.calibration = int(c.integer("calibration", cfg.calibration));
        cfg.held_out = int(c.integer("held_out", cfg.held_out));
        cfg.sphere_samples = int(c.integer("sphere_samples", cfg.sphere_samples));
        cfg.calibration_margin = c.number("calibration_margin", cfg.calibration_margin);
        cfg.sigma = c.number("sigma", cfg.sigma);
        cfg.pass_fraction = c.number("pass_fraction", cfg.pass_fraction);
        cfg.quad = quad_from_json(c.get("quad"), where + ".quad");
        c.finish();
        cfg.seed = derived_seed(seed, "bound_sumZ", i);
        SumZReport r;
        try {
            KernelModel model(spec, alpha, cfg.quad);
            r = verify_bound_sumZ(model, cfg);
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::invalid_argument) schema_error(where + ": " + e.what());
            throw;
        }
        json inst = json::array();
        for (const SumZInstance& s : r.instances)
            inst.push_back({{"points", s.points},
                            {"gaps", s.gaps},
                            {"lhs", s.lhs},
                            {"lhs_stderr", s.lhs_stderr},
                            {"rhs_form", s.rhs_form},
                            {"ratio", s.ratio},
                            {"held_out", s.held_out},
                            {"satisfied", s.satisfied}});
        t.add("bound_sumZ", i, r.passed, "held_out_fraction", r.held_out_fraction,
              {{"alpha", alpha},
               {"n", cfg.n},
               {"axis", cfg.axis},
               {"epsilon", cfg.epsilon},
               {"b", cfg.b},
               {"seed", cfg.seed},
               {"c_fit", r.c_fit},
               {"calibration_max_ratio", r.calibration_max_ratio},
               {"calibration_margin", cfg.calibration_margin},
               {"sigma", cfg.sigma},
               {"instances", inst}});
    }
}

void lemma_exp_bound(const json& cases, std::uint64_t seed, LemmaTable& t, const Context& ctx) {
    if (!cases.is_array()) schema_error("exp_bound: expected an array");
    for (std::size_t i = 0; i < cases.size(); ++i) {
        const std::string where = "exp_bound[" + std::to_string(i) + "]";
        Fields c(cases[i], where);
        const std::int64_t n = c.integer("n");
        std::vector<double> alphas = c.has("alphas") ? c.numbers("alphas") : std::vector<double>{1.0, 1.5, 2.0};
        const std::int64_t instances = c.integer("instances", 100);
        const std::int64_t trials = c.integer("trials", 20000);
        const double b_max = c.number("b_max", 2.0);
        c.finish();
        if (n < 1 || n > 4) schema_error(where + ".n: must lie in 1..4");
        if (instances < 1 || trials < 2 || !(b_max >= 0.0)) schema_error(where + ": bad instance settings");
        for (double a : alphas)
            if (!(a > 0.0 && a <= 2.0)) schema_error(where + ".alphas: must lie in (0, 2]");
        ctx.charge(double(instances) * double(trials), "exp_bound Monte Carlo draws");
        const std::size_t N = std::size_t(n);
        int ok = 0, ok_subset = 0;
        double worst = 0.0;
        json failures = json::array();
        for (std::int64_t k = 0; k < instances; ++k) {
            RngStream rng(derived_seed(seed, "exp_bound", i), std::uint64_t(k));
            const double alpha = alphas[std::size_t(k) % alphas.size()];
            std::vector<double> m(N * N, 0.0), b(N);
            for (std::size_t r = 0; r < N; ++r)
                for (std::size_t col = r; col < N; ++col)
                    m[r * N + col] = r == col ? (0.5 + 1.5 * rng.uniform()) * rng.sign() : rng.normal();
            for (double& x : b) x = b_max * rng.uniform();
            ExpBoundReport r = mc_exp_integral_bound_check(m, b, alpha, std::size_t(trials), rng);
            ok += r.satisfied;
            ok_subset += r.satisfied_subset;
            worst = std::max(worst, r.slack());
            if (!r.satisfied)
                failures.push_back({{"instance", k},
                                    {"alpha", alpha},
                                    {"matrix", m},
                                    {"b", b},
                                    {"lhs", r.lhs_estimate},
                                    {"lhs_stderr", r.lhs_stderr},
                                    {"rhs", r.rhs_bound},
                                    {"rhs_subset", r.rhs_subset}});
        }
        t.add("exp_bound", i, ok == instances, "satisfied_fraction", double(ok) / double(instances),
              {{"n", n},
               {"alphas", alphas},
               {"instances", instances},
               {"trials", trials},
               {"b_max", b_max},
               {"satisfied", ok},
               {"satisfied_subset_constant", ok_subset},
               {"max_lhs_over_rhs", worst},
               {"failures", failures}});
    }
}

void cmd_verify_lemmas(Context& ctx, Fields& f) {
    static const char* sections[] = {"int_equiv", "triangle", "p_weights", "bound_sumZ", "exp_bound"};
    json suite = json::object();
    for (const char* s : sections)
        if (const json* v = f.get(s)) suite[s] = *v;
    f.finish();
    if (suite.empty()) suite = default_lemma_suite();
    LemmaTable t;
    if (suite.contains("int_equiv")) lemma_int_equiv(suite["int_equiv"], t);
    if (suite.contains("triangle")) lemma_triangle(suite["triangle"], derived_seed(ctx.seed, "triangle", 0), t, ctx);
    if (suite.contains("p_weights")) lemma_p_weights(suite["p_weights"], t);
    if (suite.contains("bound_sumZ")) lemma_bound_sumZ(suite["bound_sumZ"], ctx.seed, t);
    if (suite.contains("exp_bound")) lemma_exp_bound(suite["exp_bound"], ctx.seed, t, ctx);
    ctx.emit("lemmas.csv", t.csv);
    ctx.emit_json("lemmas.json", {{"checks", t.detail}, {"suite", suite}, {"seed", ctx.seed}});
    ctx.summary = {{"checks", t.total}, {"passed", t.passed}, {"all_passed", t.passed == t.total}};
}

// ---------------------------------------------------------------- scan-increments

void cmd_scan_increments(Context& ctx, Fields& f) {
    HurstSpec spec = spec_from_json(f.require_key("spec"), "spec");
    const double alpha = alpha_of(f);
    const Rect rect = domain_or(f, spec, "rect");
    check_rect_for(rect, spec, "rect");
    const std::int64_t pairs = f.integer("pairs", 200);
    if (pairs < 1) schema_error("pairs: must be >= 1");
    QuadratureSpec quad = quad_from_json(f.get("quad"));
    f.finish();
    ctx.charge(double(pairs), "increment pairs");
    KernelModel model(spec, alpha, quad);
    RngStream rng(ctx.seed, 0);
    IncrementScan scan = increment_ratio_scan(model, rect, int(pairs), quad, rng);
    const std::size_t N = spec.dim();
    std::vector<std::string> head{"pair"};
    for (std::size_t l = 0; l < N; ++l) head.push_back("u" + std::to_string(l + 1));
    for (std::size_t l = 0; l < N; ++l) head.push_back("v" + std::to_string(l + 1));
    for (const char* c : {"norm", "denom", "ratio"}) head.push_back(c);
    std::string csv = csv_line(head);
    for (std::size_t k = 0; k < scan.pairs.size(); ++k) {
        const IncrementPair& p = scan.pairs[k];
        std::vector<std::string> row{std::to_string(k)};
        for (double x : p.u) row.push_back(format_double(x));
        for (double x : p.v) row.push_back(format_double(x));
        for (double x : {p.norm, p.denom, p.ratio}) row.push_back(format_double(x));
        csv += csv_line(row);
    }
    const bool any = !scan.pairs.empty();
    json rep = {{"alpha", alpha},
                {"rect", rect_json(rect)},
                {"pairs", pairs},
                {"evaluated", scan.pairs.size()},
                {"skipped", scan.skipped},
                {"min_ratio", any ? json(scan.min_ratio) : json(nullptr)},
                {"max_ratio", any ? json(scan.max_ratio) : json(nullptr)},
                {"spread", any ? json(scan.max_ratio / scan.min_ratio) : json(nullptr)},
                {"c_norm", model.c_norm()},
                {"quad", quad_json(quad)},
                {"seed", ctx.seed}};
    ctx.emit("increments.csv", std::move(csv));
    ctx.emit_json("increments.json", rep);
    ctx.summary = {{"min_ratio", rep["min_ratio"]}, {"max_ratio", rep["max_ratio"]}, {"spread", rep["spread"]}};
}

// ---------------------------------------------------------------- scaling-probe

void cmd_scaling_probe(Context& ctx, Fields& f) {
    const std::string probe = f.string("probe", "moment");
    if (probe != "moment" && probe != "holder") schema_error("probe: expected moment or holder");
    ProbeConfig cfg;
    cfg.spec = spec_from_json(f.require_key("spec"), "spec");
    cfg.alpha = alpha_of(f);
    const std::int64_t d = f.integer("d", 1);
    if (d < 1 || d > 255) schema_error("d: must lie in 1..255");
    cfg.d = std::size_t(d);
    cfg.moment = int(f.integer("moment", 1));
    cfg.scales = f.numbers("scales");
    cfg.replicates = int(f.integer("replicates", cfg.replicates));
    cfg.anchor = f.numbers("anchor");
    cfg.level = f.numbers_opt("level");
    cfg.spacing = f.number("spacing", cfg.spacing);
    cfg.truncation_L = f.number("truncation_L", cfg.truncation_L);
    cfg.points_per_axis = int(f.integer("points_per_axis", cfg.points_per_axis));
    cfg.half_bins = int(f.integer("half_bins", cfg.half_bins));
    if (f.has("bandwidth")) cfg.bandwidth = f.number("bandwidth");
    cfg.tolerance = f.number("tolerance", cfg.tolerance);
    f.finish();
    cfg.seed = ctx.seed;
    cfg.max_cells = ctx.max_cells;
    cfg.cache_dir = ctx.cache_dir;
    cfg.threads = ctx.threads;
    ctx.charge(std::pow(double(cfg.points_per_axis), double(cfg.anchor.size())) * double(cfg.scales.size()),
               "evaluation points per replicate");

    ScalingReport r;
    try {
        r = probe == "moment" ? moment_scaling_probe(cfg) : holder_scaling_probe(cfg);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::invalid_argument) schema_error(e.what());
        throw;
    }
    std::string csv = csv_line({"scale", "estimate", "stderr"});
    for (std::size_t i = 0; i < r.scales.size(); ++i)
        csv += csv_line({format_double(r.scales[i]), format_double(r.estimates[i]), format_double(r.stderrs[i])});
    json rep = {{"probe", probe},
                {"alpha", cfg.alpha},
                {"d", cfg.d},
                {"moment", cfg.moment},
                {"anchor", cfg.anchor},
                {"level", cfg.level ? json(*cfg.level) : json("field value at the anchor")},
                {"scales", r.scales},
                {"estimates", r.estimates},
                {"stderrs", r.stderrs},
                {"fitted_slope", r.fitted_slope},
                {"slope_stderr", r.slope_stderr},
                {"theory_exponent", r.theory_exponent},
                {"tolerance", r.tolerance},
                {"consistent", r.consistent},
                {"spacing", r.spacing},
                {"replicates", r.replicates},
                {"seed", ctx.seed}};
    if (probe == "holder") {
        rep["replicate_max_ratio"] = r.replicate_max_ratio;
        rep["percentile95"] = r.percentile95;
        rep["bounded"] = r.bounded;
    }
    ctx.emit("scaling.csv", std::move(csv));
    ctx.emit_json("scaling.json", rep);
    ctx.summary = {{"fitted_slope", r.fitted_slope},
                   {"slope_stderr", r.slope_stderr},
                   {"theory_exponent", r.theory_exponent},
                   {"consistent", r.consistent}};
}

// ---------------------------------------------------------------- calibrate-constants

json default_envelopes() {
    return {{{"name", "brownian"},
             {"spec", {{"kind", "constant"}, {"h", {0.5}}}},
             {"alpha", 2.0},
             {"rect", {{"lower", {0.05}}, {"upper", {1.0}}}},
             {"pairs", 200}},
            {{"name", "power_law_example"},
             {"spec", {{"kind", "power_law"}, {"m", 2}, {"q", 0.0}, {"k", 0.5}}},
             {"alpha", 1.5},
             {"pairs", 200}}};
}

void cmd_calibrate_constants(Context& ctx, Fields& f) {
    std::vector<double> alphas = f.has("alphas") ? f.numbers("alphas") : std::vector<double>{0.7, 1.0, 1.5, 2.0};
    std::vector<double> hs = f.has("hs") ? f.numbers("hs") : std::vector<double>{0.3, 0.5, 0.75};
    const double rel_tol = f.number("rel_tol", 1e-10);
    json envelopes = f.has("envelopes") ? f.require_key("envelopes") : default_envelopes();
    QuadratureSpec quad = quad_from_json(f.get("quad"));
    f.finish();
    if (!(rel_tol > 0.0 && rel_tol < 1e-2)) schema_error("rel_tol: must lie in (0, 1e-2)");
    for (double a : alphas)
        if (!(a > 0.0 && a <= 2.0)) schema_error("alphas: must lie in (0, 2]");
    for (double h : hs)
        if (!(h > 0.0 && h < 1.0)) schema_error("hs: must lie in (0, 1)");
    if (!envelopes.is_array()) schema_error("envelopes: expected an array");

    json norms = json::array();
    double worst_rel = 0.0;
    for (double a : alphas)
        for (double h : hs) {
            const double v = kernel_norm_1d(h, a, rel_tol);
            const double tight = kernel_norm_1d(h, a, rel_tol * 1e-2);
            const double rel_err = std::abs(v - tight) / tight;
            if (!(rel_err < 1e-6)) fail(ErrorKind::numeric, "kernel norm did not converge");
            worst_rel = std::max(worst_rel, rel_err);
            norms.push_back({{"alpha", a},
                             {"h", h},
                             {"norm_alpha_power", tight},
                             {"c_H", std::pow(tight, -1.0 / a)},
                             {"rel_err", rel_err}});
        }

    json env = json::array();
    for (std::size_t i = 0; i < envelopes.size(); ++i) {
        const std::string where = "envelopes[" + std::to_string(i) + "]";
        Fields e(envelopes[i], where);
        const std::string name = e.string("name", "envelope" + std::to_string(i));
        HurstSpec spec = spec_from_json(e.require_key("spec"), where + ".spec");
        const double alpha = alpha_of(e);
        const Rect rect = domain_or(e, spec, "rect");
        check_rect_for(rect, spec, where + ".rect");
        const std::int64_t pairs = e.integer("pairs", 200);
        QuadratureSpec q = quad_from_json(e.get("quad"), where + ".quad");
        e.finish();
        if (pairs < 1) schema_error(where + ".pairs: must be >= 1");
        ctx.charge(double(pairs), "increment pairs");
        KernelModel model(spec, alpha, q);
        RngStream rng(ctx.seed, i);
        IncrementScan scan = increment_ratio_scan(model, rect, int(pairs), q, rng);
        if (scan.pairs.empty()) fail(ErrorKind::numeric, where + ": no pair with a positive denominator");
        env.push_back({{"name", name},
                       {"alpha", alpha},
                       {"rect", rect_json(rect)},
                       {"pairs", pairs},
                       {"stream", i},
                       {"min_ratio", scan.min_ratio},
                       {"max_ratio", scan.max_ratio},
                       {"spread", scan.max_ratio / scan.min_ratio},
                       {"skipped", scan.skipped},
                       {"c_norm", model.c_norm()},
                       {"quad", quad_json(q)}});
    }
    json golden = {{"kernel_norms", norms},
                   {"envelopes", env},
                   {"provenance",
                    {{"version", LMSS_VERSION},
                     {"seed", ctx.seed},
                     {"kernel_rel_tol", rel_tol},
                     {"rel_err_method", "difference against a run at rel_tol / 100"},
                     {"quad", quad_json(quad)}}}};
    ctx.emit_json("golden_constants.json", golden);
    ctx.summary = {{"kernel_norms", norms.size()}, {"envelopes", env.size()}, {"max_rel_err", worst_rel}};
}

// ---------------------------------------------------------------- driver

RunOutcome execute(const std::string& text, const RunOptions& opts) {
    const auto start = std::chrono::steady_clock::now();
    json cfg;
    try {
        cfg = json::parse(text);
    } catch (const json::parse_error& e) {
        schema_error(std::string("config is not valid JSON: ") + e.what());
    }
    Fields top(cfg, "");
    Context ctx;
    if (top.has("command"))
        ctx.command = top.string("command");
    else if (opts.command)
        ctx.command = *opts.command;
    else
        schema_error("command: required field is missing");
    if (opts.command && *opts.command != ctx.command)
        schema_error("command: config says " + ctx.command + " but " + *opts.command + " was requested");
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), ctx.command) == names.end())
        schema_error("command: unknown command " + ctx.command);

    ctx.seed = top.unsigned_integer("seed", 0);
    if (opts.seed) ctx.seed = *opts.seed;
    const std::int64_t threads = top.integer("threads", 1);
    ctx.threads = int(opts.threads ? *opts.threads : threads);
    if (ctx.threads < 1) schema_error("threads: must be >= 1");
    ctx.max_cells = top.unsigned_integer("max_cells", kDefaultMaxCells);
    if (opts.max_cells) ctx.max_cells = *opts.max_cells;
    if (ctx.max_cells < 1) schema_error("max_cells: must be >= 1");
    std::string out_dir = top.string("output_dir", "");
    if (opts.output_dir) out_dir = *opts.output_dir;
    if (out_dir.empty()) schema_error("output directory missing: pass --output or set output_dir");
    if (opts.cache_dir) {
        ctx.cache_dir = *opts.cache_dir;
    } else if (const char* env = std::getenv("LMSS_CACHE_DIR")) {
        ctx.cache_dir = env;
    }

    if (ctx.command == "simulate")
        cmd_simulate(ctx, top);
    else if (ctx.command == "localtime")
        cmd_localtime(ctx, top);
    else if (ctx.command == "check-existence")
        cmd_check_existence(ctx, top);
    else if (ctx.command == "verify-lemmas")
        cmd_verify_lemmas(ctx, top);
    else if (ctx.command == "scan-increments")
        cmd_scan_increments(ctx, top);
    else if (ctx.command == "scaling-probe")
        cmd_scaling_probe(ctx, top);
    else
        cmd_calibrate_constants(ctx, top);

    // The effective config: what ran, with flag overrides folded in.
    json effective = cfg;
    effective["command"] = ctx.command;
    effective["seed"] = ctx.seed;
    effective.erase("output_dir");
    effective.erase("threads");
    effective.erase("max_cells");

    fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) fail(ErrorKind::io, "cannot create output directory " + out_dir);
    RunOutcome outcome;
    json files = json::array();
    for (const auto& [name, content] : ctx.outputs) {
        write_atomic(dir / name, content);
        outcome.files.push_back((dir / name).string());
        files.push_back({{"name", name}, {"bytes", content.size()}, {"fnv1a64", hex64(fnv1a64(content))}});
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json manifest = {{"command", ctx.command},
                     {"config", effective},
                     {"config_hash", hex64(fnv1a64(effective.dump()))},
                     {"version", LMSS_VERSION},
                     {"seed", ctx.seed},
                     {"threads", ctx.threads},
                     {"max_cells", ctx.max_cells},
                     {"cache_dir", ctx.cache_dir},
                     {"files", files},
                     {"wall_time_s", wall}};
    write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    outcome.files.push_back((dir / "manifest.json").string());
    outcome.summary = ctx.summary;
    outcome.summary["command"] = ctx.command;
    outcome.summary["output_dir"] = out_dir;
    outcome.message = "ok";
    return outcome;
}

}  // namespace

RunOutcome run(const std::string& config_text, const RunOptions& opts) {
    try {
        return execute(config_text, opts);
    } catch (const Error& e) {
        RunOutcome o;
        o.exit_code = exit_code_for(e.kind());
        o.message = e.what();
        return o;
    } catch (const std::bad_alloc&) {
        RunOutcome o;
        o.exit_code = exit_budget;
        o.message = "out of memory";
        return o;
    } catch (const std::exception& e) {
        RunOutcome o;
        o.exit_code = exit_internal;
        o.message = std::string("internal error: ") + e.what();
        return o;
    }
}

}  // namespace lmss
