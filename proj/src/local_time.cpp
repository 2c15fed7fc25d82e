#include "lmss/local_time.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>

#include "lmss/error.hpp"
#include "lmss/parallel.hpp"

namespace lmss {

namespace {

bool aligned(double edge, double origin, double width) {
    const double k = (edge - origin) / width;
    return std::abs(k - std::round(k)) <= 1e-7;
}

// Indices of field points inside rect, after checking that rect is a union of grid cells.
std::vector<std::size_t> points_in(const FieldSample& field, const Rect& rect) {
    const EvalGrid& g = field.grid;
    const std::size_t N = g.dim();
    require(rect.dim() == N, "time rectangle dimension mismatch");
    for (std::size_t l = 0; l < N; ++l) {
        const double w = (g.rect.upper[l] - g.rect.lower[l]) / g.counts[l];
        const double slack = 1e-9 * w;
        require(rect.lower[l] >= g.rect.lower[l] - slack && rect.upper[l] <= g.rect.upper[l] + slack &&
                    rect.upper[l] > rect.lower[l],
                "field does not cover the time rectangle");
        require(aligned(rect.lower[l], g.rect.lower[l], w) && aligned(rect.upper[l], g.rect.lower[l], w),
                "time rectangle must be a union of evaluation cells");
    }
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < g.size(); ++p) {
        Point u = g.point(p);
        bool in = true;
        for (std::size_t l = 0; l < N && in; ++l) in = u[l] > rect.lower[l] && u[l] < rect.upper[l];
        if (in) out.push_back(p);
    }
    return out;
}

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const std::size_t i = std::size_t(pos);
    if (i + 1 >= v.size()) return v.back();
    return v[i] + (pos - double(i)) * (v[i + 1] - v[i]);
}

struct ProbeSetup {
    KernelModel model;
    GridGeometry geom;
    std::vector<Rect> windows;
    std::vector<FieldSynthesizer> synths;
    std::vector<EvalGrid> grids;
    std::optional<FieldSynthesizer> anchor_synth;
};

void validate_probe(const ProbeConfig& cfg) {
    require(cfg.spec.has_value(), "probe needs a Hurst spec");
    const std::size_t N = cfg.spec->dim();
    require(N >= 1 && N <= 2, "probes support N <= 2");
    require(cfg.d >= 1, "d must be >= 1");
    require(cfg.scales.size() >= 4, "at least 4 scales are required");
    for (std::size_t i = 0; i < cfg.scales.size(); ++i) {
        require(std::isfinite(cfg.scales[i]) && cfg.scales[i] > 0.0, "scales must be positive");
        if (i > 0) require(cfg.scales[i] < cfg.scales[i - 1], "scales must be strictly decreasing");
    }
    require(cfg.replicates >= 2, "at least 2 replicates are required");
    require(cfg.anchor.size() == N, "anchor dimension mismatch");
    for (double a : cfg.anchor) require(std::isfinite(a) && a >= 0.0, "anchor must lie in R_+^N");
    if (cfg.level) require(cfg.level->size() == cfg.d, "level must have d components");
    require(cfg.points_per_axis >= 4, "points_per_axis must be >= 4");
    require(cfg.half_bins >= 1, "half_bins must be >= 1");
    require(cfg.spacing >= 0.0 && std::isfinite(cfg.spacing), "spacing must be nonnegative");
    if (cfg.bandwidth) require(*cfg.bandwidth > 0.0, "bandwidth must be positive");
}

// Synthesizers keep a pointer to the model, so the setup lives on the heap and never moves.
std::unique_ptr<ProbeSetup> make_setup(const ProbeConfig& cfg, std::vector<Rect> windows, double min_width) {
    const std::size_t N = cfg.spec->dim();
    std::vector<double> upper(N, 0.0);
    for (const Rect& w : windows)
        for (std::size_t l = 0; l < N; ++l) upper[l] = std::max(upper[l], w.upper[l]);
    const double spacing = cfg.spacing > 0.0 ? cfg.spacing : min_width / (2.0 * cfg.points_per_axis);
    auto s = std::make_unique<ProbeSetup>(ProbeSetup{
        KernelModel(*cfg.spec, cfg.alpha), GridGeometry::make(N, spacing, cfg.truncation_L, upper, cfg.max_cells),
        std::move(windows), {}, {}, std::nullopt});
    for (const Rect& w : s->windows) {
        s->grids.emplace_back(w, cfg.points_per_axis);
        s->synths.emplace_back(s->model, s->geom, s->grids.back());
    }
    bool interior = true;
    for (double a : cfg.anchor) interior = interior && a > 0.0;
    if (!cfg.level && interior) s->anchor_synth.emplace(s->model, s->geom, std::vector<Point>{cfg.anchor});
    return s;
}

// Local time of every window for one replicate; the level is the anchor value unless fixed.
std::vector<double> replicate_local_times(const ProbeConfig& cfg, const ProbeSetup& s, std::uint64_t rep) {
    std::vector<MeasureGrid> measures;
    for (std::size_t k = 0; k < cfg.d; ++k)
        measures.push_back(
            MeasureGrid::build_cached(s.geom, cfg.alpha, cfg.seed, replicate_stream(rep, k), cfg.cache_dir));
    Point level(cfg.d, 0.0);
    if (cfg.level)
        level = *cfg.level;
    else if (s.anchor_synth)
        for (std::size_t k = 0; k < cfg.d; ++k) level[k] = s.anchor_synth->apply(measures[k])[0];
    std::vector<double> out;
    for (std::size_t w = 0; w < s.windows.size(); ++w) {
        FieldSample fs;
        fs.grid = s.grids[w];
        fs.d = cfg.d;
        fs.alpha = cfg.alpha;
        fs.seed = cfg.seed;
        fs.spacing = s.geom.spacing;
        fs.values.assign(fs.grid.size() * cfg.d, 0.0);
        for (std::size_t k = 0; k < cfg.d; ++k) {
            std::vector<double> v = s.synths[w].apply(measures[k]);
            for (std::size_t p = 0; p < v.size(); ++p) fs.values[p * cfg.d + k] = v[p];
        }
        LocalTimeHistogram h = occupation_histogram(fs, s.windows[w], level, cfg.half_bins, cfg.bandwidth);
        out.push_back(local_time_estimate(h, level));
    }
    return out;
}

}  // namespace

Point LocalTimeHistogram::bin_center(std::size_t flat) const {
    Point c(d);
    const int B = bins_per_axis();
    for (std::size_t k = d; k-- > 0;) {
        const int j = int(flat % std::size_t(B)) - half_bins;
        flat /= std::size_t(B);
        c[k] = anchor[k] + j * bandwidth;
    }
    return c;
}

double LocalTimeHistogram::mass() const {
    const double bw = std::pow(bandwidth, double(d));
    double m = 0.0;
    for (double v : density) m += v * bw;
    return m + overflow_mass;
}

double scott_bandwidth(const FieldSample& field, const Rect& rect) {
    std::vector<std::size_t> pts = points_in(field, rect);
    require(pts.size() >= 2, "too few field points for a bandwidth estimate");
    double sd_sum = 0.0;
    for (std::size_t k = 0; k < field.d; ++k) {
        double mean = 0.0;
        for (std::size_t p : pts) mean += field.value(p, k);
        mean /= double(pts.size());
        double ss = 0.0;
        for (std::size_t p : pts) ss += (field.value(p, k) - mean) * (field.value(p, k) - mean);
        sd_sum += std::sqrt(ss / double(pts.size() - 1));
    }
    const double bw = sd_sum / double(field.d) * std::pow(double(pts.size()), -1.0 / (double(field.d) + 4.0));
    if (!(bw > 0.0)) fail(ErrorKind::numeric, "field has no spread; a bandwidth must be given");
    return bw;
}

LocalTimeHistogram occupation_histogram(const FieldSample& field, const Rect& rect, const Point& anchor,
                                        int half_bins, std::optional<double> bandwidth) {
    require(anchor.size() == field.d, "anchor must have d components");
    require(half_bins >= 0, "half_bins must be nonnegative");
    std::vector<std::size_t> pts = points_in(field, rect);
    LocalTimeHistogram h;
    h.rect = rect;
    h.d = field.d;
    h.anchor = anchor;
    h.half_bins = half_bins;
    h.bandwidth = bandwidth ? *bandwidth : scott_bandwidth(field, rect);
    require(std::isfinite(h.bandwidth) && h.bandwidth > 0.0, "bandwidth must be positive");
    h.cell_volume = field.grid.cell_volume();
    const int B = h.bins_per_axis();
    std::size_t nbins = 1;
    for (std::size_t k = 0; k < h.d; ++k) nbins *= std::size_t(B);
    h.density.assign(nbins, 0.0);
    for (std::size_t p : pts) {
        h.total_mass += h.cell_volume;
        std::size_t flat = 0;
        bool inside = true;
        for (std::size_t k = 0; k < h.d && inside; ++k) {
            const double j = std::floor((field.value(p, k) - anchor[k]) / h.bandwidth + 0.5);
            inside = std::abs(j) <= half_bins;
            flat = flat * std::size_t(B) + std::size_t(int(j) + half_bins);
        }
        if (inside)
            h.density[flat] += h.cell_volume;
        else
            h.overflow_mass += h.cell_volume;
    }
    const double bw = std::pow(h.bandwidth, double(h.d));
    for (double& v : h.density) v /= bw;
    return h;
}

double local_time_estimate(const LocalTimeHistogram& hist, const Point& x) {
    require(x.size() == hist.d, "level must have d components");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < hist.d; ++k) {
        const double j = std::floor((x[k] - hist.anchor[k]) / hist.bandwidth + 0.5);
        if (std::abs(j) > hist.half_bins) fail(ErrorKind::domain, "level lies outside the binned range");
        flat = flat * std::size_t(hist.bins_per_axis()) + std::size_t(int(j) + hist.half_bins);
    }
    return hist.density[flat];
}

double smoothed_local_time(const FieldSample& field, const Rect& rect, const Point& x, double k) {
    require(std::isfinite(k) && k > 0.0, "smoothing parameter k must be positive");
    require(x.size() == field.d, "level must have d components");
    std::vector<std::size_t> pts = points_in(field, rect);
    double sum = 0.0;
    for (std::size_t p : pts) {
        double r2 = 0.0;
        for (std::size_t c = 0; c < field.d; ++c) r2 += (field.value(p, c) - x[c]) * (field.value(p, c) - x[c]);
        sum += std::exp(-0.5 * k * r2);
    }
    return std::pow(k / (2.0 * std::numbers::pi), 0.5 * double(field.d)) * sum * field.grid.cell_volume();
}

double holder_scaling_function(double r, double beta, std::size_t N) {
    require(r > 0.0 && r < std::exp(-1.0), "radius must lie in (0, 1/e)");
    return std::pow(r, beta) * std::pow(std::log(std::log(1.0 / r)), double(N) - beta);
}

LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y, std::span<const double> y_stderr) {
    const std::size_t n = x.size();
    require(n >= 2 && y.size() == n, "log-log fit needs at least two matching points");
    require(y_stderr.empty() || y_stderr.size() == n, "one standard error per point required");
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) fail(ErrorKind::numeric, "log-log fit needs positive values");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / double(n);
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / double(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    require(sxx > 0.0, "log-log fit needs distinct abscissae");
    LogLogFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double var = 0.0;
    if (!y_stderr.empty()) {
        for (std::size_t i = 0; i < n; ++i) {
            const double c = (lx[i] - mx) / sxx;
            const double se = y_stderr[i] / y[i];
            var += c * c * se * se;
        }
    } else if (n > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = ly[i] - f.intercept - f.slope * lx[i];
            rss += r * r;
        }
        var = rss / double(n - 2) / sxx;
    }
    f.slope_stderr = std::sqrt(var);
    return f;
}

ScalingReport moment_scaling_probe(const ProbeConfig& cfg) {
    validate_probe(cfg);
    require(cfg.moment >= 0 && cfg.moment <= 3, "moment order must be in 0..3");
    const std::size_t N = cfg.spec->dim();
    ScalingReport rep;
    rep.scales = cfg.scales;
    rep.tolerance = cfg.tolerance;
    rep.replicates = std::size_t(cfg.replicates);
    std::vector<double> hi(N);
    for (std::size_t l = 0; l < N; ++l) hi[l] = cfg.anchor[l] + cfg.scales.front();
    rep.theory_exponent = cfg.moment * beta_bar(*cfg.spec, Rect(cfg.anchor, hi), int(cfg.d), 5);

    if (cfg.moment == 0) {
        rep.estimates.assign(cfg.scales.size(), 1.0);
        rep.stderrs.assign(cfg.scales.size(), 0.0);
        rep.consistent = rep.theory_exponent == 0.0;
        return rep;
    }

    std::vector<Rect> windows;
    for (double delta : cfg.scales) {
        Point up(N);
        for (std::size_t l = 0; l < N; ++l) up[l] = cfg.anchor[l] + delta;
        windows.emplace_back(cfg.anchor, up);
    }
    auto setup = make_setup(cfg, std::move(windows), cfg.scales.back());
    rep.spacing = setup->geom.spacing;

    const std::size_t S = cfg.scales.size();
    std::vector<double> sum(S, 0.0), sum2(S, 0.0);
    std::vector<std::vector<double>> all(std::size_t(cfg.replicates));
    parallel_for(all.size(), cfg.threads,
                 [&](std::size_t r) { all[r] = replicate_local_times(cfg, *setup, std::uint64_t(r)); });
    for (const std::vector<double>& lt : all) {
        for (std::size_t i = 0; i < S; ++i) {
            const double v = std::pow(lt[i], cfg.moment);
            sum[i] += v;
            sum2[i] += v * v;
        }
    }
    const double R = cfg.replicates;
    for (std::size_t i = 0; i < S; ++i) {
        const double mean = sum[i] / R;
        const double var = std::max(0.0, (sum2[i] - R * mean * mean) / (R - 1.0));
        rep.estimates.push_back(mean);
        rep.stderrs.push_back(std::sqrt(var / R));
        if (!(mean > 0.0))
            fail(ErrorKind::numeric, "local time moment vanished at delta = " + std::to_string(cfg.scales[i]) +
                                         "; increase replicates or bandwidth");
    }
    LogLogFit fit = fit_loglog(rep.scales, rep.estimates, rep.stderrs);
    rep.fitted_slope = fit.slope;
    rep.slope_stderr = fit.slope_stderr;
    if (rep.slope_stderr > 0.2)
        fail(ErrorKind::numeric, "slope standard error " + std::to_string(rep.slope_stderr) +
                                     " exceeds 0.2; increase replicates");
    rep.consistent = rep.fitted_slope >= rep.theory_exponent - rep.tolerance;
    return rep;
}

ScalingReport holder_scaling_probe(const ProbeConfig& cfg) {
    validate_probe(cfg);
    const std::size_t N = cfg.spec->dim();
    for (double r : cfg.scales) require(r < std::exp(-1.0), "radii must be below 1/e");
    for (std::size_t l = 0; l < N; ++l)
        require(cfg.anchor[l] - cfg.scales.front() >= 0.0, "U(t, r) must stay inside R_+^N");
    ScalingReport rep;
    rep.scales = cfg.scales;
    rep.tolerance = cfg.tolerance;
    rep.replicates = std::size_t(cfg.replicates);
    const std::vector<double> h = cfg.spec->eval(cfg.anchor);
    rep.theory_exponent = beta_exponent(h, int(cfg.d));

    std::vector<Rect> windows;
    std::vector<double> phi;
    for (double r : cfg.scales) {
        Point lo(N), up(N);
        for (std::size_t l = 0; l < N; ++l) {
            lo[l] = cfg.anchor[l] - r;
            up[l] = cfg.anchor[l] + r;
        }
        windows.emplace_back(lo, up);
        phi.push_back(holder_scaling_function(r, rep.theory_exponent, N));
    }
    auto setup = make_setup(cfg, std::move(windows), 2.0 * cfg.scales.back());
    rep.spacing = setup->geom.spacing;

    const std::size_t S = cfg.scales.size();
    std::vector<double> sum(S, 0.0), sum2(S, 0.0);
    std::vector<std::vector<double>> all(std::size_t(cfg.replicates));
    parallel_for(all.size(), cfg.threads,
                 [&](std::size_t r) { all[r] = replicate_local_times(cfg, *setup, std::uint64_t(r)); });
    for (const std::vector<double>& lt : all) {
        double mx = 0.0;
        for (std::size_t i = 0; i < S; ++i) {
            const double ratio = lt[i] / phi[i];
            sum[i] += ratio;
            sum2[i] += ratio * ratio;
            mx = std::max(mx, ratio);
        }
        rep.replicate_max_ratio.push_back(mx);
    }
    const double R = cfg.replicates;
    for (std::size_t i = 0; i < S; ++i) {
        const double mean = sum[i] / R;
        const double var = std::max(0.0, (sum2[i] - R * mean * mean) / (R - 1.0));
        rep.estimates.push_back(mean);
        rep.stderrs.push_back(std::sqrt(var / R));
        if (!(mean > 0.0)) fail(ErrorKind::numeric, "local time ratio vanished; increase replicates or bandwidth");
    }
    rep.percentile95 = percentile(rep.replicate_max_ratio, 0.95);
    LogLogFit fit = fit_loglog(rep.scales, rep.estimates, rep.stderrs);
    rep.fitted_slope = fit.slope;
    rep.slope_stderr = fit.slope_stderr;
    if (rep.slope_stderr > 0.2)
        fail(ErrorKind::numeric, "slope standard error " + std::to_string(rep.slope_stderr) +
                                     " exceeds 0.2; increase replicates");
    // The ratio grows as r decreases exactly when its log-log slope in r is negative.
    rep.bounded = std::isfinite(rep.percentile95) && rep.fitted_slope >= -rep.tolerance;
    rep.consistent = rep.bounded;
    return rep;
}

}  // namespace lmss
