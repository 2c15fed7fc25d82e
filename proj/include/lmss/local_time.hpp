#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmss/field.hpp"

namespace lmss {

// Box-kernel occupation density on a lattice of bins centered at anchor + k * bandwidth, |k| <= half_bins.
struct LocalTimeHistogram {
    Rect rect;
    std::size_t d = 1;
    double bandwidth = 0.0;
    Point anchor;
    int half_bins = 0;
    double cell_volume = 0.0;
    std::vector<double> density;  // row-major over (2 half_bins + 1)^d bins
    double overflow_mass = 0.0;   // time measure of points outside every bin
    double total_mass = 0.0;      // lambda_N of the covered time cells

    int bins_per_axis() const { return 2 * half_bins + 1; }
    Point bin_center(std::size_t flat) const;
    // sum density * bandwidth^d + overflow
    double mass() const;
    bool overflow_flagged() const { return overflow_mass > 0.01 * total_mass; }
};

// Scott-type rule: mean component standard deviation times R^{-1/(d+4)}.
double scott_bandwidth(const FieldSample& field, const Rect& rect);

// rect must be a union of evaluation cells of the field.
LocalTimeHistogram occupation_histogram(const FieldSample& field, const Rect& rect, const Point& anchor,
                                        int half_bins, std::optional<double> bandwidth = std::nullopt);

double local_time_estimate(const LocalTimeHistogram& hist, const Point& x);

// (k / 2 pi)^{d/2} int_rect exp(-k |X(t) - x|^2 / 2) dt as a Riemann sum over the field cells.
double smoothed_local_time(const FieldSample& field, const Rect& rect, const Point& x, double k);

// r^beta (log log 1/r)^{N - beta}; requires r < 1/e.
double holder_scaling_function(double r, double beta, std::size_t N);

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

// Least squares of log y on log x; the slope error propagates the per-point standard errors of y.
LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y, std::span<const double> y_stderr);

struct ProbeConfig {
    std::optional<HurstSpec> spec;
    double alpha = 2.0;
    std::size_t d = 1;
    int moment = 1;
    std::vector<double> scales;       // deltas (moment probe) or radii (Hölder probe)
    int replicates = 256;
    Point anchor;                     // a of I_{a,delta} or t of U(t,r)
    std::optional<Point> level;       // x; empty means the field value at the anchor
    double spacing = 0.0;             // measure lattice spacing; 0 picks min scale / (2 points)
    double truncation_L = 10.0;
    int points_per_axis = 64;
    int half_bins = 64;
    std::optional<double> bandwidth;  // empty: Scott rule per replicate
    double tolerance = 0.15;
    std::uint64_t seed = 0;
    std::uint64_t max_cells = kDefaultMaxCells;
    std::string cache_dir;
    int threads = 1;                  // replicate workers; results do not depend on it
};

struct ScalingReport {
    std::vector<double> scales;
    std::vector<double> estimates;
    std::vector<double> stderrs;
    double fitted_slope = 0.0;
    double slope_stderr = 0.0;
    double theory_exponent = 0.0;
    double tolerance = 0.0;
    bool consistent = false;
    // Hölder probe only
    std::vector<double> replicate_max_ratio;
    double percentile95 = 0.0;
    bool bounded = false;
    // Stream layout and time measure, for the output meta.
    double spacing = 0.0;
    std::size_t replicates = 0;
};

// E[L(x, [a, a + delta]^N)^n] per delta with the log-log slope against n * beta_bar.
ScalingReport moment_scaling_probe(const ProbeConfig& cfg);
// Per replicate max over radii of L(x, U(t, r)) / phi_t(r); U is the cube of half-width r.
ScalingReport holder_scaling_probe(const ProbeConfig& cfg);

inline std::uint64_t replicate_stream(std::uint64_t replicate, std::uint64_t component) {
    return (replicate << 8) | component;
}

}  // namespace lmss
