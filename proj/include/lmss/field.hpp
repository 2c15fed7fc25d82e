#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lmss/hurst.hpp"
#include "lmss/kernel.hpp"
#include "lmss/stable.hpp"

namespace lmss {

inline constexpr std::uint64_t kDefaultMaxCells = 10'000'000;

// Lattice of cells [origin + i s, origin + (i+1) s] per axis with origin = -L; zero is always a cell boundary.
struct GridGeometry {
    std::size_t dim = 0;
    double spacing = 0.0;
    std::int64_t lower_index = 0;         // origin = lower_index * spacing (<= 0)
    std::vector<std::int64_t> counts;     // cells per axis

    // Extents are rounded outward to multiples of align * spacing, so the lattice can be coarsened
    // log2(align) times.
    static GridGeometry make(std::size_t dim, double spacing, double truncation_L, std::span<const double> upper,
                             std::uint64_t max_cells = kDefaultMaxCells, std::int64_t align = 1);

    double origin() const { return double(lower_index) * spacing; }
    // Lower edge of cell k (same on every axis).
    double boundary(std::int64_t k) const { return double(lower_index + k) * spacing; }
    std::int64_t zero_index() const { return -lower_index; }
    double upper(std::size_t l) const { return boundary(counts[l]); }
    std::uint64_t total_cells() const;
    double cell_volume() const;
    std::uint64_t hash() const;
    bool operator==(const GridGeometry&) const = default;
};

// Independent SaS(cell_volume^{1/alpha}) increments on every cell of a geometry.
class MeasureGrid {
  public:
    static MeasureGrid build(const GridGeometry& geom, double alpha, std::uint64_t seed, std::uint64_t stream);

    const GridGeometry& geometry() const { return geom_; }
    double alpha() const { return alpha_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }
    std::span<const double> increments() const { return values_; }
    double at(std::span<const std::int64_t> idx) const;

    // Sums 2^N children into every cell of the doubled-spacing lattice.
    MeasureGrid coarsen() const;

    void save(const std::string& path) const;
    static std::optional<MeasureGrid> load(const std::string& path, const GridGeometry& geom, double alpha,
                                           std::uint64_t seed, std::uint64_t stream);
    // Builds through the cache directory when given (empty: no cache).
    static MeasureGrid build_cached(const GridGeometry& geom, double alpha, std::uint64_t seed, std::uint64_t stream,
                                    const std::string& cache_dir);

  private:
    GridGeometry geom_;
    double alpha_ = 2.0;
    std::uint64_t seed_ = 0, stream_ = 0;
    std::vector<double> values_;
};

// Cell-centered tensor grid of evaluation points.
struct EvalGrid {
    Rect rect;
    std::vector<int> counts;

    EvalGrid() = default;
    EvalGrid(Rect r, std::vector<int> c);
    EvalGrid(Rect r, int per_axis);

    std::size_t dim() const { return rect.dim(); }
    std::size_t size() const;
    double coord(std::size_t l, int i) const;
    std::vector<double> axis(std::size_t l) const;
    Point point(std::size_t flat) const;
    double cell_volume() const;
};

struct FieldSample {
    EvalGrid grid;
    std::size_t d = 1;
    std::vector<double> values;  // point-major: values[p * d + k]
    double alpha = 2.0;
    std::uint64_t seed = 0;
    double spacing = 0.0;

    double value(std::size_t p, std::size_t k) const { return values[p * d + k]; }
};

// Per-axis Riemann weights of the kernel against the lattice cells; the singular cell uses the
// L^alpha cell mean of the power so that the weight stays finite.
std::vector<double> axis_weights(const GridGeometry& geom, double x, double e, double alpha);

// Precomputes the kernel tables for a fixed model, geometry and set of points; applying it to a
// measure is then a tensor contraction.
class FieldSynthesizer {
  public:
    FieldSynthesizer(const KernelModel& model, const GridGeometry& geom, const EvalGrid& grid);
    FieldSynthesizer(const KernelModel& model, const GridGeometry& geom, std::vector<Point> points);

    std::size_t size() const { return npoints_; }
    bool separable() const { return separable_; }
    std::vector<double> apply(const MeasureGrid& m) const;

  private:
    void check_measure(const MeasureGrid& m) const;
    std::vector<double> apply_separable(const MeasureGrid& m) const;
    std::vector<double> apply_points(const MeasureGrid& m) const;

    const KernelModel* model_;
    GridGeometry geom_;
    bool separable_ = false;
    std::size_t npoints_ = 0;
    // separable tensor path
    std::vector<int> rows_;                     // evaluation points per axis
    std::vector<std::int64_t> col_lo_, col_hi_; // active cell range per axis
    std::vector<std::vector<double>> tables_;   // rows_[l] x (col_hi-col_lo), row-major
    // general path
    std::vector<Point> points_;
};

FieldSample synthesize_field(const KernelModel& model, const EvalGrid& grid, std::span<const MeasureGrid> measures);

struct Decomposition {
    Point u;
    double epsilon = 0.0;  // snapped to the lattice
    double y = 0.0;        // full sum over cells in [0, u]
    double y1 = 0.0;       // cells in [0, eps]^N
    double y2 = 0.0;       // cells beyond eps on two or more axes
    std::vector<double> z; // cells beyond eps on exactly axis l
    std::uint64_t cells_total = 0;
    std::uint64_t cells_y1 = 0, cells_y2 = 0;
    std::vector<std::uint64_t> cells_z;

    double reconstruction_error() const;
};

Decomposition decompose_components(const KernelModel& model, const Point& u, const MeasureGrid& measure,
                                   double epsilon);

struct NormChainReport {
    double x_alpha = 0.0;        // ||sum a_j X(u^j)||^alpha over R^N
    double y_alpha = 0.0;        // over [0, inf)^N
    std::vector<double> z_alpha; // over [0,eps]^{l-1} x (eps, inf) x [0,eps]^{N-l}
    double z_sum = 0.0;
    double tolerance = 0.0;
    bool holds = false;
};

NormChainReport component_norm_inequality_check(const KernelModel& model, const std::vector<Point>& points,
                                                const std::vector<double>& coeffs, double epsilon,
                                                const QuadratureSpec& quad);

}  // namespace lmss
