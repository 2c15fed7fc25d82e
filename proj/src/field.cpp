#include "lmss/field.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lmss/error.hpp"

namespace lmss {

namespace {

constexpr char kCacheMagic[8] = {'L', 'M', 'S', 'S', 'M', 'G', '0', '1'};
constexpr std::size_t kMaxTableEntries = 32'000'000;

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

// Weights of cells [lo, hi) into out[0 .. hi-lo).
void fill_axis_weights(const GridGeometry& geom, double x, double e, double alpha, std::int64_t lo, std::int64_t hi,
                       double* out) {
    const double s = geom.spacing;
    const double ha = e * alpha + 1.0;
    const std::int64_t zero = geom.zero_index();
    for (std::int64_t k = lo; k < hi; ++k) {
        const double a = geom.boundary(k);
        const double b = geom.boundary(k + 1);
        double t1 = 0.0;
        if (a < x) {
            if (b >= x)
                t1 = std::pow(std::pow(x - a, ha) / (ha * s), 1.0 / alpha);
            else
                t1 = pos_pow(x - 0.5 * (a + b), e);
        }
        double t2 = 0.0;
        if (k + 1 == zero)
            t2 = std::pow(std::pow(s, ha) / (ha * s), 1.0 / alpha);
        else if (k + 1 < zero)
            t2 = pos_pow(-0.5 * (a + b), e);
        out[k - lo] = t1 - t2;
    }
}

// One past the last cell whose lower edge is below x.
std::int64_t active_end(const GridGeometry& geom, double x, std::size_t l) {
    std::int64_t k = std::int64_t(std::ceil(x / geom.spacing)) - geom.lower_index;
    while (k > 0 && geom.boundary(k - 1) >= x) --k;
    while (k < geom.counts[l] && geom.boundary(k) < x) ++k;
    return std::clamp<std::int64_t>(k, 0, geom.counts[l]);
}

std::int64_t first_nonzero_column(const std::vector<double>& table, std::size_t rows, std::int64_t cols) {
    for (std::int64_t k = 0; k < cols; ++k)
        for (std::size_t r = 0; r < rows; ++r)
            if (table[r * std::size_t(cols) + std::size_t(k)] != 0.0) return k;
    return cols;
}

// Contracts the active box of the measure against per-axis tables.
// tables[l] is rows[l] x width[l]; the result is row-major over rows.
std::vector<double> contract(const MeasureGrid& m, const std::vector<std::int64_t>& lo,
                             const std::vector<std::int64_t>& hi, const std::vector<const double*>& tables,
                             const std::vector<std::size_t>& rows) {
    const GridGeometry& g = m.geometry();
    const std::size_t N = g.dim;
    std::vector<std::size_t> width(N);
    std::size_t total = 1;
    for (std::size_t l = 0; l < N; ++l) {
        width[l] = std::size_t(hi[l] - lo[l]);
        total *= width[l];
    }
    std::size_t out_size = 1;
    for (std::size_t r : rows) out_size *= r;
    if (total == 0) return std::vector<double>(out_size, 0.0);

    // Copy the active box (row-major, last axis fastest).
    std::vector<double> cur(total);
    std::vector<std::size_t> stride(N, 1);
    for (std::size_t l = N - 1; l-- > 0;) stride[l] = stride[l + 1] * std::size_t(g.counts[l + 1]);
    std::span<const double> inc = m.increments();
    {
        std::vector<std::size_t> idx(N, 0);
        const std::size_t last = width[N - 1];
        for (std::size_t pos = 0; pos < total; pos += last) {
            std::size_t off = 0;
            for (std::size_t l = 0; l < N; ++l) off += (std::size_t(lo[l]) + idx[l]) * stride[l];
            std::copy_n(inc.begin() + std::ptrdiff_t(off), last, cur.begin() + std::ptrdiff_t(pos));
            for (std::size_t l = N - 1; l-- > 0;) {
                if (++idx[l] < width[l]) break;
                idx[l] = 0;
            }
        }
    }

    // Contract the axes from last to first; the shape is prefix x width[k] x suffix.
    std::size_t suffix = 1;
    for (std::size_t k = N; k-- > 0;) {
        std::size_t prefix = 1;
        for (std::size_t l = 0; l < k; ++l) prefix *= width[l];
        const std::size_t w = width[k], R = rows[k];
        std::vector<double> next(prefix * R * suffix, 0.0);
        const double* phi = tables[k];
        for (std::size_t a = 0; a < prefix; ++a) {
            const double* src = cur.data() + a * w * suffix;
            double* dst = next.data() + a * R * suffix;
            for (std::size_t r = 0; r < R; ++r) {
                const double* row = phi + r * w;
                double* d = dst + r * suffix;
                for (std::size_t i = 0; i < w; ++i) {
                    const double f = row[i];
                    if (f == 0.0) continue;
                    const double* sv = src + i * suffix;
                    for (std::size_t s = 0; s < suffix; ++s) d[s] += f * sv[s];
                }
            }
        }
        cur.swap(next);
        suffix *= R;
    }
    return cur;
}

std::string cache_file(const std::string& dir, const GridGeometry& geom, double alpha, std::uint64_t seed,
                       std::uint64_t stream) {
    std::ostringstream os;
    os << dir << "/measure_" << seed << "_" << stream << "_" << std::hex << geom.hash() << "_"
       << std::bit_cast<std::uint64_t>(alpha) << ".bin";
    return os.str();
}

}  // namespace

GridGeometry GridGeometry::make(std::size_t dim, double spacing, double truncation_L, std::span<const double> upper,
                                std::uint64_t max_cells, std::int64_t align) {
    require(dim >= 1, "grid dimension must be >= 1");
    require(std::isfinite(spacing) && spacing > 0.0, "spacing must be positive");
    require(std::isfinite(truncation_L) && truncation_L > 0.0, "truncation_L must be positive");
    require(align >= 1, "align must be >= 1");
    require(upper.size() == dim, "upper extent needs one entry per axis");
    GridGeometry g;
    g.dim = dim;
    g.spacing = spacing;
    const double unit = spacing * double(align);
    const double lo_units = std::ceil(truncation_L / unit - 1e-9);
    require(lo_units < 1e15, "lattice too large");
    g.lower_index = -std::int64_t(lo_units) * align;
    double total = 1.0;
    for (double T : upper) {
        require(std::isfinite(T) && T > 0.0, "upper extent must be positive");
        const double hi_units = std::ceil(T / unit - 1e-9);
        const double cells = (lo_units + hi_units) * double(align);
        total *= cells;
        if (total > double(max_cells))
            fail(ErrorKind::budget, "measure lattice needs more than " + std::to_string(max_cells) + " cells");
        g.counts.push_back(std::int64_t(cells));
    }
    return g;
}

std::uint64_t GridGeometry::total_cells() const {
    std::uint64_t t = 1;
    for (auto c : counts) t *= std::uint64_t(c);
    return t;
}

double GridGeometry::cell_volume() const { return std::pow(spacing, double(dim)); }

std::uint64_t GridGeometry::hash() const {
    std::uint64_t h = 14695981039346656037ull;
    std::uint64_t n = dim;
    h = fnv1a(h, &n, sizeof n);
    h = fnv1a(h, &spacing, sizeof spacing);
    h = fnv1a(h, &lower_index, sizeof lower_index);
    for (auto c : counts) h = fnv1a(h, &c, sizeof c);
    return h;
}

MeasureGrid MeasureGrid::build(const GridGeometry& geom, double alpha, std::uint64_t seed, std::uint64_t stream) {
    StableParams p{alpha, std::pow(geom.cell_volume(), 1.0 / alpha)};
    validate(p);
    require(geom.dim >= 1 && geom.counts.size() == geom.dim, "invalid grid geometry");
    MeasureGrid m;
    m.geom_ = geom;
    m.alpha_ = alpha;
    m.seed_ = seed;
    m.stream_ = stream;
    m.values_.resize(geom.total_cells());
    RngStream rng(seed, stream);
    fill_sas(p, m.values_, rng);
    return m;
}

double MeasureGrid::at(std::span<const std::int64_t> idx) const {
    require(idx.size() == geom_.dim, "index dimension mismatch");
    std::size_t off = 0;
    for (std::size_t l = 0; l < geom_.dim; ++l) {
        require(idx[l] >= 0 && idx[l] < geom_.counts[l], "cell index out of range");
        off = off * std::size_t(geom_.counts[l]) + std::size_t(idx[l]);
    }
    return values_[off];
}

MeasureGrid MeasureGrid::coarsen() const {
    const std::size_t N = geom_.dim;
    require(geom_.lower_index % 2 == 0, "lattice origin is not aligned for coarsening");
    for (auto c : geom_.counts) require(c % 2 == 0, "odd cell count cannot be coarsened");
    MeasureGrid out;
    out.geom_ = geom_;
    out.geom_.spacing = 2.0 * geom_.spacing;
    out.geom_.lower_index = geom_.lower_index / 2;
    for (auto& c : out.geom_.counts) c /= 2;
    out.alpha_ = alpha_;
    out.seed_ = seed_;
    out.stream_ = stream_;
    out.values_.assign(out.geom_.total_cells(), 0.0);
    // Visit fine cells in storage order; each adds into its parent.
    std::vector<std::int64_t> idx(N, 0);
    for (std::size_t pos = 0; pos < values_.size(); ++pos) {
        std::size_t parent = 0;
        for (std::size_t l = 0; l < N; ++l) parent = parent * std::size_t(out.geom_.counts[l]) + std::size_t(idx[l] / 2);
        out.values_[parent] += values_[pos];
        for (std::size_t l = N; l-- > 0;) {
            if (++idx[l] < geom_.counts[l]) break;
            idx[l] = 0;
        }
    }
    return out;
}

void MeasureGrid::save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) fail(ErrorKind::io, "cannot write " + tmp);
        const std::uint64_t hash = geom_.hash(), n = values_.size();
        os.write(kCacheMagic, sizeof kCacheMagic);
        os.write(reinterpret_cast<const char*>(&hash), sizeof hash);
        os.write(reinterpret_cast<const char*>(&alpha_), sizeof alpha_);
        os.write(reinterpret_cast<const char*>(&seed_), sizeof seed_);
        os.write(reinterpret_cast<const char*>(&stream_), sizeof stream_);
        os.write(reinterpret_cast<const char*>(&n), sizeof n);
        os.write(reinterpret_cast<const char*>(values_.data()), std::streamsize(n * sizeof(double)));
        if (!os) fail(ErrorKind::io, "short write to " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorKind::io, "cannot rename " + tmp + ": " + ec.message());
}

std::optional<MeasureGrid> MeasureGrid::load(const std::string& path, const GridGeometry& geom, double alpha,
                                             std::uint64_t seed, std::uint64_t stream) {
    std::ifstream is(path, std::ios::binary);
    if (!is) return std::nullopt;
    char magic[8];
    std::uint64_t hash = 0, s = 0, st = 0, n = 0;
    double a = 0.0;
    is.read(magic, sizeof magic);
    is.read(reinterpret_cast<char*>(&hash), sizeof hash);
    is.read(reinterpret_cast<char*>(&a), sizeof a);
    is.read(reinterpret_cast<char*>(&s), sizeof s);
    is.read(reinterpret_cast<char*>(&st), sizeof st);
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!is || std::memcmp(magic, kCacheMagic, sizeof magic) != 0) return std::nullopt;
    if (hash != geom.hash() || a != alpha || s != seed || st != stream || n != geom.total_cells()) return std::nullopt;
    MeasureGrid m;
    m.geom_ = geom;
    m.alpha_ = alpha;
    m.seed_ = seed;
    m.stream_ = stream;
    m.values_.resize(n);
    is.read(reinterpret_cast<char*>(m.values_.data()), std::streamsize(n * sizeof(double)));
    if (!is) return std::nullopt;
    return m;
}

MeasureGrid MeasureGrid::build_cached(const GridGeometry& geom, double alpha, std::uint64_t seed,
                                      std::uint64_t stream, const std::string& cache_dir) {
    if (cache_dir.empty()) return build(geom, alpha, seed, stream);
    const std::string path = cache_file(cache_dir, geom, alpha, seed, stream);
    if (auto m = load(path, geom, alpha, seed, stream)) return std::move(*m);
    MeasureGrid m = build(geom, alpha, seed, stream);
    std::error_code ec;
    std::filesystem::create_directories(cache_dir, ec);
    if (!ec) m.save(path);
    return m;
}

EvalGrid::EvalGrid(Rect r, std::vector<int> c) : rect(std::move(r)), counts(std::move(c)) {
    require(counts.size() == rect.dim() && rect.dim() >= 1, "evaluation grid needs one count per axis");
    for (std::size_t l = 0; l < counts.size(); ++l) {
        require(counts[l] >= 1, "evaluation density must be >= 1");
        require(rect.upper[l] > rect.lower[l], "evaluation rectangle must have positive extent");
    }
}

EvalGrid::EvalGrid(Rect r, int per_axis) : EvalGrid(r, std::vector<int>(r.dim(), per_axis)) {}

std::size_t EvalGrid::size() const {
    std::size_t n = 1;
    for (int c : counts) n *= std::size_t(c);
    return n;
}

double EvalGrid::coord(std::size_t l, int i) const {
    const double w = (rect.upper[l] - rect.lower[l]) / counts[l];
    return rect.lower[l] + (i + 0.5) * w;
}

std::vector<double> EvalGrid::axis(std::size_t l) const {
    std::vector<double> out(std::size_t(counts[l]));
    for (int i = 0; i < counts[l]; ++i) out[std::size_t(i)] = coord(l, i);
    return out;
}

Point EvalGrid::point(std::size_t flat) const {
    const std::size_t N = dim();
    Point u(N);
    for (std::size_t l = N; l-- > 0;) {
        u[l] = coord(l, int(flat % std::size_t(counts[l])));
        flat /= std::size_t(counts[l]);
    }
    return u;
}

double EvalGrid::cell_volume() const { return rect.volume() / double(size()); }

std::vector<double> axis_weights(const GridGeometry& geom, double x, double e, double alpha) {
    require(!geom.counts.empty(), "invalid grid geometry");
    std::vector<double> out(std::size_t(geom.counts[0]));
    fill_axis_weights(geom, x, e, alpha, 0, geom.counts[0], out.data());
    return out;
}

FieldSynthesizer::FieldSynthesizer(const KernelModel& model, const GridGeometry& geom, const EvalGrid& grid)
    : model_(&model), geom_(geom) {
    const std::size_t N = geom.dim;
    require(grid.dim() == N && model.dim() == N, "evaluation grid dimension mismatch");
    npoints_ = grid.size();
    for (std::size_t l = 0; l < N; ++l) {
        require(grid.rect.lower[l] >= 0.0, "evaluation points must lie in (0, T_max]");
        require(grid.coord(l, grid.counts[l] - 1) <= geom.upper(l), "evaluation points exceed the measure lattice");
    }
    std::size_t entries = 0;
    std::vector<std::int64_t> hi(N);
    for (std::size_t l = 0; l < N; ++l) {
        hi[l] = active_end(geom, grid.coord(l, grid.counts[l] - 1), l);
        entries += std::size_t(grid.counts[l]) * std::size_t(hi[l]);
    }
    separable_ = model.spec().axis_separable() && entries <= kMaxTableEntries;
    if (!separable_) {
        points_.reserve(npoints_);
        for (std::size_t p = 0; p < npoints_; ++p) points_.push_back(grid.point(p));
        return;
    }
    const double alpha = model.alpha();
    rows_.assign(grid.counts.begin(), grid.counts.end());
    col_lo_.assign(N, 0);
    col_hi_ = hi;
    tables_.resize(N);
    for (std::size_t l = 0; l < N; ++l) {
        const std::size_t R = std::size_t(rows_[l]);
        const std::int64_t W = hi[l];
        std::vector<double> full(R * std::size_t(W));
        for (std::size_t r = 0; r < R; ++r) {
            const double x = grid.coord(l, int(r));
            const double e = model.spec().eval_axis(l, x) - 1.0 / alpha;
            fill_axis_weights(geom, x, e, alpha, 0, W, full.data() + r * std::size_t(W));
        }
        const std::int64_t lo = first_nonzero_column(full, R, W);
        col_lo_[l] = std::min(lo, W);
        const std::size_t w = std::size_t(W - col_lo_[l]);
        tables_[l].resize(R * w);
        for (std::size_t r = 0; r < R; ++r)
            std::copy_n(full.begin() + std::ptrdiff_t(r * std::size_t(W) + std::size_t(col_lo_[l])), w,
                        tables_[l].begin() + std::ptrdiff_t(r * w));
    }
}

FieldSynthesizer::FieldSynthesizer(const KernelModel& model, const GridGeometry& geom, std::vector<Point> points)
    : model_(&model), geom_(geom), points_(std::move(points)) {
    npoints_ = points_.size();
    for (const Point& u : points_) {
        require(u.size() == geom.dim && model.dim() == geom.dim, "point dimension mismatch");
        for (std::size_t l = 0; l < geom.dim; ++l)
            require(u[l] > 0.0 && u[l] <= geom.upper(l), "evaluation points must lie in (0, T_max]");
    }
}

void FieldSynthesizer::check_measure(const MeasureGrid& m) const {
    require(m.geometry() == geom_, "measure geometry differs from the synthesizer geometry");
    require(m.alpha() == model_->alpha(), "measure alpha differs from the kernel alpha");
}

std::vector<double> FieldSynthesizer::apply(const MeasureGrid& m) const {
    check_measure(m);
    return separable_ ? apply_separable(m) : apply_points(m);
}

std::vector<double> FieldSynthesizer::apply_separable(const MeasureGrid& m) const {
    const std::size_t N = geom_.dim;
    std::vector<const double*> tabs(N);
    std::vector<std::size_t> rows(N);
    for (std::size_t l = 0; l < N; ++l) {
        tabs[l] = tables_[l].data();
        rows[l] = std::size_t(rows_[l]);
    }
    std::vector<double> out = contract(m, col_lo_, col_hi_, tabs, rows);
    for (double& v : out) v *= model_->c_norm();
    return out;
}

std::vector<double> FieldSynthesizer::apply_points(const MeasureGrid& m) const {
    const std::size_t N = geom_.dim;
    const double alpha = model_->alpha();
    std::vector<double> out(npoints_);
    std::vector<double> h(N);
    std::vector<std::vector<double>> w(N);
    std::vector<std::int64_t> lo(N), hi(N);
    std::vector<const double*> tabs(N);
    const std::vector<std::size_t> ones(N, 1);
    for (std::size_t p = 0; p < npoints_; ++p) {
        const Point& u = points_[p];
        model_->spec().eval_into(u, h);
        for (std::size_t l = 0; l < N; ++l) {
            const double e = h[l] - 1.0 / alpha;
            hi[l] = active_end(geom_, u[l], l);
            // With e = 0 the cells left of zero cancel exactly.
            lo[l] = e == 0.0 ? std::min(geom_.zero_index(), hi[l]) : 0;
            w[l].resize(std::size_t(hi[l] - lo[l]));
            fill_axis_weights(geom_, u[l], e, alpha, lo[l], hi[l], w[l].data());
            tabs[l] = w[l].data();
        }
        out[p] = model_->c_norm() * contract(m, lo, hi, tabs, ones)[0];
    }
    return out;
}

FieldSample synthesize_field(const KernelModel& model, const EvalGrid& grid, std::span<const MeasureGrid> measures) {
    require(!measures.empty(), "at least one measure (component) is required");
    const GridGeometry& geom = measures[0].geometry();
    FieldSynthesizer synth(model, geom, grid);
    FieldSample fs;
    fs.grid = grid;
    fs.d = measures.size();
    fs.alpha = model.alpha();
    fs.seed = measures[0].seed();
    fs.spacing = geom.spacing;
    fs.values.assign(grid.size() * fs.d, 0.0);
    for (std::size_t k = 0; k < fs.d; ++k) {
        std::vector<double> v = synth.apply(measures[k]);
        for (std::size_t p = 0; p < v.size(); ++p) fs.values[p * fs.d + k] = v[p];
    }
    return fs;
}

double Decomposition::reconstruction_error() const {
    double sum = y1 + y2;
    for (double v : z) sum += v;
    return std::abs(y - sum);
}

Decomposition decompose_components(const KernelModel& model, const Point& u, const MeasureGrid& measure,
                                   double epsilon) {
    const GridGeometry& g = measure.geometry();
    const std::size_t N = g.dim;
    require(u.size() == N && model.dim() == N, "point dimension mismatch");
    require(measure.alpha() == model.alpha(), "measure alpha differs from the kernel alpha");
    require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
    const std::int64_t eps_cells = std::max<std::int64_t>(1, std::llround(epsilon / g.spacing));
    Decomposition d;
    d.u = u;
    d.epsilon = double(eps_cells) * g.spacing;
    d.z.assign(N, 0.0);
    d.cells_z.assign(N, 0);
    for (std::size_t l = 0; l < N; ++l) {
        require(u[l] > 0.0 && u[l] <= g.upper(l), "point must lie in (0, T_max]");
        require(d.epsilon < u[l], "epsilon must be below every coordinate of u");
    }

    const double alpha = model.alpha();
    std::vector<double> h = model.spec().eval(u);
    const std::int64_t zero = g.zero_index();
    std::vector<std::int64_t> lo(N), hi(N);
    std::vector<std::vector<double>> w(N);
    for (std::size_t l = 0; l < N; ++l) {
        lo[l] = zero;
        hi[l] = active_end(g, u[l], l);
        w[l].resize(std::size_t(hi[l] - lo[l]));
        fill_axis_weights(g, u[l], h[l] - 1.0 / alpha, alpha, lo[l], hi[l], w[l].data());
    }

    // Fixed row-major order over the cells of [0, u]; every cell lands in exactly one class.
    std::vector<std::int64_t> idx(lo);
    std::span<const double> inc = measure.increments();
    const double c = model.c_norm();
    while (true) {
        std::size_t off = 0;
        double weight = c;
        std::size_t beyond = 0, axis = 0;
        for (std::size_t l = 0; l < N; ++l) {
            off = off * std::size_t(g.counts[l]) + std::size_t(idx[l]);
            weight *= w[l][std::size_t(idx[l] - lo[l])];
            if (idx[l] - zero >= eps_cells) {
                ++beyond;
                axis = l;
            }
        }
        const double term = weight * inc[off];
        d.y += term;
        ++d.cells_total;
        if (beyond == 0) {
            d.y1 += term;
            ++d.cells_y1;
        } else if (beyond == 1) {
            d.z[axis] += term;
            ++d.cells_z[axis];
        } else {
            d.y2 += term;
            ++d.cells_y2;
        }
        std::size_t l = N;
        while (l > 0) {
            --l;
            if (++idx[l] < hi[l]) break;
            idx[l] = lo[l];
            if (l == 0) return d;
        }
    }
}

NormChainReport component_norm_inequality_check(const KernelModel& model, const std::vector<Point>& points,
                                                const std::vector<double>& coeffs, double epsilon,
                                                const QuadratureSpec& quad) {
    const std::size_t N = model.dim();
    require(!points.empty() && points.size() <= 6, "between 1 and 6 points are supported");
    require(coeffs.size() == points.size(), "one coefficient per point required");
    require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
    LinearCombination comb{coeffs, points};
    NormChainReport rep;
    const NormResult x = lalpha_norm(comb, model, quad);
    IntegrationBox pos = IntegrationBox::positive(N);
    const NormResult y = lalpha_norm(comb, model, quad, &pos);
    rep.x_alpha = x.alpha_power;
    rep.y_alpha = y.alpha_power;
    double err = x.abs_error + y.abs_error;
    for (std::size_t l = 0; l < N; ++l) {
        IntegrationBox box;
        box.lower.assign(N, 0.0);
        box.upper.assign(N, epsilon);
        box.lower[l] = epsilon;
        box.upper[l] = std::numeric_limits<double>::infinity();
        const NormResult z = lalpha_norm(comb, model, quad, &box);
        rep.z_alpha.push_back(z.alpha_power);
        rep.z_sum += z.alpha_power;
        err += z.abs_error;
    }
    rep.tolerance = err + 4.0 * quad.target_rel_err * rep.x_alpha;
    rep.holds = rep.x_alpha >= rep.y_alpha - rep.tolerance && rep.y_alpha >= rep.z_sum - rep.tolerance;
    return rep;
}

}  // namespace lmss
