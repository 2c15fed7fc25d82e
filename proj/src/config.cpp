#include "lmss/config.hpp"

#include <cmath>
#include <cstdio>

#include "lmss/error.hpp"
#include "lmss/existence.hpp"

namespace lmss {

void schema_error(const std::string& msg) { fail(ErrorKind::schema, msg); }

Fields::Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) schema_error(where_ + ": expected an object");
}

std::string Fields::path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

bool Fields::has(const std::string& key) const { return j_.contains(key); }

const json* Fields::get(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
}

const json& Fields::require_key(const std::string& key) {
    const json* v = get(key);
    if (!v) schema_error(path(key) + ": required field is missing");
    return *v;
}

double Fields::number(const std::string& key) {
    const json& v = require_key(key);
    if (!v.is_number()) schema_error(path(key) + ": expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) schema_error(path(key) + ": expected a finite number");
    return x;
}

double Fields::number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

std::int64_t Fields::integer(const std::string& key) {
    const json& v = require_key(key);
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
        const double x = v.get<double>();
        if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9e15) return std::int64_t(x);
    }
    schema_error(path(key) + ": expected an integer");
}

std::int64_t Fields::integer(const std::string& key, std::int64_t fallback) {
    return has(key) ? integer(key) : fallback;
}

std::uint64_t Fields::unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = require_key(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    const std::int64_t x = integer(key);
    if (x < 0) schema_error(path(key) + ": expected a nonnegative integer");
    return std::uint64_t(x);
}

bool Fields::boolean(const std::string& key, bool fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_boolean()) schema_error(path(key) + ": expected true or false");
    return v->get<bool>();
}

std::string Fields::string(const std::string& key) {
    const json& v = require_key(key);
    if (!v.is_string()) schema_error(path(key) + ": expected a string");
    return v.get<std::string>();
}

std::string Fields::string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
}

std::vector<double> Fields::numbers(const std::string& key) { return numbers_of(require_key(key), path(key)); }

std::optional<std::vector<double>> Fields::numbers_opt(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return numbers(key);
}

Fields Fields::object(const std::string& key) { return Fields(require_key(key), path(key)); }

void Fields::finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
        if (!used_.count(it.key())) schema_error(path(it.key()) + ": unknown field");
}

std::vector<double> numbers_of(const json& j, const std::string& where) {
    if (!j.is_array()) schema_error(where + ": expected an array of numbers");
    std::vector<double> out;
    for (const json& v : j) {
        if (!v.is_number()) schema_error(where + ": expected an array of numbers");
        out.push_back(v.get<double>());
        if (!std::isfinite(out.back())) schema_error(where + ": entries must be finite");
    }
    return out;
}

double alpha_of(Fields& f, double fallback) {
    const double a = f.number("alpha", fallback);
    if (!(a > 0.0 && a <= 2.0)) schema_error(f.path("alpha") + ": must lie in (0, 2], got " + format_double(a));
    return a;
}

Rect rect_from_json(const json& j, const std::string& where) {
    Fields f(j, where);
    std::vector<double> lo = f.numbers("lower"), hi = f.numbers("upper");
    f.finish();
    if (lo.size() != hi.size() || lo.empty()) schema_error(where + ": lower and upper need the same nonzero length");
    for (std::size_t l = 0; l < lo.size(); ++l)
        if (!(hi[l] >= lo[l])) schema_error(where + ": lower must not exceed upper");
    return Rect(std::move(lo), std::move(hi));
}

HurstSpec spec_from_json(const json& j, const std::string& where) {
    Fields f(j, where);
    const std::string kind = f.string("kind");
    std::optional<HurstSpec> spec;
    try {
        if (kind == "constant") {
            spec = HurstSpec::constant(f.numbers("h"));
        } else if (kind == "power_law") {
            const std::int64_t m = f.integer("m");
            const double q = f.number("q", 0.0);
            const double k = f.number("k");
            if (f.has("upper"))
                spec = HurstSpec::power_law(double(m), q, k, f.number("upper"));
            else
                spec = example_hurst(int(m), q, k);
        } else if (kind == "affine") {
            spec = HurstSpec::affine(f.numbers("h0"), f.numbers("slope"), rect_from_json(f.require_key("domain"),
                                                                                         f.path("domain")));
        } else if (kind == "table") {
            const json& axes = f.require_key("axes");
            if (!axes.is_array()) schema_error(f.path("axes") + ": expected an array of arrays");
            std::vector<std::vector<double>> ax;
            for (const json& a : axes) ax.push_back(numbers_of(a, f.path("axes")));
            spec = HurstSpec::table(std::move(ax), f.numbers("values"));
        } else {
            schema_error(f.path("kind") + ": expected one of constant, power_law, affine, table");
        }
        if (f.has("bounds")) {
            Fields b = f.object("bounds");
            spec->set_bounds(b.numbers("lower"), b.numbers("upper"));
            b.finish();
        }
        if (f.has("lipschitz")) spec->set_lipschitz(f.number("lipschitz"));
        if (auto p = f.numbers_opt("norm_point")) spec->set_norm_point(*p);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::invalid_argument) schema_error(where + ": " + e.what());
        throw;
    }
    f.finish();
    return *spec;
}

QuadratureSpec quad_from_json(const json* j, const std::string& where) {
    QuadratureSpec q;
    if (!j) return q;
    Fields f(*j, where);
    q.truncation_L = f.number("truncation_L", q.truncation_L);
    q.panels_per_axis = int(f.integer("panels_per_axis", q.panels_per_axis));
    q.singularity_split = f.boolean("singularity_split", q.singularity_split);
    q.target_rel_err = f.number("target_rel_err", q.target_rel_err);
    f.finish();
    try {
        validate(q);
    } catch (const Error& e) {
        schema_error(where + ": " + e.what());
    }
    return q;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace lmss
