#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmss/hurst.hpp"
#include "lmss/kernel.hpp"

namespace lmss {

using json = nlohmann::json;

// Typed access to one JSON object; keys that are never read are rejected by finish().
class Fields {
  public:
    Fields(const json& j, std::string where);

    bool has(const std::string& key) const;
    const json* get(const std::string& key);
    const json& require_key(const std::string& key);

    double number(const std::string& key);
    double number(const std::string& key, double fallback);
    std::int64_t integer(const std::string& key);
    std::int64_t integer(const std::string& key, std::int64_t fallback);
    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback);
    bool boolean(const std::string& key, bool fallback);
    std::string string(const std::string& key);
    std::string string(const std::string& key, const std::string& fallback);
    std::vector<double> numbers(const std::string& key);
    std::optional<std::vector<double>> numbers_opt(const std::string& key);
    Fields object(const std::string& key);

    const std::string& where() const { return where_; }
    std::string path(const std::string& key) const;
    void finish() const;

  private:
    const json& j_;
    std::string where_;
    std::set<std::string> used_;
};

[[noreturn]] void schema_error(const std::string& msg);

std::vector<double> numbers_of(const json& j, const std::string& where);
double alpha_of(Fields& f, double fallback = 2.0);

HurstSpec spec_from_json(const json& j, const std::string& where = "spec");
Rect rect_from_json(const json& j, const std::string& where = "rect");
QuadratureSpec quad_from_json(const json* j, const std::string& where = "quad");

// FNV-1a 64 of a byte string.
std::uint64_t fnv1a64(const std::string& bytes);
// Fixed 17-significant-digit formatting, so CSV values round-trip.
std::string format_double(double v);

}  // namespace lmss
