#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "recourse/error.hpp"
#include "recourse/schema.hpp"

namespace recourse {

// Dense row-major matrix of pairwise distances.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    [[nodiscard]] std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

// (batch A, batch B, context data) -> |A| x |B| matrix of non-negative reals.
using DistanceFunction =
    std::function<Matrix(std::span<const Instance>, std::span<const Instance>, const Dataset&)>;

namespace detail {

inline void check_arity(const Instance& x, const FeatureSchema& schema) {
    if (x.size() != schema.size())
        throw Error(ErrorCode::schema, "instance arity " + std::to_string(x.size()) + " does not match schema arity " +
                                           std::to_string(schema.size()));
}

// Per-feature Gower term. Zero-range numeric features fall back to the
// categorical indicator.
inline double gower_term(bool numeric, double range, double a, double b) {
    if (!numeric || range == 0.0) return a == b ? 0.0 : 1.0;
    return std::abs(a - b) / range;
}

} // namespace detail

inline double gower_distance(const Instance& a, const Instance& b, const Dataset& data) {
    const auto& schema = data.schema();
    detail::check_arity(a, schema);
    detail::check_arity(b, schema);
    double sum = 0.0;
    for (std::size_t j = 0; j < schema.size(); ++j)
        sum += detail::gower_term(schema[j].is_numeric(), data.range_hat(j), a[j], b[j]);
    return sum / static_cast<double>(schema.size());
}

inline Matrix gower_matrix(std::span<const Instance> a, std::span<const Instance> b, const Dataset& data) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k) m(i, k) = gower_distance(a[i], b[k], data);
    return m;
}

// Flat-array variant: feature kinds and ranges hoisted out of the inner loop,
// B copied once into contiguous storage. Performs the same floating-point
// operations in the same order as gower_distance.
inline Matrix gower_matrix_fast(std::span<const Instance> a, std::span<const Instance> b, const Dataset& data) {
    const auto& schema = data.schema();
    const std::size_t p = schema.size();
    std::vector<double> range(p);
    std::vector<unsigned char> indicator(p);
    for (std::size_t j = 0; j < p; ++j) {
        range[j] = data.range_hat(j);
        indicator[j] = !schema[j].is_numeric() || range[j] == 0.0;
    }
    std::vector<double> flat_b;
    flat_b.reserve(b.size() * p);
    for (const auto& x : b) {
        detail::check_arity(x, schema);
        flat_b.insert(flat_b.end(), x.values.begin(), x.values.end());
    }
    const double denom = static_cast<double>(p);
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        detail::check_arity(a[i], schema);
        const double* av = a[i].values.data();
        double* out = m.data.data() + i * b.size();
        for (std::size_t k = 0; k < b.size(); ++k) {
            const double* bv = flat_b.data() + k * p;
            double sum = 0.0;
            for (std::size_t j = 0; j < p; ++j)
                sum += indicator[j] ? (av[j] == bv[j] ? 0.0 : 1.0) : std::abs(av[j] - bv[j]) / range[j];
            out[k] = sum / denom;
        }
    }
    return m;
}

inline int l0_count(const Instance& a, const Instance& b) {
    int n = 0;
    for (std::size_t j = 0; j < a.size(); ++j) n += a[j] != b[j];
    return n;
}

inline Matrix l0_matrix(std::span<const Instance> a, std::span<const Instance> b, const Dataset& data) {
    const auto& schema = data.schema();
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        detail::check_arity(a[i], schema);
        for (std::size_t k = 0; k < b.size(); ++k) {
            detail::check_arity(b[k], schema);
            m(i, k) = l0_count(a[i], b[k]);
        }
    }
    return m;
}

// Named distance functions. Built-ins: "gower" (default), "gower_fast", "l0".
class DistanceRegistry {
public:
    DistanceRegistry() {
        fns_.emplace("gower", DistanceFunction(gower_matrix));
        fns_.emplace("gower_fast", DistanceFunction(gower_matrix_fast));
        fns_.emplace("l0", DistanceFunction(l0_matrix));
    }

    static const DistanceRegistry& builtin() {
        static const DistanceRegistry registry;
        return registry;
    }

    void add(const std::string& name, DistanceFunction fn) {
        if (!fn) throw Error(ErrorCode::invalid_argument, "cannot register an empty distance function");
        fns_[name] = std::move(fn);
    }

    [[nodiscard]] bool contains(const std::string& name) const { return fns_.count(name) != 0; }

    [[nodiscard]] const DistanceFunction& get(const std::string& name) const {
        auto it = fns_.find(name);
        if (it == fns_.end()) throw Error(ErrorCode::invalid_argument, "unknown distance function '" + name + "'");
        return it->second;
    }

    [[nodiscard]] std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [k, v] : fns_) out.push_back(k);
        return out;
    }

private:
    std::map<std::string, DistanceFunction> fns_;
};

// Indices of the k smallest entries, ascending by (value, index).
inline std::vector<std::size_t> k_smallest(std::span<const double> values, std::size_t k) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    k = std::min(k, idx.size());
    auto less = [&](std::size_t a, std::size_t b) {
        return values[a] < values[b] || (values[a] == values[b] && a < b);
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), less);
    idx.resize(k);
    return idx;
}

} // namespace recourse
