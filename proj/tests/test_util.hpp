#pragma once

// Shared fixtures and independent reference computations for the test suites.
// The oracles below recompute quantities from first principles and do not
// call into the engine's distance or objective code.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <unistd.h>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "recourse/schema.hpp"

namespace testutil {

using recourse::Dataset;
using recourse::FeatureDescriptor;
using recourse::FeatureSchema;
using recourse::Instance;
using recourse::Outcomes;
using recourse::Task;

// Numeric features num0..num{p_num-1} (uniform on [0, 10], some integer
// valued), categorical cat0.. with 2-4 levels, binary outcome.
inline Dataset random_mixed_dataset(std::size_t n, std::size_t p_num, std::size_t p_cat, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<FeatureDescriptor> feats;
    for (std::size_t j = 0; j < p_num; ++j)
        feats.push_back(FeatureDescriptor::numeric("num" + std::to_string(j), 0.0, 10.0, j % 3 == 2));
    std::vector<std::size_t> n_levels;
    for (std::size_t j = 0; j < p_cat; ++j) {
        std::size_t L = 2 + (j % 3);
        n_levels.push_back(L);
        std::vector<std::string> lv;
        for (std::size_t l = 0; l < L; ++l) lv.push_back(std::string(1, static_cast<char>('a' + l)));
        feats.push_back(FeatureDescriptor::categorical("cat" + std::to_string(j), lv));
    }
    std::vector<Instance> rows;
    Outcomes out{"y", Task::classification, {}, {}};
    for (std::size_t i = 0; i < n; ++i) {
        Instance x;
        for (std::size_t j = 0; j < p_num; ++j) {
            double v = u(rng);
            x.values.push_back(j % 3 == 2 ? std::round(v) : v);
        }
        for (std::size_t j = 0; j < p_cat; ++j)
            x.values.push_back(static_cast<double>(std::uniform_int_distribution<std::size_t>(0, n_levels[j] - 1)(rng)));
        out.labels.push_back(u(rng) < 5.0 ? "0" : "1");
        rows.push_back(std::move(x));
    }
    return Dataset(FeatureSchema(std::move(feats)), std::move(rows), std::move(out));
}

// A random instance inside the dataset's observed ranges.
inline Instance random_instance(const Dataset& data, std::mt19937_64& rng) {
    const auto& schema = data.schema();
    Instance x;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema[j].is_categorical()) {
            x.values.push_back(
                static_cast<double>(std::uniform_int_distribution<std::size_t>(0, schema[j].levels.size() - 1)(rng)));
        } else {
            double lo = data.observed_min(j), hi = data.observed_max(j);
            double v = std::uniform_real_distribution<double>(lo, hi)(rng);
            x.values.push_back(schema[j].integer_valued ? std::round(v) : v);
        }
    }
    return x;
}

// Gower distance recomputed from the raw rows: per-feature range from a
// fresh min/max scan, indicator for categorical and zero-range features.
inline double oracle_gower(const Instance& a, const Instance& b, const Dataset& data) {
    const auto& schema = data.schema();
    double total = 0.0;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        if (schema[j].is_categorical()) {
            total += a[j] == b[j] ? 0.0 : 1.0;
            continue;
        }
        double lo = 1e300, hi = -1e300;
        for (const auto& r : data.rows()) {
            lo = std::min(lo, r[j]);
            hi = std::max(hi, r[j]);
        }
        double range = hi - lo;
        if (range == 0.0) total += a[j] == b[j] ? 0.0 : 1.0;
        else total += std::fabs(a[j] - b[j]) / range;
    }
    return total / static_cast<double>(schema.size());
}

inline int oracle_l0(const Instance& a, const Instance& b) {
    int n = 0;
    for (std::size_t j = 0; j < a.size(); ++j)
        if (a[j] != b[j]) ++n;
    return n;
}

// Full sort of all training-row distances, weighted sum of the k smallest.
inline double oracle_plaus(const Instance& x, const Dataset& data, std::size_t k, const std::vector<double>& w = {}) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < data.size(); ++i) d.emplace_back(oracle_gower(x, data.row(i), data), i);
    std::sort(d.begin(), d.end());
    double sum = 0.0;
    for (std::size_t r = 0; r < k; ++r) sum += (w.empty() ? 1.0 / static_cast<double>(k) : w[r]) * d[r].first;
    return sum;
}

inline double oracle_valid(double score, double lo, double hi) {
    if (score < lo) return lo - score;
    if (score > hi) return score - hi;
    return 0.0;
}

// Plain pairwise domination for minimization.
inline bool oracle_dominates(const std::vector<double>& a, const std::vector<double>& b) {
    bool all_le = true, any_lt = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) all_le = false;
        if (a[i] < b[i]) any_lt = true;
    }
    return all_le && any_lt;
}

// Fresh, empty scratch directory below the system temp dir.
inline std::string scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("recourse_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

} // namespace testutil
