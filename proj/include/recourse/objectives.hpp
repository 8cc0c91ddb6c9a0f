#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "recourse/distance.hpp"
#include "recourse/error.hpp"
#include "recourse/predictor.hpp"
#include "recourse/schema.hpp"

namespace recourse {

// (o_valid, o_prox, o_sparse, o_plaus), all minimized.
struct ObjectiveVector {
    double valid = 0.0;
    double prox = 0.0;
    double sparse = 0.0;
    double plaus = 0.0;

    static constexpr std::size_t arity = 4;

    [[nodiscard]] std::vector<double> to_vector() const { return {valid, prox, sparse, plaus}; }
    [[nodiscard]] double operator[](std::size_t i) const {
        switch (i) {
        case 0: return valid;
        case 1: return prox;
        case 2: return sparse;
        default: return plaus;
        }
    }
    friend bool operator==(const ObjectiveVector&, const ObjectiveVector&) = default;
};

// Objective names as used by the evaluation tables.
inline constexpr std::array<const char*, 4> kObjectiveNames = {"dist_target", "dist_x_interest", "no_changed",
                                                               "dist_train"};

inline std::size_t objective_index(std::string_view name) {
    static constexpr std::array<const char*, 4> alt = {"o_valid", "o_prox", "o_sparse", "o_plaus"};
    for (std::size_t i = 0; i < 4; ++i)
        if (name == kObjectiveNames[i] || name == alt[i]) return i;
    throw Error(ErrorCode::invalid_argument, "unknown objective '" + std::string(name) + "'");
}

// Distance of a prediction to the closed desired interval.
inline double o_valid(double score, const DesiredTarget& target) {
    if (target.contains(score)) return 0.0;
    return std::min(std::abs(score - target.lower), std::abs(score - target.upper));
}

inline int o_sparse(const Instance& a, const Instance& b) {
    if (a.size() != b.size()) throw Error(ErrorCode::schema, "instances differ in arity");
    return l0_count(a, b);
}

struct PlausibilityConfig {
    std::size_t k = 1;
    // Empty means uniform weights 1/k.
    std::vector<double> weights;

    void validate(std::size_t n) const {
        if (k == 0) throw Error(ErrorCode::invalid_argument, "plausibility k must be positive");
        if (k > n) throw Error(ErrorCode::invalid_argument, "plausibility k exceeds the number of training rows");
        if (!weights.empty()) {
            if (weights.size() != k) throw Error(ErrorCode::invalid_argument, "need exactly k plausibility weights");
            double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
            if (std::abs(sum - 1.0) > 1e-12) throw Error(ErrorCode::invalid_argument, "plausibility weights must sum to 1");
            for (double w : weights)
                if (w < 0) throw Error(ErrorCode::invalid_argument, "plausibility weights must be non-negative");
        }
    }

    [[nodiscard]] double weight(std::size_t i) const {
        return weights.empty() ? 1.0 / static_cast<double>(k) : weights[i];
    }
};

// Weighted distance of each candidate to its k nearest training rows (ties by
// row index).
inline std::vector<double> o_plaus_batch(std::span<const Instance> xs, const Dataset& data,
                                         const PlausibilityConfig& cfg, const DistanceFunction& dist) {
    cfg.validate(data.size());
    Matrix d = dist(xs, data.rows(), data);
    std::vector<double> out;
    out.reserve(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        auto row = d.row(i);
        auto nn = k_smallest(row, cfg.k);
        double sum = 0.0;
        for (std::size_t r = 0; r < nn.size(); ++r) sum += cfg.weight(r) * row[nn[r]];
        out.push_back(sum);
    }
    return out;
}

inline double o_plaus(const Instance& x, const Dataset& data, const PlausibilityConfig& cfg,
                      const DistanceFunction& dist) {
    return o_plaus_batch(std::span<const Instance>(&x, 1), data, cfg, dist).front();
}

// Objective vectors for a batch of candidates; one predictor call per batch.
inline std::vector<ObjectiveVector> evaluate_objectives_batch(std::span<const Instance> xs, const Instance& x_star,
                                                              const PredictionFunction& f,
                                                              const DesiredTarget& target, const Dataset& data,
                                                              const PlausibilityConfig& cfg,
                                                              const DistanceFunction& dist) {
    std::vector<ObjectiveVector> out(xs.size());
    if (xs.empty()) return out;
    auto scores = predict_scores(f, xs, target);
    if (scores.size() != xs.size()) throw Error(ErrorCode::predictor, "predictor returned wrong number of rows");
    Matrix prox = dist(xs, std::span<const Instance>(&x_star, 1), data);
    auto plaus = o_plaus_batch(xs, data, cfg, dist);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out[i].valid = o_valid(scores[i], target);
        out[i].prox = prox(i, 0);
        out[i].sparse = o_sparse(xs[i], x_star);
        out[i].plaus = plaus[i];
    }
    return out;
}

inline ObjectiveVector evaluate_objectives(const Instance& x, const Instance& x_star, const PredictionFunction& f,
                                           const DesiredTarget& target, const Dataset& data,
                                           const PlausibilityConfig& cfg, const DistanceFunction& dist) {
    return evaluate_objectives_batch(std::span<const Instance>(&x, 1), x_star, f, target, data, cfg, dist).front();
}

} // namespace recourse
