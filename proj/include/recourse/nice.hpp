#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "recourse/counterfactual_set.hpp"
#include "recourse/distance.hpp"
#include "recourse/error.hpp"
#include "recourse/objectives.hpp"
#include "recourse/predictor.hpp"
#include "recourse/schema.hpp"

namespace recourse {

enum class NiceReward { sparsity, proximity, plausibility };

inline std::string_view to_string(NiceReward r) {
    switch (r) {
    case NiceReward::sparsity: return "sparsity";
    case NiceReward::proximity: return "proximity";
    default: return "plausibility";
    }
}

inline NiceReward parse_nice_reward(std::string_view s) {
    if (s == "sparsity") return NiceReward::sparsity;
    if (s == "proximity") return NiceReward::proximity;
    if (s == "plausibility") return NiceReward::plausibility;
    throw Error(ErrorCode::invalid_argument, "unknown NICE optimization '" + std::string(s) + "'");
}

struct NiceConfig {
    NiceReward optimization = NiceReward::sparsity;
    bool x_nn_correct = true;
    // Regression only; unset means half the median absolute residual.
    std::optional<double> margin_correct;
    bool return_multiple = false;
    bool finish_early = true;
    std::string distance_function = "gower";
};

inline json to_json(const NiceConfig& c) {
    return {{"optimization", std::string(to_string(c.optimization))},
            {"x_nn_correct", c.x_nn_correct},
            {"margin_correct", c.margin_correct ? json(*c.margin_correct) : json(nullptr)},
            {"return_multiple", c.return_multiple},
            {"finish_early", c.finish_early},
            {"distance_function", c.distance_function}};
}

inline NiceConfig nice_config_from_json(const json& j, NiceConfig c = {}) {
    if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "NICE config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "optimization") c.optimization = parse_nice_reward(v.get<std::string>());
            else if (key == "x_nn_correct") c.x_nn_correct = v.get<bool>();
            else if (key == "margin_correct")
                c.margin_correct = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
            else if (key == "return_multiple") c.return_multiple = v.get<bool>();
            else if (key == "finish_early") c.finish_early = v.get<bool>();
            else if (key == "distance_function") c.distance_function = v.get<std::string>();
            else throw Error(ErrorCode::invalid_argument, "unknown NICE config field '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("bad NICE config value: ") + e.what());
    }
    return c;
}

// Half the median |f̂(x_i) - y_i| over the dataset (regression outcomes).
inline double default_margin_correct(const PredictionFunction& f, const Dataset& data) {
    if (!data.outcomes() || data.outcomes()->task != Task::regression)
        throw Error(ErrorCode::invalid_argument, "margin_correct default needs regression outcomes");
    if (data.empty()) throw Error(ErrorCode::empty_dataset, "cannot derive margin_correct from an empty dataset");
    auto scores = f.predict_batch(data.rows());
    std::vector<double> res;
    for (std::size_t i = 0; i < data.size(); ++i) res.push_back(std::abs(scores[i].at(0) - data.outcomes()->values[i]));
    std::sort(res.begin(), res.end());
    const std::size_t n = res.size();
    double median = n % 2 ? res[n / 2] : 0.5 * (res[n / 2 - 1] + res[n / 2]);
    return 0.5 * median;
}

struct NearestInstance {
    Instance instance;
    std::size_t row = 0;
    double distance = 0.0;
};

// Nearest training row predicted inside Y' and, with x_nn_correct, predicted
// correctly (hard label matches for classification, residual within the
// margin for regression). Ties go to the lower row index.
inline NearestInstance find_x_nn(const Instance& x_star, const Dataset& data, const PredictionFunction& f,
                                 const DesiredTarget& target, const NiceConfig& cfg,
                                 const DistanceRegistry& registry = DistanceRegistry::builtin()) {
    detail::check_arity(x_star, data.schema());
    const auto& dist = registry.get(cfg.distance_function);
    if (data.empty()) throw Error(ErrorCode::no_eligible_instance, "no eligible nearest instance: dataset is empty");
    const auto& out = data.outcomes();
    if (cfg.x_nn_correct) {
        if (!out) throw Error(ErrorCode::invalid_argument, "x_nn_correct needs a dataset with outcomes");
        if (out->task != f.task()) throw Error(ErrorCode::invalid_argument, "outcome task does not match predictor");
    }
    const std::size_t c = class_index(f, target);
    auto scores = f.predict_batch(data.rows());
    double margin = 0.0;
    if (cfg.x_nn_correct && f.task() == Task::regression)
        margin = cfg.margin_correct ? *cfg.margin_correct : default_margin_correct(f, data);

    std::vector<std::size_t> eligible;
    std::vector<Instance> rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!target.contains(scores[i].at(c))) continue;
        if (cfg.x_nn_correct) {
            bool correct = f.task() == Task::classification ? hard_label(f, scores[i]) == out->labels[i]
                                                             : std::abs(scores[i][0] - out->values[i]) <= margin;
            if (!correct) continue;
        }
        eligible.push_back(i);
        rows.push_back(data.row(i));
    }
    if (eligible.empty()) throw Error(ErrorCode::no_eligible_instance, "no eligible nearest instance");
    Matrix d = dist(rows, std::span<const Instance>(&x_star, 1), data);
    std::size_t best = 0;
    for (std::size_t e = 1; e < eligible.size(); ++e)
        if (d(e, 0) < d(best, 0)) best = e;
    return {rows[best], eligible[best], d(best, 0)};
}

namespace detail {

inline double checked_reward(double numerator, double denominator) {
    double r = numerator / denominator;
    if (!std::isfinite(denominator) || denominator <= 0.0 || !std::isfinite(r))
        throw Error(ErrorCode::degenerate_reward, "degenerate reward denominator");
    return r;
}

// Rewards of all candidates against one incumbent, one predictor call.
inline std::vector<double> rewards(std::span<const Instance> cands, std::span<const double> cand_valid,
                                   const Instance& prev, double prev_valid, const Instance& x_star,
                                   const Dataset& data, const NiceConfig& cfg, const DistanceFunction& dist) {
    std::vector<double> denom(cands.size(), 1.0);
    if (cfg.optimization == NiceReward::proximity) {
        Matrix dc = dist(cands, std::span<const Instance>(&x_star, 1), data);
        Matrix dp = dist(std::span<const Instance>(&prev, 1), std::span<const Instance>(&x_star, 1), data);
        for (std::size_t i = 0; i < cands.size(); ++i) denom[i] = std::max(dc(i, 0) - dp(0, 0), 1e-12);
    } else if (cfg.optimization == NiceReward::plausibility) {
        auto pl = o_plaus_batch(cands, data, PlausibilityConfig{1, {}}, dist);
        for (std::size_t i = 0; i < cands.size(); ++i) denom[i] = std::max(pl[i], 1e-12);
    }
    std::vector<double> out;
    out.reserve(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) out.push_back(checked_reward(prev_valid - cand_valid[i], denom[i]));
    return out;
}

} // namespace detail

// Validity gain of `candidate` over `prev_best`, divided by the configured
// cost of the step.
inline double reward(const Instance& candidate, const Instance& prev_best, const Instance& x_star,
                     const PredictionFunction& f, const DesiredTarget& target, const Dataset& data,
                     const NiceConfig& cfg, const DistanceRegistry& registry = DistanceRegistry::builtin()) {
    std::vector<Instance> both{candidate, prev_best};
    auto s = predict_scores(f, both, target);
    double cv = o_valid(s[0], target);
    return detail::rewards(std::span<const Instance>(&candidate, 1), std::span<const double>(&cv, 1), prev_best,
                           o_valid(s[1], target), x_star, data, cfg, registry.get(cfg.distance_function))
        .front();
}

struct NiceResult {
    CounterfactualSet set;
    NearestInstance x_nn;
    // Every candidate created, in creation order.
    std::vector<Instance> archive;
    Instance final_best;
    std::size_t iterations = 0;
};

inline NiceResult find_counterfactuals_nice(const PredictionFunction& f, const Instance& x_star,
                                            const DesiredTarget& target, const Dataset& data, const NiceConfig& cfg,
                                            const DistanceRegistry& registry = DistanceRegistry::builtin()) {
    target.validate(f.task());
    const auto& dist = registry.get(cfg.distance_function);
    auto nn = find_x_nn(x_star, data, f, target, cfg, registry);

    std::vector<std::size_t> J;
    for (std::size_t j = 0; j < x_star.size(); ++j)
        if (x_star[j] != nn.instance[j]) J.push_back(j);
    const std::size_t d = J.size();

    Instance best = x_star;
    double best_valid = o_valid(predict_score(f, best, target), target);
    std::vector<Instance> archive;
    std::vector<double> archive_valid;
    std::size_t iterations = 0;
    while (!J.empty() && !(cfg.finish_early && best_valid == 0.0)) {
        std::vector<Instance> cands;
        for (auto j : J) {
            Instance c = best;
            c[j] = nn.instance[j];
            cands.push_back(std::move(c));
        }
        auto scores = predict_scores(f, cands, target);
        std::vector<double> valid;
        for (double s : scores) valid.push_back(o_valid(s, target));
        auto r = detail::rewards(cands, valid, best, best_valid, x_star, data, cfg, dist);
        std::size_t pick = 0;
        for (std::size_t i = 1; i < r.size(); ++i)
            if (r[i] > r[pick]) pick = i;
        for (std::size_t i = 0; i < cands.size(); ++i) {
            archive.push_back(cands[i]);
            archive_valid.push_back(valid[i]);
        }
        best = cands[pick];
        best_valid = valid[pick];
        J.erase(J.begin() + static_cast<std::ptrdiff_t>(pick));
        ++iterations;
    }

    NiceResult result{CounterfactualSet(data.schema(), x_star, target, "nice"), nn, std::move(archive), best,
                      iterations};
    if (cfg.return_multiple) {
        for (std::size_t i = 0; i < result.archive.size(); ++i)
            if (archive_valid[i] == 0.0) result.set.add(result.archive[i]);
    } else if (best_valid == 0.0) {
        result.set.add(best);
    }
    result.set.provenance() = {{"method", "nice"}, {"config", to_json(cfg)}};
    result.set.diagnostics() = {{"x_nn_row", nn.row},
                                {"d", d},
                                {"iterations", iterations},
                                {"archive_size", result.archive.size()}};
    return result;
}

// Union of the three reward runs (finish_early off, return_multiple on),
// duplicates removed, in run order sparsity, proximity, plausibility.
inline CounterfactualSet nice_multi_reward_union(const PredictionFunction& f, const Instance& x_star,
                                                 const DesiredTarget& target, const Dataset& data, NiceConfig base,
                                                 const DistanceRegistry& registry = DistanceRegistry::builtin()) {
    base.finish_early = false;
    base.return_multiple = true;
    CounterfactualSet out(data.schema(), x_star, target, "nice-union");
    json sizes = json::object();
    for (auto opt : {NiceReward::sparsity, NiceReward::proximity, NiceReward::plausibility}) {
        base.optimization = opt;
        auto r = find_counterfactuals_nice(f, x_star, target, data, base, registry);
        sizes[std::string(to_string(opt))] = r.set.size();
        for (const auto& x : r.set.counterfactuals()) out.add(x);
        out.diagnostics()["x_nn_row"] = r.x_nn.row;
    }
    out.diagnostics()["per_reward"] = sizes;
    base.optimization = NiceReward::sparsity;
    json cfg = to_json(base);
    cfg.erase("optimization");
    out.provenance() = {{"method", "nice-union"}, {"config", cfg}};
    return out;
}

} // namespace recourse
