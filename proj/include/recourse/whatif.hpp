#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "recourse/counterfactual_set.hpp"
#include "recourse/distance.hpp"
#include "recourse/error.hpp"
#include "recourse/objectives.hpp"
#include "recourse/predictor.hpp"
#include "recourse/schema.hpp"

namespace recourse {

struct WhatIfConfig {
    std::size_t n_counterfactuals = 1;
    std::map<std::string, double> lower;
    std::map<std::string, double> upper;
    std::string distance_function = "gower";

    void validate() const {
        if (n_counterfactuals < 1) throw Error(ErrorCode::invalid_argument, "n_counterfactuals must be at least 1");
    }
};

inline json to_json(const WhatIfConfig& c) {
    return {{"n_counterfactuals", c.n_counterfactuals},
            {"lower", c.lower},
            {"upper", c.upper},
            {"distance_function", c.distance_function}};
}

inline WhatIfConfig whatif_config_from_json(const json& j, WhatIfConfig c = {}) {
    if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "WhatIf config must be a JSON object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "n_counterfactuals") c.n_counterfactuals = v.get<std::size_t>();
            else if (key == "lower") c.lower = v.get<std::map<std::string, double>>();
            else if (key == "upper") c.upper = v.get<std::map<std::string, double>>();
            else if (key == "distance_function") c.distance_function = v.get<std::string>();
            else throw Error(ErrorCode::invalid_argument, "unknown WhatIf config field '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("bad WhatIf config value: ") + e.what());
    }
    c.validate();
    return c;
}

// The l training rows closest to x⋆ among those predicted inside Y' (and
// inside any lower/upper bounds), ascending by (distance, row index). Rows
// equal to x⋆ are never eligible. Duplicate rows are selected like any other
// row and then collapse inside the set; diagnostics list the selected rows.
inline CounterfactualSet find_counterfactuals_whatif(const PredictionFunction& f, const Instance& x_star,
                                                     const DesiredTarget& target, const Dataset& data,
                                                     const WhatIfConfig& cfg,
                                                     const DistanceRegistry& registry = DistanceRegistry::builtin()) {
    cfg.validate();
    target.validate(f.task());
    const auto& schema = data.schema();
    detail::check_arity(x_star, schema);
    const auto& dist = registry.get(cfg.distance_function);

    std::vector<std::pair<std::size_t, double>> lo, hi;
    for (const auto& [name, v] : cfg.lower) lo.emplace_back(schema.index_of(name), v);
    for (const auto& [name, v] : cfg.upper) hi.emplace_back(schema.index_of(name), v);

    CounterfactualSet set(schema, x_star, target, "whatif");
    set.provenance() = {{"method", "whatif"}, {"config", to_json(cfg)}};

    std::vector<double> scores = data.empty() ? std::vector<double>{} : predict_scores(f, data.rows(), target);
    std::vector<std::size_t> eligible;
    std::vector<Instance> eligible_rows;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& r = data.row(i);
        if (!target.contains(scores[i]) || r == x_star) continue;
        bool inside = true;
        for (auto [j, v] : lo) inside = inside && r[j] >= v;
        for (auto [j, v] : hi) inside = inside && r[j] <= v;
        if (!inside) continue;
        eligible.push_back(i);
        eligible_rows.push_back(r);
    }

    std::vector<double> d(eligible.size());
    if (!eligible.empty()) {
        Matrix m = dist(eligible_rows, std::span<const Instance>(&x_star, 1), data);
        for (std::size_t e = 0; e < eligible.size(); ++e) d[e] = m(e, 0);
    }
    auto pick = k_smallest(d, cfg.n_counterfactuals);

    json rows = json::array(), dists = json::array();
    for (auto e : pick) {
        set.add(eligible_rows[e]);
        rows.push_back(eligible[e]);
        dists.push_back(d[e]);
    }
    set.diagnostics() = {{"n_eligible", eligible.size()},
                         {"short", eligible.size() < cfg.n_counterfactuals},
                         {"row_indices", rows},
                         {"distances", dists}};
    if (eligible.empty()) set.diagnostics()["note"] = "no training row is predicted inside the desired interval";
    return set;
}

} // namespace recourse
