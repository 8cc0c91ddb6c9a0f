#pragma once

#include <map>
#include <string>

#include "recourse/counterfactual_set.hpp"
#include "recourse/error.hpp"
#include "recourse/external_predictor.hpp"
#include "recourse/moc.hpp"
#include "recourse/nice.hpp"
#include "recourse/predictor.hpp"
#include "recourse/schema.hpp"
#include "recourse/whatif.hpp"

namespace recourse {

// Parsed form of "builtin:NAME:key=value,..." or "exec:COMMAND".
struct PredictorSpec {
    std::string kind;  // knn | logistic | threshold | exec
    std::map<std::string, std::string> params;
    std::string command;
};

inline PredictorSpec parse_predictor_spec(const std::string& text) {
    PredictorSpec spec;
    if (text.rfind("exec:", 0) == 0) {
        spec.kind = "exec";
        spec.command = text.substr(5);
        if (spec.command.empty()) throw Error(ErrorCode::invalid_argument, "exec predictor needs a command");
        return spec;
    }
    if (text.rfind("builtin:", 0) != 0)
        throw Error(ErrorCode::invalid_argument, "predictor must start with 'builtin:' or 'exec:': " + text);
    std::string rest = text.substr(8);
    auto colon = rest.find(':');
    spec.kind = rest.substr(0, colon);
    if (spec.kind != "knn" && spec.kind != "logistic" && spec.kind != "threshold")
        throw Error(ErrorCode::invalid_argument, "unknown builtin predictor '" + spec.kind + "'");
    if (colon == std::string::npos) return spec;
    std::string params = rest.substr(colon + 1);
    std::size_t start = 0;
    while (start <= params.size()) {
        auto comma = params.find(',', start);
        std::string item = params.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!item.empty()) {
            auto eq = item.find('=');
            if (eq == std::string::npos || eq == 0)
                throw Error(ErrorCode::invalid_argument, "predictor parameter must be key=value: " + item);
            spec.params[item.substr(0, eq)] = item.substr(eq + 1);
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return spec;
}

namespace detail {

inline double spec_number(const PredictorSpec& spec, const std::string& key, double fallback) {
    auto it = spec.params.find(key);
    if (it == spec.params.end()) return fallback;
    auto v = parse_double(it->second);
    if (!v) throw Error(ErrorCode::invalid_argument, "predictor parameter " + key + " is not a number");
    return *v;
}

inline void check_params(const PredictorSpec& spec, std::initializer_list<const char*> allowed) {
    for (const auto& [k, v] : spec.params) {
        bool ok = false;
        for (auto* a : allowed) ok = ok || k == a;
        if (!ok) throw Error(ErrorCode::invalid_argument, "unknown parameter '" + k + "' for " + spec.kind);
    }
}

} // namespace detail

// Builds (and, for learners, fits on `data`) the predictor a spec describes.
inline PredictorPtr make_predictor(const PredictorSpec& spec, const Dataset& data,
                                   ExternalPredictorOptions options = {}) {
    if (spec.kind == "exec") {
        Task task = data.outcomes() ? data.outcomes()->task : Task::classification;
        return spawn_external_predictor(spec.command, data.schema(), task, options);
    }
    if (spec.kind == "knn") {
        detail::check_params(spec, {"k"});
        return fit_knn(data, static_cast<int>(detail::spec_number(spec, "k", 5)));
    }
    if (spec.kind == "logistic") {
        detail::check_params(spec, {"epochs", "lr"});
        return fit_logistic(data, static_cast<int>(detail::spec_number(spec, "epochs", 500)),
                            detail::spec_number(spec, "lr", 0.1));
    }
    detail::check_params(spec, {"feature", "cut"});
    auto feat = spec.params.find("feature");
    if (feat == spec.params.end() || !spec.params.count("cut"))
        throw Error(ErrorCode::invalid_argument, "threshold predictor needs feature=NAME,cut=V");
    std::vector<std::string> labels{"0", "1"};
    if (data.outcomes() && data.outcomes()->task == Task::classification) {
        auto l = sorted_labels(*data.outcomes());
        if (l.size() == 2) labels = l;
    }
    return std::make_shared<ThresholdModel>(data.schema(), feat->second, detail::spec_number(spec, "cut", 0.0),
                                            labels);
}

inline PredictorPtr make_predictor(const std::string& text, const Dataset& data, ExternalPredictorOptions options = {}) {
    return make_predictor(parse_predictor_spec(text), data, options);
}

// Per-method configuration bundle.
struct MethodConfigs {
    MocConfig moc;
    WhatIfConfig whatif;
    NiceConfig nice;
};

inline const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names{"moc", "whatif", "nice", "nice-union"};
    return names;
}

inline CounterfactualSet run_method(const std::string& method, const PredictorPtr& f, const Instance& x_star,
                                    const DesiredTarget& target, const Dataset& data, const MethodConfigs& cfg) {
    if (method == "moc") return find_counterfactuals_moc(f, x_star, target, data, cfg.moc).set;
    if (method == "whatif") return find_counterfactuals_whatif(*f, x_star, target, data, cfg.whatif);
    if (method == "nice") return find_counterfactuals_nice(*f, x_star, target, data, cfg.nice).set;
    if (method == "nice-union") return nice_multi_reward_union(*f, x_star, target, data, cfg.nice);
    throw Error(ErrorCode::invalid_argument, "unknown method '" + method + "'");
}

} // namespace recourse
