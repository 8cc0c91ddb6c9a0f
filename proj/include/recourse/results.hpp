#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "recourse/counterfactual_set.hpp"
#include "recourse/csv.hpp"
#include "recourse/distance.hpp"
#include "recourse/error.hpp"
#include "recourse/objectives.hpp"
#include "recourse/pareto.hpp"
#include "recourse/predictor.hpp"
#include "recourse/schema.hpp"
#include "recourse/svg.hpp"

namespace recourse {

// ---------------------------------------------------------------------------
// Evaluation table

struct EvaluationTable {
    std::vector<std::string> features;
    // Per counterfactual and feature: the value, or with show_diff the change
    // against x⋆ ("NA" when unchanged).
    std::vector<std::vector<std::string>> cells;
    std::vector<std::string> measures;
    std::vector<std::vector<double>> values;
    std::vector<ObjectiveVector> objectives;

    [[nodiscard]] std::size_t size() const noexcept { return cells.size(); }

    [[nodiscard]] std::string to_csv() const {
        std::ostringstream out;
        csv::Row header = features;
        header.insert(header.end(), measures.begin(), measures.end());
        csv::write_row(out, header);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            csv::Row row = cells[i];
            for (double v : values[i]) row.push_back(format_double(v));
            csv::write_row(out, row);
        }
        return out.str();
    }

    [[nodiscard]] json to_json() const {
        json rows = json::array();
        for (std::size_t i = 0; i < cells.size(); ++i) {
            json r = json::object();
            for (std::size_t j = 0; j < features.size(); ++j) r[features[j]] = cells[i][j];
            for (std::size_t m = 0; m < measures.size(); ++m) r[measures[m]] = values[i][m];
            rows.push_back(std::move(r));
        }
        return rows;
    }
};

inline std::vector<std::string> all_measures() { return {kObjectiveNames.begin(), kObjectiveNames.end()}; }

// One row per counterfactual, in set order. Measure columns follow the
// requested order; names are dist_target, dist_x_interest, no_changed,
// dist_train.
inline EvaluationTable evaluate(const CounterfactualSet& set, const PredictionFunction& f, const Dataset& data,
                                bool show_diff = false, const std::vector<std::string>& measures = all_measures(),
                                const PlausibilityConfig& plaus = {},
                                const DistanceFunction& dist = DistanceRegistry::builtin().get("gower")) {
    const auto& schema = set.schema();
    if (!(schema == data.schema())) throw Error(ErrorCode::schema, "set and dataset use different schemas");
    EvaluationTable t;
    t.features = schema.names();
    std::vector<std::size_t> idx;
    for (const auto& m : measures) {
        idx.push_back(objective_index(m));
        t.measures.push_back(kObjectiveNames[idx.back()]);
    }
    const auto& xs = set.counterfactuals();
    t.objectives = evaluate_objectives_batch(xs, set.x_star(), f, set.target(), data, plaus, dist);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        std::vector<std::string> cells;
        for (std::size_t j = 0; j < schema.size(); ++j) {
            double v = xs[i][j], s = set.x_star()[j];
            if (!show_diff) cells.push_back(schema.format_value(j, v));
            else if (v == s) cells.push_back("NA");
            else if (schema[j].is_numeric()) cells.push_back(format_double(v - s));
            else cells.push_back(schema.format_value(j, v));
        }
        t.cells.push_back(std::move(cells));
        std::vector<double> vals;
        for (auto m : idx) vals.push_back(t.objectives[i][m]);
        t.values.push_back(std::move(vals));
    }
    return t;
}

// Full score vectors, in set order.
inline ScoreMatrix predict_set(const CounterfactualSet& set, const PredictionFunction& f) {
    if (set.empty()) return {};
    return f.predict_batch(set.counterfactuals());
}

// ---------------------------------------------------------------------------
// Change frequencies

struct FeatureFrequency {
    std::string feature;
    double frequency = 0.0;
};

// Share of members changing each feature, descending; ties keep schema order.
inline std::vector<FeatureFrequency> freq_of_feature_changes(const CounterfactualSet& set, bool subset_zero = false) {
    if (set.empty()) throw Error(ErrorCode::empty_set, "empty set");
    const auto& schema = set.schema();
    std::vector<FeatureFrequency> out;
    for (std::size_t j = 0; j < schema.size(); ++j) {
        std::size_t n = 0;
        for (const auto& x : set.counterfactuals()) n += x[j] != set.x_star()[j];
        double freq = static_cast<double>(n) / static_cast<double>(set.size());
        if (subset_zero && n == 0) continue;
        out.push_back({schema[j].name, freq});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const FeatureFrequency& a, const FeatureFrequency& b) { return a.frequency > b.frequency; });
    return out;
}

// ---------------------------------------------------------------------------
// Parallel coordinates

struct ParallelPlot {
    std::vector<std::string> features;
    // Axis labels: min and max per feature (numeric rounded to `digits`,
    // categorical first and last level).
    std::vector<std::string> axis_min, axis_max;
    // counterfactuals first, x⋆ last; values in [0, 1].
    std::vector<std::string> line_ids;
    std::vector<std::vector<double>> lines;
    std::string svg;
};

// Numeric features are min-max scaled over set ∪ {x⋆} (zero width gives
// 0.5); categorical features map level index l to l / (L - 1).
inline ParallelPlot parallel_plot_data(const CounterfactualSet& set, std::vector<std::string> order = {},
                                       int digits = 2) {
    const auto& schema = set.schema();
    if (order.empty()) order = schema.names();
    ParallelPlot p;
    std::vector<std::size_t> cols;
    for (const auto& name : order) cols.push_back(schema.index_of(name));
    std::vector<const Instance*> members;
    for (const auto& x : set.counterfactuals()) members.push_back(&x);
    members.push_back(&set.x_star());
    for (std::size_t i = 0; i + 1 < members.size(); ++i) p.line_ids.push_back("cf" + std::to_string(i + 1));
    p.line_ids.push_back("x_interest");
    p.lines.assign(members.size(), {});

    for (auto j : cols) {
        const auto& f = schema[j];
        p.features.push_back(f.name);
        if (f.is_categorical()) {
            const double L = static_cast<double>(f.levels.size());
            p.axis_min.push_back(f.levels.front());
            p.axis_max.push_back(f.levels.back());
            for (std::size_t i = 0; i < members.size(); ++i)
                p.lines[i].push_back(L > 1 ? (*members[i])[j] / (L - 1) : 0.5);
            continue;
        }
        double lo = kInf, hi = -kInf;
        for (auto* x : members) {
            lo = std::min(lo, (*x)[j]);
            hi = std::max(hi, (*x)[j]);
        }
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.*f", digits, lo);
        p.axis_min.push_back(buf);
        std::snprintf(buf, sizeof(buf), "%.*f", digits, hi);
        p.axis_max.push_back(buf);
        for (std::size_t i = 0; i < members.size(); ++i)
            p.lines[i].push_back(hi > lo ? ((*members[i])[j] - lo) / (hi - lo) : 0.5);
    }

    const double width = 120.0 + 110.0 * static_cast<double>(std::max<std::size_t>(cols.size(), 1));
    svg::Canvas c(width, 360);
    auto px = [&](std::size_t k) { return 60.0 + 110.0 * static_cast<double>(k); };
    auto py = [](double v) { return 300.0 - 250.0 * v; };
    for (std::size_t k = 0; k < p.features.size(); ++k) {
        c.line(px(k), py(0), px(k), py(1), "#999999");
        c.text(px(k), 330, p.features[k], 10, "middle");
        c.text(px(k), py(0) + 14, p.axis_min[k], 9, "middle");
        c.text(px(k), py(1) - 6, p.axis_max[k], 9, "middle");
    }
    for (std::size_t i = 0; i < p.lines.size(); ++i) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t k = 0; k < p.lines[i].size(); ++k) pts.emplace_back(px(k), py(p.lines[i][k]));
        bool star = i + 1 == p.lines.size();
        c.polyline(pts, star ? "black" : svg::color(i), star ? 2.5 : 1.2);
    }
    c.text(width / 2, 20, "Parallel coordinates (x_interest in black)", 12, "middle");
    p.svg = c.str();
    return p;
}

// ---------------------------------------------------------------------------
// Prediction surface

struct SurfacePlot {
    std::string feature_a, feature_b;
    std::vector<double> grid_a, grid_b;
    // prediction[i][k] at (grid_a[i], grid_b[k]), other features at x⋆.
    std::vector<std::vector<double>> prediction;
    struct Marked {
        std::string id;
        double a, b, score;
    };
    // x⋆ first, then counterfactuals that differ from x⋆ only in a and b.
    std::vector<Marked> marked;
    std::vector<double> rug_a, rug_b;
    std::string svg;
};

inline SurfacePlot surface_plot_data(const CounterfactualSet& set, const std::string& feature_a,
                                     const std::string& feature_b, std::size_t grid_size,
                                     const PredictionFunction& f, const Dataset& data) {
    const auto& schema = set.schema();
    const std::size_t a = schema.index_of(feature_a), b = schema.index_of(feature_b);
    if (a == b) throw Error(ErrorCode::invalid_argument, "surface plot needs two different features");
    if (grid_size < 2) throw Error(ErrorCode::invalid_argument, "grid_size must be at least 2");
    if (data.empty()) throw Error(ErrorCode::empty_dataset, "surface plot needs training rows for the grid range");
    auto grid = [&](std::size_t j) {
        std::vector<double> g;
        const auto& feat = schema[j];
        if (feat.is_categorical()) {
            for (std::size_t l = 0; l < feat.levels.size(); ++l) g.push_back(static_cast<double>(l));
            return g;
        }
        double lo = data.observed_min(j), hi = data.observed_max(j);
        if (lo == hi) return std::vector<double>{lo};
        for (std::size_t t = 0; t < grid_size; ++t)
            g.push_back(lo + (hi - lo) * static_cast<double>(t) / static_cast<double>(grid_size - 1));
        return g;
    };
    SurfacePlot s;
    s.feature_a = feature_a;
    s.feature_b = feature_b;
    s.grid_a = grid(a);
    s.grid_b = grid(b);
    std::vector<Instance> batch;
    for (double va : s.grid_a)
        for (double vb : s.grid_b) {
            Instance x = set.x_star();
            x[a] = va;
            x[b] = vb;
            batch.push_back(std::move(x));
        }
    auto scores = predict_scores(f, batch, set.target());
    for (std::size_t i = 0; i < s.grid_a.size(); ++i)
        s.prediction.emplace_back(scores.begin() + static_cast<std::ptrdiff_t>(i * s.grid_b.size()),
                                  scores.begin() + static_cast<std::ptrdiff_t>((i + 1) * s.grid_b.size()));

    std::vector<Instance> marks{set.x_star()};
    std::vector<std::string> ids{"x_interest"};
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto& x = set[i];
        bool only_ab = true;
        for (std::size_t j = 0; j < schema.size() && only_ab; ++j)
            only_ab = j == a || j == b || x[j] == set.x_star()[j];
        if (only_ab) {
            marks.push_back(x);
            ids.push_back("cf" + std::to_string(i + 1));
        }
    }
    auto mark_scores = predict_scores(f, marks, set.target());
    for (std::size_t i = 0; i < marks.size(); ++i) s.marked.push_back({ids[i], marks[i][a], marks[i][b], mark_scores[i]});
    for (const auto& r : data.rows()) {
        s.rug_a.push_back(r[a]);
        s.rug_b.push_back(r[b]);
    }

    double smin = *std::min_element(scores.begin(), scores.end());
    double smax = *std::max_element(scores.begin(), scores.end());
    const double W = 420, H = 420, L = 60, T = 40;
    svg::Canvas c(W + L + 40, H + T + 60);
    const double cw = W / static_cast<double>(s.grid_a.size()), ch = H / static_cast<double>(s.grid_b.size());
    for (std::size_t i = 0; i < s.grid_a.size(); ++i)
        for (std::size_t k = 0; k < s.grid_b.size(); ++k) {
            double v = smax > smin ? (s.prediction[i][k] - smin) / (smax - smin) : 0.5;
            int shade = static_cast<int>(std::lround(235.0 - 175.0 * v));
            char fill[16];
            std::snprintf(fill, sizeof(fill), "#%02x%02xff", shade, shade);
            c.rect(L + cw * static_cast<double>(i), T + H - ch * static_cast<double>(k + 1), cw, ch, fill);
        }
    auto pos = [&](const std::vector<double>& g, double v, double extent) {
        double lo = g.front(), hi = g.back();
        double step = g.size() > 1 ? (hi - lo) / static_cast<double>(g.size() - 1) : 1.0;
        double idx = hi > lo ? (v - lo) / step : 0.0;
        return (idx + 0.5) * extent / static_cast<double>(g.size());
    };
    for (std::size_t m = 0; m < s.marked.size(); ++m)
        c.circle(L + pos(s.grid_a, s.marked[m].a, W), T + H - pos(s.grid_b, s.marked[m].b, H), m == 0 ? 6 : 4,
                 m == 0 ? "black" : "#d95f02");
    for (double v : s.rug_a) c.line(L + pos(s.grid_a, v, W), T + H, L + pos(s.grid_a, v, W), T + H + 6, "#444444", 0.5);
    for (double v : s.rug_b) c.line(L - 6, T + H - pos(s.grid_b, v, H), L, T + H - pos(s.grid_b, v, H), "#444444", 0.5);
    c.text(L + W / 2, T + H + 30, feature_a, 11, "middle");
    c.text(8, T + H / 2, feature_b, 11);
    c.text(L + W / 2, 20, "Prediction surface", 12, "middle");
    s.svg = c.str();
    return s;
}

// ---------------------------------------------------------------------------
// Export

// counterfactuals.json document. Carries no timestamps so reruns with the
// same inputs are byte-identical.
inline json set_to_json(const CounterfactualSet& set, const EvaluationTable* evaluation = nullptr) {
    json doc;
    doc["method"] = set.method();
    doc["schema"] = schema_to_json(set.schema());
    doc["x_interest"] = instance_to_json(set.schema(), set.x_star());
    doc["target"] = to_json(set.target());
    json cfs = json::array();
    for (const auto& x : set.counterfactuals()) cfs.push_back(instance_to_json(set.schema(), x));
    doc["counterfactuals"] = std::move(cfs);
    doc["evaluation"] = evaluation ? evaluation->to_json() : json::array();
    doc["diagnostics"] = set.diagnostics();
    doc["provenance"] = set.provenance();
    return doc;
}

inline CounterfactualSet set_from_json(const json& doc) {
    try {
        auto schema = schema_from_json(doc.at("schema")).schema;
        const auto& t = doc.at("target");
        DesiredTarget target{t.at("lower").get<double>(), t.at("upper").get<double>(), std::nullopt};
        if (t.contains("class_of_interest") && !t["class_of_interest"].is_null())
            target.class_of_interest = t["class_of_interest"].get<std::string>();
        CounterfactualSet set(schema, instance_from_json(schema, doc.at("x_interest")), target,
                              doc.at("method").get<std::string>());
        for (const auto& c : doc.at("counterfactuals")) set.add(instance_from_json(schema, c));
        if (doc.contains("diagnostics")) set.diagnostics() = doc["diagnostics"];
        if (doc.contains("provenance")) set.provenance() = doc["provenance"];
        return set;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse, std::string("malformed counterfactual document: ") + e.what());
    }
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
    out << text;
    if (!out) throw Error(ErrorCode::io, "write failed for '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace recourse
