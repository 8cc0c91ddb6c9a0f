#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "recourse/counterfactual_set.hpp"
#include "recourse/csv.hpp"
#include "recourse/error.hpp"
#include "recourse/factory.hpp"
#include "recourse/objectives.hpp"
#include "recourse/pareto.hpp"
#include "recourse/schema.hpp"
#include "recourse/svg.hpp"
#include "recourse/synthetic.hpp"

namespace recourse {

// Target for "the opposite of the predicted class" of a binary classifier.
// The open lower end of ]0.5, 1] is represented as 0.5 + 1e-15.
inline DesiredTarget flip_target(double score) {
    if (score <= 0.5) return {0.5 + 1e-15, 1.0, std::nullopt};
    return {0.0, 0.5, std::nullopt};
}

// ---------------------------------------------------------------------------
// Filtering and ranking

struct MethodCandidates {
    std::string method;
    std::vector<Instance> members;
    std::vector<ObjectiveVector> objectives;
};

struct FilteredCandidates {
    std::string method;
    std::size_t n_overall = 0;  // as returned by the method
    std::size_t n_valid = 0;    // with o_valid = 0
    std::size_t n_nondom = 0;   // valid and not dominated within the method
    std::vector<Instance> members;
    std::vector<ObjectiveVector> objectives;
};

// Keeps valid members that no other valid member of the same method
// dominates.
inline std::vector<FilteredCandidates> filter_for_comparison(const std::vector<MethodCandidates>& per_method) {
    std::vector<FilteredCandidates> out;
    for (const auto& m : per_method) {
        if (m.members.size() != m.objectives.size())
            throw Error(ErrorCode::invalid_argument, "candidates and objectives differ in length");
        FilteredCandidates f;
        f.method = m.method;
        f.n_overall = m.members.size();
        std::vector<std::size_t> valid;
        for (std::size_t i = 0; i < m.members.size(); ++i)
            if (m.objectives[i].valid == 0.0) valid.push_back(i);
        f.n_valid = valid.size();
        std::vector<Point> pts;
        for (auto i : valid) pts.push_back(m.objectives[i].to_vector());
        for (auto k : nondominated_indices(pts)) {
            f.members.push_back(m.members[valid[k]]);
            f.objectives.push_back(m.objectives[valid[k]]);
        }
        f.n_nondom = f.members.size();
        out.push_back(std::move(f));
    }
    return out;
}

// Average ranks (ties share their mean rank), mapped to (r - 1) / (n - 1);
// a single value gets 0.
inline std::vector<double> normalized_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<double> out(n, 0.0);
    if (n <= 1) return out;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    for (std::size_t i = 0; i < n;) {
        std::size_t k = i;
        while (k + 1 < n && values[order[k + 1]] == values[order[i]]) ++k;
        double mean_rank = 0.5 * static_cast<double>(i + k) + 1.0;
        for (std::size_t t = i; t <= k; ++t) out[order[t]] = (mean_rank - 1.0) / static_cast<double>(n - 1);
        i = k + 1;
    }
    return out;
}

// HV over (o_prox, o_sparse, o_plaus) against the worst-case point (1, p, 1).
inline double benchmark_hv(std::span<const ObjectiveVector> set, std::size_t p) {
    std::vector<Point> pts;
    for (const auto& o : set) pts.push_back({o.prox, o.sparse, o.plaus});
    const Point ref{1.0, static_cast<double>(p), 1.0};
    return hypervolume(pts, ref);
}

struct BenchmarkRecord {
    std::string dataset, model;
    std::size_t x_interest_id = 0;
    std::string method;
    std::size_t cf_id = 0;
    ObjectiveVector objectives;
    std::array<double, 4> rank{};
    // Not dominated by any survivor of any method for the same x⋆.
    bool nondominated_overall = false;
};

// Ranks every record per (dataset, model, x⋆) group and objective, and sets
// the cross-method nondomination flag.
inline void rank_normalize(std::vector<BenchmarkRecord>& records) {
    std::map<std::tuple<std::string, std::string, std::size_t>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < records.size(); ++i)
        groups[{records[i].dataset, records[i].model, records[i].x_interest_id}].push_back(i);
    for (const auto& [key, idx] : groups) {
        for (std::size_t o = 0; o < 4; ++o) {
            std::vector<double> col;
            for (auto i : idx) col.push_back(records[i].objectives[o]);
            auto r = normalized_ranks(col);
            for (std::size_t t = 0; t < idx.size(); ++t) records[idx[t]].rank[o] = r[t];
        }
        std::vector<Point> pts;
        for (auto i : idx) pts.push_back(records[i].objectives.to_vector());
        for (auto& i : idx) records[i].nondominated_overall = false;
        for (auto k : nondominated_indices(pts)) records[idx[k]].nondominated_overall = true;
    }
}

// ---------------------------------------------------------------------------
// Spec

struct RuntimeSpec {
    std::string dataset;    // empty: first dataset
    std::string predictor;  // empty: first predictor
    std::vector<double> row_fractions{0.01, 0.1, 1.0};
    std::vector<double> column_fractions;
    std::vector<std::string> methods{"moc", "whatif", "nice"};
};

struct BenchmarkSpec {
    struct NamedData {
        std::string name;
        Dataset data;
    };
    struct NamedPredictor {
        std::string name;
        std::string spec;
    };
    std::vector<NamedData> datasets;
    std::vector<NamedPredictor> predictors;
    std::size_t n_query_points = 10;
    // "nice" runs the three-reward union.
    std::vector<std::string> methods{"moc", "whatif", "nice"};
    MethodConfigs configs;
    std::uint64_t seed = 1;
    std::optional<RuntimeSpec> runtime;
};

// Harness defaults: MOC stops after 10 generations without HV gain (at most
// 500), WhatIf returns 10 rows, NICE runs without early stopping.
inline MethodConfigs benchmark_default_configs() {
    MethodConfigs c;
    c.moc.termination = Termination::genstag;
    c.moc.n_generations = 10;
    c.moc.max_generations = 500;
    c.whatif.n_counterfactuals = 10;
    c.nice.finish_early = false;
    c.nice.return_multiple = true;
    return c;
}

inline BenchmarkSpec benchmark_spec_from_json(const json& j, const std::filesystem::path& base_dir = ".") {
    if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "benchmark spec must be a JSON object");
    BenchmarkSpec spec;
    spec.configs = benchmark_default_configs();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return (path.is_absolute() ? path : base_dir / path).string();
    };
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "seed") spec.seed = v.get<std::uint64_t>();
            else if (key == "n_query_points") spec.n_query_points = v.get<std::size_t>();
            else if (key == "methods") spec.methods = v.get<std::vector<std::string>>();
            else if (key == "datasets") {
                for (const auto& d : v) {
                    std::string name = d.at("name").get<std::string>();
                    if (d.contains("synthetic")) {
                        const auto& s = d["synthetic"];
                        SyntheticSpec ss;
                        ss.n = s.value("n", ss.n);
                        ss.numeric = s.value("numeric", ss.numeric);
                        ss.categorical = s.value("categorical", ss.categorical);
                        ss.seed = s.value("seed", ss.seed);
                        spec.datasets.push_back({name, make_synthetic_dataset(ss)});
                    } else {
                        spec.datasets.push_back(
                            {name, load_dataset(resolve(d.at("data").get<std::string>()),
                                                resolve(d.at("schema").get<std::string>()))});
                    }
                }
            } else if (key == "predictors") {
                for (const auto& p : v) {
                    parse_predictor_spec(p.at("spec").get<std::string>());
                    spec.predictors.push_back({p.at("name").get<std::string>(), p.at("spec").get<std::string>()});
                }
            } else if (key == "configs") {
                for (const auto& [m, c] : v.items()) {
                    if (m == "moc") spec.configs.moc = moc_config_from_json(c, spec.configs.moc);
                    else if (m == "whatif") spec.configs.whatif = whatif_config_from_json(c, spec.configs.whatif);
                    else if (m == "nice") spec.configs.nice = nice_config_from_json(c, spec.configs.nice);
                    else throw Error(ErrorCode::invalid_argument, "unknown method in configs: " + m);
                }
            } else if (key == "runtime") {
                RuntimeSpec r;
                r.dataset = v.value("dataset", std::string());
                r.predictor = v.value("predictor", std::string());
                if (v.contains("row_fractions")) r.row_fractions = v["row_fractions"].get<std::vector<double>>();
                if (v.contains("column_fractions"))
                    r.column_fractions = v["column_fractions"].get<std::vector<double>>();
                if (v.contains("methods")) r.methods = v["methods"].get<std::vector<std::string>>();
                spec.runtime = r;
            } else {
                throw Error(ErrorCode::invalid_argument, "unknown benchmark spec field '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("malformed benchmark spec: ") + e.what());
    }
    if (spec.datasets.empty()) throw Error(ErrorCode::invalid_argument, "benchmark spec lists no datasets");
    if (spec.predictors.empty()) throw Error(ErrorCode::invalid_argument, "benchmark spec lists no predictors");
    for (const auto& m : spec.methods)
        if (m != "moc" && m != "whatif" && m != "nice")
            throw Error(ErrorCode::invalid_argument, "benchmark methods are moc, whatif and nice; got " + m);
    for (const auto& d : spec.datasets) {
        const auto& out = d.data.outcomes();
        if (!out || out->task != Task::classification || sorted_labels(*out).size() != 2)
            throw Error(ErrorCode::invalid_argument, "benchmark dataset '" + d.name + "' needs a binary outcome");
        if (d.data.size() <= spec.n_query_points)
            throw Error(ErrorCode::invalid_argument, "dataset '" + d.name + "' is too small for the query points");
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Runs

struct BenchmarkCell {
    std::string dataset, model;
    std::size_t x_interest_id = 0;
    std::size_t x_interest_row = 0;
    std::string method;
    std::size_t n_overall = 0, n_valid = 0, n_nondom = 0;
    double hv = 0.0;
    double runtime_ms = 0.0;
};

struct RuntimeRow {
    std::string dataset, model, method, subset;  // subset: "rows" or "columns"
    double fraction = 0.0;
    std::size_t n = 0, p = 0;
    double runtime_ms = 0.0;
};

struct BenchmarkReport {
    std::vector<BenchmarkCell> cells;
    std::vector<BenchmarkRecord> records;
    std::vector<RuntimeRow> runtime;

    // Deterministic tables (no wall-clock values).
    [[nodiscard]] std::string records_csv() const;
    [[nodiscard]] std::string cells_csv() const;
    // Wall-clock tables.
    [[nodiscard]] std::string runtime_csv() const;
    [[nodiscard]] json summary_json() const;
    [[nodiscard]] std::map<std::string, std::string> svgs() const;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
    for (std::uint64_t v : {a, b, c}) {
        h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0xbf58476d1ce4e5b9ULL;
        h ^= h >> 31;
    }
    return h;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline CounterfactualSet run_benchmark_method(const std::string& method, const PredictorPtr& f,
                                              const Instance& x_star, const DesiredTarget& target,
                                              const Dataset& data, MethodConfigs cfg, std::uint64_t seed) {
    cfg.moc.seed = seed;
    return run_method(method == "nice" ? "nice-union" : method, f, x_star, target, data, cfg);
}

} // namespace detail

// One cell per (dataset, model, x⋆, method). Cells run on `jobs` workers;
// each is deterministic given its derived seed, so the output does not
// depend on the number of workers.
inline BenchmarkReport run_benchmark(const BenchmarkSpec& spec, std::size_t jobs = 1) {
    struct Context {
        std::size_t dataset;
        Dataset train;
        std::vector<std::size_t> query_rows;
        std::vector<PredictorPtr> models;
    };
    std::vector<Context> contexts;
    for (std::size_t d = 0; d < spec.datasets.size(); ++d) {
        const auto& data = spec.datasets[d].data;
        std::vector<std::size_t> idx(data.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::mt19937_64 rng(detail::mix_seed(spec.seed, d));
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<std::size_t> query(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(spec.n_query_points));
        std::vector<std::size_t> train(idx.begin() + static_cast<std::ptrdiff_t>(spec.n_query_points), idx.end());
        std::sort(train.begin(), train.end());
        Context ctx{d, data.subset_rows(train), query, {}};
        for (const auto& p : spec.predictors) ctx.models.push_back(make_predictor(p.spec, ctx.train));
        contexts.push_back(std::move(ctx));
    }

    struct Job {
        std::size_t ctx, model, query, method;
    };
    std::vector<Job> tasks;
    for (std::size_t c = 0; c < contexts.size(); ++c)
        for (std::size_t m = 0; m < spec.predictors.size(); ++m)
            for (std::size_t q = 0; q < contexts[c].query_rows.size(); ++q)
                for (std::size_t k = 0; k < spec.methods.size(); ++k) tasks.push_back({c, m, q, k});

    struct Outcome {
        BenchmarkCell cell;
        FilteredCandidates survivors;
        std::exception_ptr error;
    };
    std::vector<Outcome> outcomes(tasks.size());
    auto work = [&](std::size_t t) {
        const auto& task = tasks[t];
        const auto& ctx = contexts[task.ctx];
        const auto& data = spec.datasets[ctx.dataset].data;
        const auto& f = ctx.models[task.model];
        const std::string& method = spec.methods[task.method];
        const Instance& x_star = data.row(ctx.query_rows[task.query]);
        DesiredTarget target = flip_target(predict_score(*f, x_star, DesiredTarget{}));
        auto t0 = std::chrono::steady_clock::now();
        auto set = detail::run_benchmark_method(method, f, x_star, target, ctx.train, spec.configs,
                                                detail::mix_seed(spec.seed, ctx.dataset, task.model, task.query));
        double ms = detail::elapsed_ms(t0);
        MethodCandidates mc{method, set.counterfactuals(), {}};
        mc.objectives = evaluate_objectives_batch(mc.members, x_star, *f, target, ctx.train, PlausibilityConfig{},
                                                  DistanceRegistry::builtin().get("gower"));
        auto filtered = filter_for_comparison({mc}).front();
        BenchmarkCell cell{spec.datasets[ctx.dataset].name, spec.predictors[task.model].name, task.query,
                           ctx.query_rows[task.query], method, filtered.n_overall, filtered.n_valid,
                           filtered.n_nondom, benchmark_hv(filtered.objectives, data.schema().size()), ms};
        outcomes[t] = {std::move(cell), std::move(filtered), nullptr};
    };
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < tasks.size();) {
            try {
                work(t);
            } catch (...) {
                outcomes[t].error = std::current_exception();
            }
        }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    BenchmarkReport report;
    for (auto& o : outcomes) {
        if (o.error) std::rethrow_exception(o.error);
        for (std::size_t i = 0; i < o.survivors.members.size(); ++i) {
            BenchmarkRecord r;
            r.dataset = o.cell.dataset;
            r.model = o.cell.model;
            r.x_interest_id = o.cell.x_interest_id;
            r.method = o.cell.method;
            r.cf_id = i + 1;
            r.objectives = o.survivors.objectives[i];
            report.records.push_back(std::move(r));
        }
        report.cells.push_back(std::move(o.cell));
    }
    rank_normalize(report.records);

    if (spec.runtime) {
        const auto& rs = *spec.runtime;
        std::size_t d = 0, m = 0;
        for (std::size_t i = 0; i < spec.datasets.size(); ++i)
            if (spec.datasets[i].name == rs.dataset) d = i;
        for (std::size_t i = 0; i < spec.predictors.size(); ++i)
            if (spec.predictors[i].name == rs.predictor) m = i;
        const auto& ctx = contexts[d];
        const auto& full = spec.datasets[d].data;
        const Instance& q = full.row(ctx.query_rows.front());
        auto time_subset = [&](const std::string& kind, double frac, const Dataset& sub, const Instance& x_star) {
            auto f = make_predictor(spec.predictors[m].spec, sub);
            DesiredTarget target = flip_target(predict_score(*f, x_star, DesiredTarget{}));
            for (const auto& method : rs.methods) {
                auto t0 = std::chrono::steady_clock::now();
                detail::run_benchmark_method(method, f, x_star, target, sub, spec.configs, spec.seed);
                report.runtime.push_back({spec.datasets[d].name, spec.predictors[m].name, method, kind, frac,
                                          sub.size(), sub.schema().size(), detail::elapsed_ms(t0)});
            }
        };
        for (double frac : rs.row_fractions) {
            if (!(frac > 0.0 && frac <= 1.0)) throw Error(ErrorCode::invalid_argument, "row fraction outside (0, 1]");
            std::size_t n = std::max<std::size_t>(
                2, static_cast<std::size_t>(std::ceil(frac * static_cast<double>(ctx.train.size()))));
            n = std::min(n, ctx.train.size());
            std::vector<std::size_t> rows(n);
            std::iota(rows.begin(), rows.end(), std::size_t{0});
            time_subset("rows", frac, ctx.train.subset_rows(rows), q);
        }
        for (double frac : rs.column_fractions) {
            if (!(frac > 0.0 && frac <= 1.0))
                throw Error(ErrorCode::invalid_argument, "column fraction outside (0, 1]");
            const std::size_t p = ctx.train.schema().size();
            std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(frac * static_cast<double>(p))));
            std::vector<std::size_t> cols(std::min(k, p));
            std::iota(cols.begin(), cols.end(), std::size_t{0});
            Instance xq;
            for (auto c : cols) xq.values.push_back(q[c]);
            time_subset("columns", frac, ctx.train.subset_columns(cols), xq);
        }
    }
    return report;
}

inline std::string BenchmarkReport::records_csv() const {
    std::ostringstream out;
    csv::Row header{"dataset", "model", "x_interest_id", "method", "cf_id"};
    for (auto* n : kObjectiveNames) header.push_back(n);
    for (auto* n : kObjectiveNames) header.push_back(std::string("rank_") + n);
    header.push_back("nondominated_overall");
    csv::write_row(out, header);
    for (const auto& r : records) {
        csv::Row row{r.dataset, r.model, std::to_string(r.x_interest_id), r.method, std::to_string(r.cf_id)};
        for (std::size_t o = 0; o < 4; ++o) row.push_back(format_double(r.objectives[o]));
        for (std::size_t o = 0; o < 4; ++o) row.push_back(format_double(r.rank[o]));
        row.push_back(r.nondominated_overall ? "true" : "false");
        csv::write_row(out, row);
    }
    return out.str();
}

inline std::string BenchmarkReport::cells_csv() const {
    std::ostringstream out;
    csv::write_row(out, {"dataset", "model", "x_interest_id", "x_interest_row", "method", "n_overall", "n_valid",
                         "n_nondom", "hv"});
    for (const auto& c : cells)
        csv::write_row(out, {c.dataset, c.model, std::to_string(c.x_interest_id), std::to_string(c.x_interest_row),
                             c.method, std::to_string(c.n_overall), std::to_string(c.n_valid),
                             std::to_string(c.n_nondom), format_double(c.hv)});
    return out.str();
}

inline std::string BenchmarkReport::runtime_csv() const {
    std::ostringstream out;
    csv::write_row(out, {"dataset", "model", "method", "subset", "fraction", "n", "p", "runtime_ms"});
    for (const auto& c : cells)
        csv::write_row(out, {c.dataset, c.model, c.method, "cell:" + std::to_string(c.x_interest_id), "1",
                             "", "", format_double(c.runtime_ms)});
    for (const auto& r : runtime)
        csv::write_row(out, {r.dataset, r.model, r.method, r.subset, format_double(r.fraction), std::to_string(r.n),
                             std::to_string(r.p), format_double(r.runtime_ms)});
    return out.str();
}

inline json BenchmarkReport::summary_json() const {
    std::map<std::string, std::vector<const BenchmarkCell*>> by_method;
    for (const auto& c : cells) by_method[c.method].push_back(&c);
    json methods = json::object();
    for (const auto& [m, cs] : by_method) {
        double hv = 0.0, nondom = 0.0, overall = 0.0;
        for (auto* c : cs) {
            hv += c->hv;
            nondom += static_cast<double>(c->n_nondom);
            overall += static_cast<double>(c->n_overall);
        }
        double n = static_cast<double>(cs.size());
        std::array<double, 4> mean_rank{};
        std::size_t nr = 0;
        for (const auto& r : records)
            if (r.method == m) {
                for (std::size_t o = 0; o < 4; ++o) mean_rank[o] += r.rank[o];
                ++nr;
            }
        json ranks = json::object();
        for (std::size_t o = 0; o < 4; ++o)
            ranks[kObjectiveNames[o]] = nr ? mean_rank[o] / static_cast<double>(nr) : 0.0;
        methods[m] = {{"cells", cs.size()},
                      {"mean_hv", hv / n},
                      {"mean_n_nondom", nondom / n},
                      {"mean_n_overall", overall / n},
                      {"mean_rank", ranks}};
    }
    return {{"methods", methods}, {"n_cells", cells.size()}, {"n_records", records.size()}};
}

inline std::map<std::string, std::string> BenchmarkReport::svgs() const {
    std::map<std::string, std::string> out;
    auto summary = summary_json()["methods"];
    std::vector<std::pair<std::string, double>> hv, nondom;
    for (const auto& [m, s] : summary.items()) {
        hv.emplace_back(m, s["mean_hv"].get<double>());
        nondom.emplace_back(m, s["mean_n_nondom"].get<double>());
    }
    out["hv.svg"] = svg::bar_chart(hv, "Mean hypervolume per method", "HV");
    out["nondom.svg"] = svg::bar_chart(nondom, "Mean number of valid nondominated counterfactuals", "count");
    std::vector<std::pair<std::string, double>> ranks;
    for (const auto& [m, s] : summary.items())
        for (std::size_t o = 1; o < 4; ++o)
            ranks.emplace_back(m + ":" + kObjectiveNames[o], s["mean_rank"][kObjectiveNames[o]].get<double>());
    out["ranks.svg"] = svg::bar_chart(ranks, "Mean normalized rank (lower is better)", "rank");
    if (!runtime.empty()) {
        std::map<std::string, svg::Series> series;
        for (const auto& r : runtime) {
            if (r.subset != "rows") continue;
            auto& s = series[r.method];
            s.name = r.method;
            s.points.emplace_back(static_cast<double>(r.n), r.runtime_ms);
        }
        std::vector<svg::Series> v;
        for (auto& [k, s] : series) v.push_back(s);
        out["runtime.svg"] = svg::line_chart(v, "Runtime by number of rows", "rows", "ms");
    }
    return out;
}

} // namespace recourse
