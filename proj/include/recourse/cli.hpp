#pragma once

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "recourse/benchmark.hpp"
#include "recourse/factory.hpp"
#include "recourse/moc.hpp"
#include "recourse/pareto.hpp"
#include "recourse/results.hpp"

namespace recourse::cli {

inline constexpr const char* kEngineVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kError = 1, kUsage = 2, kEmpty = 3 };

inline std::string utc_now() {
    auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// "a,b" -> DesiredTarget bounds.
inline std::pair<double, double> parse_range(const std::string& text) {
    auto comma = text.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::invalid_argument, "--desired-range expects 'lower,upper'");
    auto lo = parse_double(text.substr(0, comma));
    auto hi = parse_double(text.substr(comma + 1));
    if (!lo || !hi) throw Error(ErrorCode::invalid_argument, "--desired-range bounds must be numbers");
    return {*lo, *hi};
}

// A row index into the dataset, or an instance as JSON (object or array).
inline Instance parse_x_interest(const std::string& text, const Dataset& data) {
    std::size_t pos = 0;
    bool digits = !text.empty() && text.find_first_not_of("0123456789") == std::string::npos;
    if (digits) {
        unsigned long long idx = std::stoull(text, &pos);
        if (idx >= data.size())
            throw Error(ErrorCode::invalid_argument, "--x-interest row " + text + " is out of range");
        return data.row(static_cast<std::size_t>(idx));
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception&) {
        throw Error(ErrorCode::parse, "--x-interest must be a row index or a JSON instance");
    }
    Instance x = instance_from_json(data.schema(), j);
    auto violations = validate_instance(x, data.schema());
    if (!violations.empty())
        throw Error(ErrorCode::schema, "x_interest violates the schema: " + violations.front().feature + ": " +
                                           violations.front().reason);
    return x;
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::io, "cannot create output directory '" + dir + "': " + ec.message());
}

inline std::string join(const std::string& dir, const std::string& file) {
    return (std::filesystem::path(dir) / file).string();
}

// Writes the plots that make sense for a non-empty set.
inline void write_set_plots(const std::string& out, const CounterfactualSet& set, const PredictionFunction& f,
                            const Dataset& data) {
    if (set.empty()) return;
    auto freq = freq_of_feature_changes(set);
    std::vector<std::string> order;
    for (const auto& fr : freq) order.push_back(fr.feature);
    write_text_file(join(out, "parallel.svg"), parallel_plot_data(set, order).svg);
    std::vector<std::pair<std::string, double>> bars;
    for (const auto& fr : freq) bars.emplace_back(fr.feature, fr.frequency);
    write_text_file(join(out, "feature_changes.svg"), svg::bar_chart(bars, "Relative frequency of feature changes", "share"));
    if (set.schema().size() >= 2 && !data.empty())
        write_text_file(join(out, "surface.svg"), surface_plot_data(set, order[0], order[1], 30, f, data).svg);
}

struct GenerateOptions {
    std::string method, data, schema, predictor, x_interest, desired_class, desired_range, config, out;
    std::optional<std::uint64_t> seed;
    bool no_svg = false;
    long timeout_ms = 30000;
};

inline int cmd_generate(const GenerateOptions& o, std::ostream& log) {
    std::string started = utc_now();
    for (auto [flag, value] : {std::pair{"--data", &o.data}, {"--schema", &o.schema}, {"--predictor", &o.predictor},
                               {"--x-interest", &o.x_interest}, {"--out", &o.out}, {"--method", &o.method}}) {
        if (value->empty()) throw Error(ErrorCode::invalid_argument, std::string("missing required option ") + flag);
    }
    auto doc = load_schema(o.schema);
    Dataset data = load_dataset(o.data, o.schema);
    ExternalPredictorOptions popts;
    popts.timeout = std::chrono::milliseconds(o.timeout_ms);
    auto f = make_predictor(o.predictor, data, popts);
    Instance x_star = parse_x_interest(o.x_interest, data);

    DesiredTarget target;
    if (!o.desired_class.empty()) target.class_of_interest = o.desired_class;
    if (!o.desired_range.empty()) {
        auto [lo, hi] = parse_range(o.desired_range);
        target.lower = lo;
        target.upper = hi;
    } else if (f->task() == Task::regression) {
        throw Error(ErrorCode::invalid_argument, "regression needs --desired-range");
    } else {
        target.lower = 0.5;
        target.upper = 1.0;
    }
    target.validate(f->task());

    MethodConfigs cfg;
    json method_config = json::object();
    if (!o.config.empty()) {
        try {
            method_config = json::parse(read_text_file(o.config));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::parse, std::string("config file is not valid JSON: ") + e.what());
        }
    }
    if (o.method == "moc") cfg.moc = moc_config_from_json(method_config);
    else if (o.method == "whatif") cfg.whatif = whatif_config_from_json(method_config);
    else if (o.method == "nice" || o.method == "nice-union") cfg.nice = nice_config_from_json(method_config);
    else throw Error(ErrorCode::invalid_argument, "unknown --method '" + o.method + "'");
    if (o.seed) {
        cfg.moc.seed = *o.seed;
    } else if (const char* env = std::getenv("RECOURSE_SEED"); env && *env) {
        try {
            cfg.moc.seed = std::stoull(env);
        } catch (const std::exception&) {
            throw Error(ErrorCode::invalid_argument, "RECOURSE_SEED must be an unsigned integer");
        }
    }

    ensure_dir(o.out);
    CounterfactualSet set = [&] {
        if (o.method != "moc") return run_method(o.method, f, x_star, target, data, cfg);
        auto r = find_counterfactuals_moc(f, x_star, target, data, cfg.moc);
        write_text_file(join(o.out, "generation_log.csv"), generation_log_csv(r.log));
        if (!o.no_svg && !r.log.generations.empty()) {
            write_text_file(join(o.out, "moc_statistics.svg"), moc_statistics(r.log, true).svg);
            write_text_file(join(o.out, "moc_search.svg"), moc_search_trace(r.log, "dist_target", "dist_x_interest").svg);
        }
        return std::move(r.set);
    }();

    auto eval = evaluate(set, *f, data);
    write_text_file(join(o.out, "counterfactuals.json"), set_to_json(set, &eval).dump(2) + "\n");
    write_text_file(join(o.out, "evaluation.csv"), eval.to_csv());
    if (!o.no_svg) write_set_plots(o.out, set, *f, data);

    std::size_t n_valid = 0;
    for (const auto& ob : eval.objectives) n_valid += ob.valid == 0.0;

    json manifest = {
        {"engine", "recourse"},
        {"version", kEngineVersion},
        {"command", "generate"},
        {"config",
         {{"method", o.method},
          {"data", o.data},
          {"schema", o.schema},
          {"predictor", o.predictor},
          {"x_interest", instance_to_json(data.schema(), x_star)},
          {"target", to_json(target)},
          {"seed", cfg.moc.seed},
          {"method_config", set.provenance().value("config", json::object())}}},
        {"started_at", started},
        {"finished_at", utc_now()},
        {"n_counterfactuals", set.size()},
        {"n_valid", n_valid}};
    write_text_file(join(o.out, "manifest.json"), manifest.dump(2) + "\n");
    log << o.method << ": " << set.size() << " counterfactual(s), " << n_valid << " valid -> " << o.out << "\n";
    return n_valid > 0 ? kOk : kEmpty;
}

struct EvaluateOptions {
    std::string set, data, schema, predictor, out, measures;
    bool show_diff = false;
    bool no_svg = false;
};

inline int cmd_evaluate(const EvaluateOptions& o, std::ostream& log) {
    for (auto [flag, value] : {std::pair{"--set", &o.set}, {"--data", &o.data}, {"--schema", &o.schema},
                               {"--predictor", &o.predictor}}) {
        if (value->empty()) throw Error(ErrorCode::invalid_argument, std::string("missing required option ") + flag);
    }
    json doc;
    try {
        doc = json::parse(read_text_file(o.set));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse, std::string("set file is not valid JSON: ") + e.what());
    }
    auto set = set_from_json(doc);
    Dataset data = load_dataset(o.data, o.schema);
    auto f = make_predictor(o.predictor, data);
    std::vector<std::string> measures = all_measures();
    if (!o.measures.empty()) {
        measures.clear();
        std::stringstream ss(o.measures);
        for (std::string m; std::getline(ss, m, ',');)
            if (!m.empty()) measures.push_back(m);
    }
    auto eval = evaluate(set, *f, data, o.show_diff, measures);
    std::string table = eval.to_csv();
    if (!o.out.empty()) {
        ensure_dir(o.out);
        write_text_file(join(o.out, "evaluation.csv"), table);
        if (!o.no_svg) write_set_plots(o.out, set, *f, data);
    }
    log << table;
    return set.empty() ? kEmpty : kOk;
}

struct BenchmarkOptions {
    std::string spec, out;
    std::size_t jobs = 1;
    bool no_svg = false;
};

inline int cmd_benchmark(const BenchmarkOptions& o, std::ostream& log) {
    if (o.spec.empty()) throw Error(ErrorCode::invalid_argument, "missing required option --spec");
    if (o.out.empty()) throw Error(ErrorCode::invalid_argument, "missing required option --out");
    json j;
    try {
        j = json::parse(read_text_file(o.spec));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse, std::string("benchmark spec is not valid JSON: ") + e.what());
    }
    std::string started = utc_now();
    auto spec = benchmark_spec_from_json(j, std::filesystem::path(o.spec).parent_path());
    auto report = run_benchmark(spec, o.jobs);
    ensure_dir(o.out);
    write_text_file(join(o.out, "records.csv"), report.records_csv());
    write_text_file(join(o.out, "cells.csv"), report.cells_csv());
    write_text_file(join(o.out, "runtime.csv"), report.runtime_csv());
    write_text_file(join(o.out, "summary.json"), report.summary_json().dump(2) + "\n");
    if (!o.no_svg)
        for (const auto& [name, text] : report.svgs()) write_text_file(join(o.out, name), text);
    json manifest = {{"engine", "recourse"},   {"version", kEngineVersion}, {"command", "benchmark"},
                     {"config", j},            {"jobs", o.jobs},            {"started_at", started},
                     {"finished_at", utc_now()}};
    write_text_file(join(o.out, "manifest.json"), manifest.dump(2) + "\n");
    log << "benchmark: " << report.cells.size() << " cells, " << report.records.size() << " records -> " << o.out
        << "\n";
    return kOk;
}

// Bundled oracle checks: pairwise domination, Monte-Carlo HV, Gower scalar
// versus batch. Returns the number of failed checks.
inline int run_selftest(std::ostream& out) {
    int failures = 0;
    auto report = [&](bool ok, const std::string& name, const std::string& detail) {
        out << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
        failures += !ok;
    };
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    {
        std::size_t mismatches = 0;
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<Point> pop(40);
            for (auto& p : pop) p = {std::floor(u(rng) * 5), std::floor(u(rng) * 5), u(rng)};
            auto part = nondominated_sort(pop);
            for (std::size_t i = 0; i < pop.size(); ++i) {
                bool dominated = false;
                for (std::size_t k = 0; k < pop.size(); ++k) {
                    bool le = true, lt = false;
                    for (std::size_t d = 0; d < 3; ++d) {
                        le = le && pop[k][d] <= pop[i][d];
                        lt = lt || pop[k][d] < pop[i][d];
                    }
                    dominated = dominated || (le && lt);
                }
                mismatches += dominated == (part.rank[i] == 0);
            }
        }
        report(mismatches == 0, "domination", std::to_string(mismatches) + " first-front mismatches in 50 populations");
    }
    {
        int bad = 0;
        for (int trial = 0; trial < 5; ++trial) {
            std::vector<Point> pts(8);
            for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
            Point ref{1, 1, 1};
            double exact = hypervolume(pts, ref);
            const int samples = 200000;
            int hit = 0;
            for (int s = 0; s < samples; ++s) {
                Point q{u(rng), u(rng), u(rng)};
                for (const auto& p : pts)
                    if (p[0] <= q[0] && p[1] <= q[1] && p[2] <= q[2]) {
                        ++hit;
                        break;
                    }
            }
            double est = static_cast<double>(hit) / samples;
            double se = std::sqrt(est * (1 - est) / samples);
            bad += std::abs(est - exact) > 4 * se + 1e-12;
        }
        report(bad == 0, "hypervolume", std::to_string(bad) + " of 5 sets outside 4 standard errors");
    }
    {
        auto data = make_synthetic_dataset({60, 3, 2, 11});
        std::vector<Instance> a(data.rows().begin(), data.rows().begin() + 10);
        Matrix m1 = gower_matrix(a, data.rows(), data), m2 = gower_matrix_fast(a, data.rows(), data);
        double worst = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t k = 0; k < data.size(); ++k) {
                worst = std::max(worst, std::abs(m1(i, k) - gower_distance(a[i], data.row(k), data)));
                worst = std::max(worst, std::abs(m2(i, k) - m1(i, k)));
            }
        report(worst <= 1e-12, "gower", "max scalar/batch difference " + format_double(worst));
    }
    return failures;
}

// Entry point shared by the executable and in-process tests.
inline int main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Counterfactual explanations: MOC, WhatIf and NICE"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kEngineVersion);

    GenerateOptions g;
    auto* gen = app.add_subcommand("generate", "Generate counterfactuals for one instance");
    gen->add_option("--method", g.method, "moc | whatif | nice | nice-union")
        ->check(CLI::IsMember({"moc", "whatif", "nice", "nice-union"}));
    gen->add_option("--data", g.data, "Training data CSV");
    gen->add_option("--schema", g.schema, "Schema JSON");
    gen->add_option("--predictor", g.predictor, "builtin:knn:k=5 | builtin:logistic:epochs=500,lr=0.1 | "
                                                "builtin:threshold:feature=NAME,cut=V | exec:COMMAND");
    gen->add_option("--x-interest", g.x_interest, "Row index or JSON instance");
    gen->add_option("--desired-class", g.desired_class, "Class of interest");
    gen->add_option("--desired-range", g.desired_range, "Desired prediction interval 'lower,upper'");
    gen->add_option("--config", g.config, "Method config JSON file");
    gen->add_option("--seed", g.seed, "Random seed (falls back to RECOURSE_SEED)");
    gen->add_option("--out", g.out, "Output directory");
    gen->add_option("--timeout-ms", g.timeout_ms, "Per-request timeout for exec predictors")->capture_default_str();
    gen->add_flag("--no-svg", g.no_svg, "Skip SVG plots");

    EvaluateOptions e;
    auto* ev = app.add_subcommand("evaluate", "Evaluate a stored counterfactual set");
    ev->add_option("--set", e.set, "counterfactuals.json from generate");
    ev->add_option("--data", e.data, "Training data CSV");
    ev->add_option("--schema", e.schema, "Schema JSON");
    ev->add_option("--predictor", e.predictor, "Predictor spec (as for generate)");
    ev->add_option("--measures", e.measures, "Comma-separated subset of dist_target,dist_x_interest,no_changed,dist_train");
    ev->add_option("--out", e.out, "Output directory (optional)");
    ev->add_flag("--show-diff", e.show_diff, "Show changes against x_interest; NA means no difference");
    ev->add_flag("--no-svg", e.no_svg, "Skip SVG plots");

    BenchmarkOptions b;
    auto* bench = app.add_subcommand("benchmark", "Run the comparison harness");
    bench->add_option("--spec", b.spec, "Benchmark spec JSON");
    bench->add_option("--out", b.out, "Output directory");
    bench->add_option("--jobs", b.jobs, "Worker threads")->check(CLI::PositiveNumber);
    bench->add_flag("--no-svg", b.no_svg, "Skip SVG plots");

    auto* self = app.add_subcommand("selftest", "Run the bundled oracle checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        app.exit(ex, out, err);
        return kOk;
    } catch (const CLI::CallForVersion& ex) {
        app.exit(ex, out, err);
        return kOk;
    } catch (const CLI::ParseError& ex) {
        app.exit(ex, out, err);
        return kUsage;
    }

    CLI::App* active = app.get_subcommands().front();
    try {
        if (active == gen) return cmd_generate(g, out);
        if (active == ev) return cmd_evaluate(e, out);
        if (active == bench) return cmd_benchmark(b, out);
        if (active == self) return run_selftest(out) == 0 ? kOk : kError;
    } catch (const Error& ex) {
        err << "error [" << ex.code_name() << "]: " << ex.what() << "\n";
        if (ex.code() == ErrorCode::invalid_argument && std::string(ex.what()).rfind("missing required option", 0) == 0)
            err << active->help();
        return kError;
    } catch (const std::exception& ex) {
        err << "error [E_INTERNAL]: " << ex.what() << "\n";
        return kError;
    }
    return kError;
}

} // namespace recourse::cli
