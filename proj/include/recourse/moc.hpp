#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "recourse/counterfactual_set.hpp"
#include "recourse/distance.hpp"
#include "recourse/error.hpp"
#include "recourse/objectives.hpp"
#include "recourse/pareto.hpp"
#include "recourse/predictor.hpp"
#include "recourse/schema.hpp"
#include "recourse/svg.hpp"

namespace recourse {

enum class InitStrategy { random, sd, traindata, icecurve };
enum class Termination { generations, genstag };

inline std::string_view to_string(InitStrategy s) {
    switch (s) {
    case InitStrategy::random: return "random";
    case InitStrategy::sd: return "sd";
    case InitStrategy::traindata: return "traindata";
    default: return "icecurve";
    }
}

inline InitStrategy parse_init_strategy(std::string_view s) {
    if (s == "random") return InitStrategy::random;
    if (s == "sd") return InitStrategy::sd;
    if (s == "traindata") return InitStrategy::traindata;
    if (s == "icecurve") return InitStrategy::icecurve;
    throw Error(ErrorCode::invalid_argument, "unknown init_strategy '" + std::string(s) + "'");
}

inline std::string_view to_string(Termination t) { return t == Termination::generations ? "generations" : "genstag"; }

inline Termination parse_termination(std::string_view s) {
    if (s == "generations") return Termination::generations;
    if (s == "genstag") return Termination::genstag;
    throw Error(ErrorCode::invalid_argument, "unknown termination '" + std::string(s) + "'");
}

struct MocConfig {
    std::size_t mu = 20;
    // Generation budget, or the stagnation window under genstag.
    std::size_t n_generations = 175;
    double p_rec = 0.71;
    double p_rec_gen = 0.62;
    double p_mut = 0.73;
    double p_mut_gen = 0.5;
    double p_mut_use_orig = 0.4;
    std::size_t k = 1;
    std::vector<double> weights;
    std::optional<double> epsilon;
    std::vector<std::string> fixed_features;
    std::optional<std::size_t> max_changed;
    std::map<std::string, double> lower;
    std::map<std::string, double> upper;
    InitStrategy init_strategy = InitStrategy::icecurve;
    Termination termination = Termination::generations;
    // Hard cap on generations under genstag.
    std::size_t max_generations = 500;
    std::string distance_function = "gower";
    std::uint64_t seed = 0;

    void validate() const {
        auto prob = [](double p, const char* name) {
            if (!(p >= 0.0 && p <= 1.0))
                throw Error(ErrorCode::invalid_argument, std::string(name) + " must lie in [0, 1]");
        };
        prob(p_rec, "p_rec");
        prob(p_rec_gen, "p_rec_gen");
        prob(p_mut, "p_mut");
        prob(p_mut_gen, "p_mut_gen");
        prob(p_mut_use_orig, "p_mut_use_orig");
        if (mu < 2) throw Error(ErrorCode::invalid_argument, "mu must be at least 2");
        if (n_generations < 1) throw Error(ErrorCode::invalid_argument, "n_generations must be positive");
        if (max_generations < 1) throw Error(ErrorCode::invalid_argument, "max_generations must be positive");
        if (k < 1) throw Error(ErrorCode::invalid_argument, "k must be positive");
        if (epsilon && !(*epsilon >= 0.0)) throw Error(ErrorCode::invalid_argument, "epsilon must be >= 0");
    }
};

inline json to_json(const MocConfig& c) {
    json j;
    j["mu"] = c.mu;
    j["n_generations"] = c.n_generations;
    j["p_rec"] = c.p_rec;
    j["p_rec_gen"] = c.p_rec_gen;
    j["p_mut"] = c.p_mut;
    j["p_mut_gen"] = c.p_mut_gen;
    j["p_mut_use_orig"] = c.p_mut_use_orig;
    j["k"] = c.k;
    j["weights"] = c.weights.empty() ? json(nullptr) : json(c.weights);
    j["epsilon"] = c.epsilon ? json(*c.epsilon) : json(nullptr);
    j["fixed_features"] = c.fixed_features;
    j["max_changed"] = c.max_changed ? json(*c.max_changed) : json(nullptr);
    j["lower"] = c.lower;
    j["upper"] = c.upper;
    j["init_strategy"] = std::string(to_string(c.init_strategy));
    j["termination"] = std::string(to_string(c.termination));
    j["max_generations"] = c.max_generations;
    j["distance_function"] = c.distance_function;
    j["seed"] = c.seed;
    return j;
}

// Fields absent from `j` keep the values of `base`. Unknown fields are an error.
inline MocConfig moc_config_from_json(const json& j, MocConfig base = {}) {
    if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "MOC config must be a JSON object");
    MocConfig c = std::move(base);
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "mu") c.mu = v.get<std::size_t>();
            else if (key == "n_generations") c.n_generations = v.get<std::size_t>();
            else if (key == "p_rec") c.p_rec = v.get<double>();
            else if (key == "p_rec_gen") c.p_rec_gen = v.get<double>();
            else if (key == "p_mut") c.p_mut = v.get<double>();
            else if (key == "p_mut_gen") c.p_mut_gen = v.get<double>();
            else if (key == "p_mut_use_orig") c.p_mut_use_orig = v.get<double>();
            else if (key == "k") c.k = v.get<std::size_t>();
            else if (key == "weights") c.weights = v.is_null() ? std::vector<double>{} : v.get<std::vector<double>>();
            else if (key == "epsilon") c.epsilon = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
            else if (key == "fixed_features") c.fixed_features = v.get<std::vector<std::string>>();
            else if (key == "max_changed")
                c.max_changed = v.is_null() ? std::nullopt : std::optional<std::size_t>(v.get<std::size_t>());
            else if (key == "lower") c.lower = v.get<std::map<std::string, double>>();
            else if (key == "upper") c.upper = v.get<std::map<std::string, double>>();
            else if (key == "init_strategy") c.init_strategy = parse_init_strategy(v.get<std::string>());
            else if (key == "termination") c.termination = parse_termination(v.get<std::string>());
            else if (key == "max_generations") c.max_generations = v.get<std::size_t>();
            else if (key == "distance_function") c.distance_function = v.get<std::string>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else throw Error(ErrorCode::invalid_argument, "unknown MOC config field '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, std::string("bad MOC config value: ") + e.what());
    }
    c.validate();
    return c;
}

struct Individual {
    Instance instance;
    ObjectiveVector objectives;
    double violation = 0.0;
    std::size_t generation_born = 0;
};

struct GenerationStats {
    std::size_t generation = 0;
    std::array<double, 4> mean{};
    std::array<double, 4> min{};
    double hv = 0.0;
    std::size_t n_feasible = 0;
    std::vector<ObjectiveVector> snapshot;
};

// `initial` is the evaluated starting population (generation 0); one entry
// per completed generation follows in `generations`.
struct GenerationLog {
    Point reference;
    std::optional<double> epsilon;
    std::optional<GenerationStats> initial;
    std::vector<GenerationStats> generations;

    [[nodiscard]] bool empty() const noexcept { return !initial && generations.empty(); }
};

// Resolved actionability constraints.
struct SearchSpace {
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<bool> mutable_mask;

    [[nodiscard]] bool any_mutable() const {
        return std::find(mutable_mask.begin(), mutable_mask.end(), true) != mutable_mask.end();
    }
};

// Bounds default to the observed range, are overridden per feature by
// cfg.lower/upper, and always include x⋆'s own value. A feature is mutable
// unless fixed (by config or schema) or left without room to move.
inline SearchSpace resolve_search_space(const Dataset& data, const Instance& x_star, const MocConfig& cfg) {
    const auto& schema = data.schema();
    detail::check_arity(x_star, schema);
    const std::size_t p = schema.size();
    SearchSpace s;
    s.lower.resize(p);
    s.upper.resize(p);
    s.mutable_mask.assign(p, true);
    for (const auto& name : cfg.fixed_features) s.mutable_mask[schema.index_of(name)] = false;
    for (const auto& [name, v] : cfg.lower)
        if (!schema[schema.index_of(name)].is_numeric())
            throw Error(ErrorCode::invalid_argument, "bounds apply to numeric features only: " + name);
    for (const auto& [name, v] : cfg.upper)
        if (!schema[schema.index_of(name)].is_numeric())
            throw Error(ErrorCode::invalid_argument, "bounds apply to numeric features only: " + name);
    for (std::size_t j = 0; j < p; ++j) {
        const auto& f = schema[j];
        if (f.fixed) s.mutable_mask[j] = false;
        if (f.is_categorical()) {
            s.lower[j] = 0.0;
            s.upper[j] = static_cast<double>(f.levels.size() - 1);
            if (f.levels.size() < 2) s.mutable_mask[j] = false;
            continue;
        }
        double lo = data.empty() ? x_star[j] : data.observed_min(j);
        double hi = data.empty() ? x_star[j] : data.observed_max(j);
        if (auto it = cfg.lower.find(f.name); it != cfg.lower.end()) lo = it->second;
        if (auto it = cfg.upper.find(f.name); it != cfg.upper.end()) hi = it->second;
        if (lo > hi) throw Error(ErrorCode::invalid_argument, "lower bound exceeds upper bound for " + f.name);
        s.lower[j] = std::min(lo, x_star[j]);
        s.upper[j] = std::max(hi, x_star[j]);
        if (s.lower[j] == s.upper[j]) s.mutable_mask[j] = false;
    }
    return s;
}

namespace detail {

inline double clamp_gene(const FeatureDescriptor& f, double v, double lo, double hi) {
    v = std::clamp(v, lo, hi);
    if (f.integer_valued) {
        v = std::round(v);
        if (v > hi) v = std::floor(hi);
        if (v < lo) v = std::ceil(lo);
    }
    return v;
}

// Uniform draw in [lo, hi], integers for integer-valued features. Returns
// `fallback` when the interval holds no admissible value.
inline double uniform_gene(const FeatureDescriptor& f, double lo, double hi, double fallback, std::mt19937_64& rng) {
    if (f.is_categorical()) {
        std::uniform_int_distribution<std::size_t> d(0, f.levels.size() - 1);
        return static_cast<double>(d(rng));
    }
    if (f.integer_valued) {
        double a = std::ceil(lo), b = std::floor(hi);
        if (a > b) return fallback;
        std::uniform_int_distribution<long long> d(static_cast<long long>(a), static_cast<long long>(b));
        return static_cast<double>(d(rng));
    }
    if (lo >= hi) return lo;
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng);
}

inline double sample_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Grid of values feature j sweeps for an ICE curve.
inline std::vector<double> ice_grid(const FeatureDescriptor& f, double lo, double hi, std::size_t grid_size) {
    std::vector<double> g;
    if (f.is_categorical()) {
        for (std::size_t l = 0; l < f.levels.size(); ++l) g.push_back(static_cast<double>(l));
        return g;
    }
    if (grid_size < 2 || lo == hi) return {lo};
    for (std::size_t t = 0; t < grid_size; ++t)
        g.push_back(lo + (hi - lo) * static_cast<double>(t) / static_cast<double>(grid_size - 1));
    return g;
}

} // namespace detail

// Sample sd of f̂ along x⋆'s ICE curve for feature j, swept over an
// equidistant grid on the observed range (numeric) or over all levels.
inline double ice_importance(const Instance& x_star, const PredictionFunction& f, const Dataset& data,
                             std::size_t j, const DesiredTarget& target, std::size_t grid_size = 20) {
    const auto& feat = data.schema()[j];
    double lo = feat.is_numeric() ? (data.empty() ? x_star[j] : data.observed_min(j)) : 0.0;
    double hi = feat.is_numeric() ? (data.empty() ? x_star[j] : data.observed_max(j)) : 0.0;
    std::vector<Instance> batch;
    for (double v : detail::ice_grid(feat, lo, hi, grid_size)) {
        Instance x = x_star;
        x[j] = v;
        batch.push_back(std::move(x));
    }
    auto s = predict_scores(f, batch, target);
    return detail::sample_sd(s);
}

// Uniform crossover on a pair: with probability p_rec, each mutable gene is
// swapped with probability p_rec_gen.
inline std::pair<Instance, Instance> recombine(const Instance& a, const Instance& b,
                                               const std::vector<bool>& mutable_mask, const MocConfig& cfg,
                                               std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Instance c1 = a, c2 = b;
    if (u(rng) >= cfg.p_rec) return {c1, c2};
    for (std::size_t j = 0; j < a.size(); ++j) {
        if (!mutable_mask[j]) continue;
        if (u(rng) < cfg.p_rec_gen) std::swap(c1[j], c2[j]);
    }
    return {c1, c2};
}

// Scaled Gaussian mutation for numeric genes and uniform level resampling for
// categorical genes, followed by reset-to-x⋆. Only applies with probability
// p_mut.
inline Instance mutate(const Instance& x, const Instance& x_star, const SearchSpace& space, const Dataset& data,
                       const MocConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Instance out = x;
    if (u(rng) >= cfg.p_mut) return out;
    const auto& schema = data.schema();
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (!space.mutable_mask[j] || u(rng) >= cfg.p_mut_gen) continue;
        const auto& f = schema[j];
        if (f.is_categorical()) {
            const std::size_t levels = f.levels.size();
            std::uniform_int_distribution<std::size_t> d(0, levels - 2);
            std::size_t r = d(rng);
            if (r >= static_cast<std::size_t>(out[j])) ++r;
            out[j] = static_cast<double>(r);
        } else {
            double sigma = data.sd(j);
            if (sigma > 0.0) {
                std::normal_distribution<double> n(0.0, sigma);
                out[j] = detail::clamp_gene(f, out[j] + n(rng), space.lower[j], space.upper[j]);
            }
        }
    }
    for (std::size_t j = 0; j < x.size(); ++j)
        if (space.mutable_mask[j] && u(rng) < cfg.p_mut_use_orig) out[j] = x_star[j];
    return out;
}

// Resets uniformly chosen changed genes to x⋆ until at most `cap` differ.
inline void enforce_max_changed(Instance& x, const Instance& x_star, std::size_t cap, std::mt19937_64& rng) {
    std::vector<std::size_t> changed;
    for (std::size_t j = 0; j < x.size(); ++j)
        if (x[j] != x_star[j]) changed.push_back(j);
    while (changed.size() > cap) {
        std::uniform_int_distribution<std::size_t> d(0, changed.size() - 1);
        std::size_t pos = d(rng);
        x[changed[pos]] = x_star[changed[pos]];
        changed.erase(changed.begin() + static_cast<std::ptrdiff_t>(pos));
    }
}

struct MocResult {
    CounterfactualSet set;
    // Parallel to set.counterfactuals().
    std::vector<Individual> individuals;
    GenerationLog log;
    bool all_infeasible = false;
};

// One MOC search: owns the RNG stream, the cached predictor and the resolved
// search space.
class MocSearch {
public:
    MocSearch(PredictorPtr f, Instance x_star, DesiredTarget target, const Dataset& data, MocConfig cfg,
              const DistanceRegistry& registry = DistanceRegistry::builtin())
        : f_(std::make_shared<CachedPredictor>(std::move(f))), x_star_(std::move(x_star)), target_(std::move(target)),
          data_(data), cfg_(std::move(cfg)), dist_(registry.get(cfg_.distance_function)), rng_(cfg_.seed) {
        cfg_.validate();
        target_.validate(f_->task());
        plaus_.k = cfg_.k;
        plaus_.weights = cfg_.weights;
        plaus_.validate(data_.size());
        if (cfg_.init_strategy == InitStrategy::traindata && data_.empty())
            throw Error(ErrorCode::empty_dataset, "traindata initialization needs training rows");
        space_ = resolve_search_space(data_, x_star_, cfg_);
        x_star_score_ = predict_score(*f_, x_star_, target_);
        const double p = static_cast<double>(data_.schema().size());
        reference_ = {o_valid(x_star_score_, target_), 1.0, p, 1.0};
    }

    [[nodiscard]] const SearchSpace& space() const noexcept { return space_; }
    [[nodiscard]] const Point& reference() const noexcept { return reference_; }
    [[nodiscard]] const MocConfig& config() const noexcept { return cfg_; }
    std::mt19937_64& rng() noexcept { return rng_; }

    // Evaluated objective vectors for a batch, one predictor call.
    std::vector<Individual> evaluate(std::vector<Instance> xs, std::size_t generation) const {
        auto objs = evaluate_objectives_batch(xs, x_star_, *f_, target_, data_, plaus_, dist_);
        std::vector<Individual> out;
        out.reserve(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i)
            out.push_back({std::move(xs[i]), objs[i], constraint_violation(objs[i].valid, cfg_.epsilon), generation});
        return out;
    }

    [[nodiscard]] std::vector<double> ice_importances() const {
        const auto& schema = data_.schema();
        std::vector<Instance> batch;
        std::vector<std::size_t> sizes;
        for (std::size_t j = 0; j < schema.size(); ++j) {
            auto grid = detail::ice_grid(schema[j], space_.lower[j], space_.upper[j], kIceGrid);
            sizes.push_back(grid.size());
            for (double v : grid) {
                Instance x = x_star_;
                x[j] = v;
                batch.push_back(std::move(x));
            }
        }
        auto s = predict_scores(*f_, batch, target_);
        std::vector<double> out;
        std::size_t off = 0;
        for (auto n : sizes) {
            out.push_back(detail::sample_sd(std::span<const double>(s).subspan(off, n)));
            off += n;
        }
        return out;
    }

    // μ unevaluated starting instances for the configured strategy.
    std::vector<Instance> initial_instances() {
        const auto& schema = data_.schema();
        const std::size_t p = schema.size();
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> reset(p, cfg_.p_mut_use_orig);
        if (cfg_.init_strategy == InitStrategy::icecurve) {
            auto imp = ice_importances();
            double mx = *std::max_element(imp.begin(), imp.end());
            if (mx > 0.0)
                for (std::size_t j = 0; j < p; ++j) reset[j] = 1.0 - imp[j] / mx;
        }
        std::vector<Instance> pop;
        if (cfg_.init_strategy == InitStrategy::traindata) pop = nondominated_training_rows();
        for (auto& x : pop)
            for (std::size_t j = 0; j < p; ++j)
                if (space_.mutable_mask[j] && schema[j].is_numeric())
                    x[j] = detail::clamp_gene(schema[j], x[j], space_.lower[j], space_.upper[j]);
        while (pop.size() < cfg_.mu) {
            Instance x = x_star_;
            for (std::size_t j = 0; j < p; ++j) {
                if (!space_.mutable_mask[j]) continue;
                double lo = space_.lower[j], hi = space_.upper[j];
                if (cfg_.init_strategy == InitStrategy::sd && schema[j].is_numeric()) {
                    lo = std::max(lo, x_star_[j] - data_.sd(j));
                    hi = std::min(hi, x_star_[j] + data_.sd(j));
                }
                x[j] = detail::uniform_gene(schema[j], lo, hi, x_star_[j], rng_);
            }
            pop.push_back(std::move(x));
        }
        for (auto& x : pop) {
            for (std::size_t j = 0; j < p; ++j) {
                if (!space_.mutable_mask[j]) {
                    x[j] = x_star_[j];
                    continue;
                }
                if (u(rng_) < reset[j]) x[j] = x_star_[j];
            }
            if (cfg_.max_changed) enforce_max_changed(x, x_star_, *cfg_.max_changed, rng_);
        }
        return pop;
    }

    std::vector<Individual> initialize_population() { return evaluate(initial_instances(), 0); }

    MocResult run() {
        CounterfactualSet set(data_.schema(), x_star_, target_, "moc");
        set.provenance() = {{"method", "moc"}, {"config", to_json(cfg_)}, {"seed", cfg_.seed}};
        GenerationLog log;
        log.reference = reference_;
        log.epsilon = cfg_.epsilon;
        if (!space_.any_mutable()) {
            if (o_valid(x_star_score_, target_) > 0.0)
                throw Error(ErrorCode::search_space, "no feature can change and x_interest misses the target");
            set.diagnostics() = {{"generations", 0}, {"all_infeasible", false}, {"note", "no mutable feature"}};
            return MocResult{std::move(set), {}, std::move(log), false};
        }

        Population pop;
        pop.members = initialize_population();
        rank_population(pop);
        log.initial = statistics(pop.members, 0);
        Archive archive;
        archive_add(archive, pop.members);

        const std::size_t limit =
            cfg_.termination == Termination::generations ? cfg_.n_generations : cfg_.max_generations;
        double best_hv = log.initial->hv;
        std::size_t stagnant = 0;
        std::size_t gen = 0;
        while (gen < limit) {
            ++gen;
            auto children = evaluate(make_offspring(pop), gen);
            pop = survive(std::move(pop), std::move(children));
            log.generations.push_back(statistics(pop.members, gen));
            archive_add(archive, pop.members);
            if (cfg_.termination == Termination::genstag) {
                double hv = log.generations.back().hv;
                if (hv > best_hv + 1e-12) {
                    best_hv = hv;
                    stagnant = 0;
                } else if (++stagnant >= cfg_.n_generations) {
                    break;
                }
            }
        }

        MocResult result{std::move(set), {}, std::move(log), false};
        for (auto& ind : archive.members) {
            if (result.set.add(ind.instance)) result.individuals.push_back(ind);
        }
        result.all_infeasible =
            cfg_.epsilon && std::any_of(result.individuals.begin(), result.individuals.end(),
                                        [](const Individual& i) { return i.violation > 0.0; });
        result.set.diagnostics() = {{"generations", gen},
                                    {"all_infeasible", result.all_infeasible},
                                    {"final_population_hv", result.log.generations.empty()
                                                                ? result.log.initial->hv
                                                                : result.log.generations.back().hv}};
        return result;
    }

private:
    static constexpr std::size_t kIceGrid = 20;

    struct Population {
        std::vector<Individual> members;
        std::vector<std::size_t> rank;
        std::vector<double> crowding;
    };

    // Nondominated members of everything seen, in order of first appearance.
    struct Archive {
        std::vector<Individual> members;
        std::set<Instance> keys;
    };

    bool dominates_ind(const Individual& a, const Individual& b) const {
        auto va = a.objectives.to_vector(), vb = b.objectives.to_vector();
        return cfg_.epsilon ? constrained_dominates(va, a.violation, vb, b.violation) : dominates(va, vb);
    }

    void archive_add(Archive& archive, const std::vector<Individual>& members) const {
        for (const auto& cand : members) {
            if (cand.instance == x_star_ || archive.keys.count(cand.instance)) continue;
            bool dominated = false;
            for (const auto& a : archive.members)
                if (dominates_ind(a, cand)) {
                    dominated = true;
                    break;
                }
            if (dominated) continue;
            std::vector<Individual> kept;
            kept.reserve(archive.members.size() + 1);
            for (auto& a : archive.members) {
                if (dominates_ind(cand, a)) archive.keys.erase(a.instance);
                else kept.push_back(std::move(a));
            }
            kept.push_back(cand);
            archive.keys.insert(cand.instance);
            archive.members = std::move(kept);
        }
    }

    std::vector<Point> points(const std::vector<Individual>& members) const {
        std::vector<Point> pts;
        pts.reserve(members.size());
        for (const auto& m : members) pts.push_back(m.objectives.to_vector());
        return pts;
    }

    std::vector<double> violations(const std::vector<Individual>& members) const {
        std::vector<double> v;
        if (!cfg_.epsilon) return v;
        for (const auto& m : members) v.push_back(m.violation);
        return v;
    }

    // Fills pop.rank / pop.crowding from a sort of pop.members.
    void rank_population(Population& pop) const {
        auto pts = points(pop.members);
        auto viol = violations(pop.members);
        auto part = nondominated_sort(pts, viol);
        pop.rank = part.rank;
        pop.crowding.assign(pop.members.size(), 0.0);
        for (const auto& front : part.fronts) {
            auto cd = front_crowding(pop.members, pts, front);
            for (std::size_t i = 0; i < front.size(); ++i) pop.crowding[front[i]] = cd[i];
        }
    }

    std::vector<double> front_crowding(const std::vector<Individual>& members, const std::vector<Point>& pts,
                                       const std::vector<std::size_t>& front) const {
        std::vector<Point> objs;
        std::vector<Instance> insts;
        for (auto i : front) {
            objs.push_back(pts[i]);
            insts.push_back(members[i].instance);
        }
        return crowding_distance(objs, insts, data_, dist_);
    }

    // Binary tournament on (rank, crowding), ties to the lower index.
    std::size_t tournament(const Population& pop) {
        std::uniform_int_distribution<std::size_t> d(0, pop.members.size() - 1);
        std::size_t a = d(rng_), b = d(rng_);
        auto better = [&](std::size_t x, std::size_t y) {
            if (pop.rank[x] != pop.rank[y]) return pop.rank[x] < pop.rank[y];
            if (pop.crowding[x] != pop.crowding[y]) return pop.crowding[x] > pop.crowding[y];
            return x < y;
        };
        return better(a, b) ? a : b;
    }

    std::vector<Instance> make_offspring(const Population& pop) {
        std::vector<Instance> kids;
        kids.reserve(cfg_.mu + 1);
        while (kids.size() < cfg_.mu) {
            const auto& pa = pop.members[tournament(pop)].instance;
            const auto& pb = pop.members[tournament(pop)].instance;
            auto [c1, c2] = recombine(pa, pb, space_.mutable_mask, cfg_, rng_);
            for (Instance* c : {&c1, &c2}) {
                *c = mutate(*c, x_star_, space_, data_, cfg_, rng_);
                if (cfg_.max_changed) enforce_max_changed(*c, x_star_, *cfg_.max_changed, rng_);
            }
            kids.push_back(std::move(c1));
            if (kids.size() < cfg_.mu) kids.push_back(std::move(c2));
        }
        return kids;
    }

    // Elitist (μ + μ) survival: whole fronts first, the split front by
    // descending crowding distance.
    Population survive(Population parents, std::vector<Individual> children) const {
        std::vector<Individual> all = std::move(parents.members);
        for (auto& c : children) all.push_back(std::move(c));
        auto pts = points(all);
        auto viol = violations(all);
        auto part = nondominated_sort(pts, viol);
        Population next;
        for (std::size_t r = 0; r < part.fronts.size() && next.members.size() < cfg_.mu; ++r) {
            const auto& front = part.fronts[r];
            auto cd = front_crowding(all, pts, front);
            std::vector<std::size_t> order(front.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            if (next.members.size() + front.size() > cfg_.mu) {
                order = crowding_distance_sort(cd);
                order.resize(cfg_.mu - next.members.size());
                std::sort(order.begin(), order.end());
            }
            for (auto pos : order) {
                next.members.push_back(all[front[pos]]);
                next.rank.push_back(r);
                next.crowding.push_back(cd[pos]);
            }
        }
        return next;
    }

    GenerationStats statistics(const std::vector<Individual>& members, std::size_t generation) const {
        GenerationStats s;
        s.generation = generation;
        s.min.fill(kInf);
        for (const auto& m : members) {
            for (std::size_t o = 0; o < 4; ++o) {
                s.mean[o] += m.objectives[o];
                s.min[o] = std::min(s.min[o], m.objectives[o]);
            }
            if (m.objectives.valid <= cfg_.epsilon.value_or(0.0)) ++s.n_feasible;
            s.snapshot.push_back(m.objectives);
        }
        for (auto& v : s.mean) v /= static_cast<double>(std::max<std::size_t>(members.size(), 1));
        auto pts = points(members);
        s.hv = hypervolume(pts, reference_);
        return s;
    }

    // traindata strategy: rows (other than x⋆) nondominated on
    // (o_prox, o_sparse, o_plaus); at most μ of them, chosen at random.
    std::vector<Instance> nondominated_training_rows() {
        std::vector<Instance> rows;
        for (const auto& r : data_.rows())
            if (r != x_star_) rows.push_back(r);
        if (rows.empty()) return {};
        Matrix prox = dist_(rows, std::span<const Instance>(&x_star_, 1), data_);
        auto plaus = o_plaus_batch(rows, data_, plaus_, dist_);
        std::vector<Point> pts;
        for (std::size_t i = 0; i < rows.size(); ++i)
            pts.push_back({prox(i, 0), static_cast<double>(o_sparse(rows[i], x_star_)), plaus[i]});
        auto nd = nondominated_indices(pts);
        if (nd.size() > cfg_.mu) {
            std::shuffle(nd.begin(), nd.end(), rng_);
            nd.resize(cfg_.mu);
            std::sort(nd.begin(), nd.end());
        }
        std::vector<Instance> out;
        for (auto i : nd) out.push_back(rows[i]);
        return out;
    }

    std::shared_ptr<CachedPredictor> f_;
    Instance x_star_;
    DesiredTarget target_;
    const Dataset& data_;
    MocConfig cfg_;
    DistanceFunction dist_;
    std::mt19937_64 rng_;
    PlausibilityConfig plaus_;
    SearchSpace space_;
    double x_star_score_ = 0.0;
    Point reference_;
};

inline MocResult find_counterfactuals_moc(PredictorPtr f, const Instance& x_star, const DesiredTarget& target,
                                          const Dataset& data, const MocConfig& cfg) {
    return MocSearch(std::move(f), x_star, target, data, cfg).run();
}

// Initial population for a strategy, evaluated; one call per strategy.
inline std::vector<Individual> initialize_population(InitStrategy strategy, const Instance& x_star,
                                                     const Dataset& data, PredictorPtr f,
                                                     const DesiredTarget& target, MocConfig cfg) {
    cfg.init_strategy = strategy;
    MocSearch search(std::move(f), x_star, target, data, std::move(cfg));
    return search.initialize_population();
}

// ---------------------------------------------------------------------------
// Diagnostics

struct StatisticsTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
    std::string svg;
};

// One row per completed generation: generation, mean and min per objective,
// population HV and the HV of the union of all populations so far (the
// starting population included). With `scaled`, every column but the
// generation is min-max scaled to [0, 1]; zero-width columns become 0.5.
inline StatisticsTable moc_statistics(const GenerationLog& log, bool scaled = false) {
    StatisticsTable t;
    t.columns = {"generation"};
    for (auto* n : kObjectiveNames) t.columns.push_back(std::string("mean_") + n);
    for (auto* n : kObjectiveNames) t.columns.push_back(std::string("min_") + n);
    t.columns.push_back("hv");
    t.columns.push_back("archive_hv");

    std::vector<Point> union_front;
    auto absorb = [&](const GenerationStats& g) {
        for (const auto& o : g.snapshot) union_front.push_back(o.to_vector());
        auto keep = nondominated_indices(union_front);
        std::vector<Point> next;
        for (auto i : keep) next.push_back(union_front[i]);
        union_front = std::move(next);
    };
    if (log.initial) absorb(*log.initial);
    for (const auto& g : log.generations) {
        absorb(g);
        std::vector<double> row{static_cast<double>(g.generation)};
        row.insert(row.end(), g.mean.begin(), g.mean.end());
        row.insert(row.end(), g.min.begin(), g.min.end());
        row.push_back(g.hv);
        row.push_back(hypervolume(union_front, log.reference));
        t.rows.push_back(std::move(row));
    }
    if (scaled) {
        for (std::size_t c = 1; c < t.columns.size(); ++c) {
            double lo = kInf, hi = -kInf;
            for (const auto& r : t.rows) {
                lo = std::min(lo, r[c]);
                hi = std::max(hi, r[c]);
            }
            for (auto& r : t.rows) r[c] = hi > lo ? (r[c] - lo) / (hi - lo) : 0.5;
        }
    }
    std::vector<svg::Series> series;
    for (std::size_t c = 1; c < t.columns.size(); ++c) {
        svg::Series s{t.columns[c], {}};
        for (const auto& r : t.rows) s.points.emplace_back(r[0], r[c]);
        series.push_back(std::move(s));
    }
    t.svg = svg::line_chart(series, scaled ? "MOC statistics (scaled)" : "MOC statistics", "generation", "value");
    return t;
}

struct TraceTable {
    std::string objective_a, objective_b;
    // (value of a, value of b, generation) per individual, starting population first.
    std::vector<std::array<double, 3>> rows;
    std::string svg;
};

inline TraceTable moc_search_trace(const GenerationLog& log, std::string_view objective_a,
                                   std::string_view objective_b) {
    const std::size_t a = objective_index(objective_a), b = objective_index(objective_b);
    TraceTable t{kObjectiveNames[a], kObjectiveNames[b], {}, {}};
    auto add = [&](const GenerationStats& g) {
        for (const auto& o : g.snapshot) t.rows.push_back({o[a], o[b], static_cast<double>(g.generation)});
    };
    if (log.initial) add(*log.initial);
    for (const auto& g : log.generations) add(g);
    svg::Series early{"first half", {}}, late{"second half", {}};
    double last = log.generations.empty() ? 0.0 : static_cast<double>(log.generations.back().generation);
    for (const auto& r : t.rows) (r[2] * 2 <= last ? early : late).points.emplace_back(r[0], r[1]);
    t.svg = svg::scatter_chart({early, late}, "MOC search trace", t.objective_a, t.objective_b);
    return t;
}

// Unscaled statistics as CSV text.
inline std::string generation_log_csv(const GenerationLog& log) {
    auto t = moc_statistics(log, false);
    std::string out;
    for (std::size_t c = 0; c < t.columns.size(); ++c) out += (c ? "," : "") + t.columns[c];
    out += "\n";
    for (const auto& r : t.rows) {
        for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + format_double(r[c]);
        out += "\n";
    }
    return out;
}

} // namespace recourse
