#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "recourse/csv.hpp"
#include "recourse/error.hpp"

namespace recourse {

using json = nlohmann::json;

enum class FeatureKind { numeric, categorical };
enum class Task { classification, regression };

inline std::string_view to_string(Task t) { return t == Task::classification ? "classification" : "regression"; }

inline Task parse_task(std::string_view s) {
    if (s == "classification") return Task::classification;
    if (s == "regression") return Task::regression;
    throw Error(ErrorCode::schema, "unknown task kind '" + std::string(s) + "'");
}

struct FeatureDescriptor {
    std::string name;
    FeatureKind kind = FeatureKind::numeric;
    // Declared range; infinite when the schema leaves the range open.
    double min = -std::numeric_limits<double>::infinity();
    double max = std::numeric_limits<double>::infinity();
    std::vector<std::string> levels;
    bool integer_valued = false;
    bool fixed = false;

    static FeatureDescriptor numeric(std::string name, double lo, double hi, bool integer_valued = false,
                                     bool fixed = false) {
        FeatureDescriptor d;
        d.name = std::move(name);
        d.kind = FeatureKind::numeric;
        d.min = lo;
        d.max = hi;
        d.integer_valued = integer_valued;
        d.fixed = fixed;
        return d;
    }

    static FeatureDescriptor numeric(std::string name) {
        FeatureDescriptor d;
        d.name = std::move(name);
        return d;
    }

    static FeatureDescriptor categorical(std::string name, std::vector<std::string> levels, bool fixed = false) {
        FeatureDescriptor d;
        d.name = std::move(name);
        d.kind = FeatureKind::categorical;
        d.min = d.max = std::numeric_limits<double>::quiet_NaN();
        d.levels = std::move(levels);
        d.fixed = fixed;
        return d;
    }

    [[nodiscard]] bool is_numeric() const noexcept { return kind == FeatureKind::numeric; }
    [[nodiscard]] bool is_categorical() const noexcept { return kind == FeatureKind::categorical; }

    [[nodiscard]] std::optional<std::size_t> level_index(std::string_view level) const {
        auto it = std::find(levels.begin(), levels.end(), level);
        if (it == levels.end()) return std::nullopt;
        return static_cast<std::size_t>(it - levels.begin());
    }
};

// Ordered, validated set of feature descriptors.
class FeatureSchema {
public:
    FeatureSchema() = default;

    explicit FeatureSchema(std::vector<FeatureDescriptor> features) : features_(std::move(features)) {
        if (features_.empty()) throw Error(ErrorCode::schema, "schema must declare at least one feature");
        std::set<std::string> names;
        for (const auto& f : features_) {
            if (f.name.empty()) throw Error(ErrorCode::schema, "feature with empty name");
            if (!names.insert(f.name).second) throw Error(ErrorCode::schema, "duplicate feature name '" + f.name + "'");
            if (f.is_numeric()) {
                if (!f.levels.empty())
                    throw Error(ErrorCode::schema, "numeric feature '" + f.name + "' must not declare levels");
                if (std::isnan(f.min) || std::isnan(f.max) || f.min > f.max)
                    throw Error(ErrorCode::schema, "numeric feature '" + f.name + "' has invalid range");
            } else {
                if (f.levels.empty())
                    throw Error(ErrorCode::schema, "categorical feature '" + f.name + "' needs at least one level");
                std::set<std::string> lv(f.levels.begin(), f.levels.end());
                if (lv.size() != f.levels.size())
                    throw Error(ErrorCode::schema, "categorical feature '" + f.name + "' has duplicate levels");
                if (f.integer_valued)
                    throw Error(ErrorCode::schema, "categorical feature '" + f.name + "' cannot be integer_valued");
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return features_.size(); }
    [[nodiscard]] const FeatureDescriptor& operator[](std::size_t j) const { return features_[j]; }
    [[nodiscard]] const std::vector<FeatureDescriptor>& features() const noexcept { return features_; }

    [[nodiscard]] std::optional<std::size_t> find(std::string_view name) const {
        for (std::size_t j = 0; j < features_.size(); ++j)
            if (features_[j].name == name) return j;
        return std::nullopt;
    }

    [[nodiscard]] std::size_t index_of(std::string_view name) const {
        auto j = find(name);
        if (!j) throw Error(ErrorCode::invalid_argument, "unknown feature '" + std::string(name) + "'");
        return *j;
    }

    [[nodiscard]] std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& f : features_) out.push_back(f.name);
        return out;
    }

    // Categorical values are stored as level indices.
    [[nodiscard]] double parse_value(std::size_t j, std::string_view text) const {
        const auto& f = features_[j];
        if (text.empty() || text == "NA")
            throw Error(ErrorCode::missing_value, "missing value for feature '" + f.name + "'");
        if (f.is_categorical()) {
            auto idx = f.level_index(text);
            if (!idx)
                throw Error(ErrorCode::unknown_level,
                            "unknown level \"" + std::string(text) + "\" for feature '" + f.name + "'");
            return static_cast<double>(*idx);
        }
        auto v = parse_double(text);
        if (!v || !std::isfinite(*v))
            throw Error(ErrorCode::parse, "unparseable numeric value \"" + std::string(text) + "\" for feature '" +
                                              f.name + "'");
        return *v;
    }

    [[nodiscard]] std::string format_value(std::size_t j, double v) const {
        const auto& f = features_[j];
        if (f.is_categorical()) {
            auto idx = static_cast<std::size_t>(v);
            if (v < 0 || idx >= f.levels.size() || static_cast<double>(idx) != v) return "<invalid>";
            return f.levels[idx];
        }
        return format_double(v);
    }

    [[nodiscard]] json value_to_json(std::size_t j, double v) const {
        if (features_[j].is_categorical()) return format_value(j, v);
        return v;
    }

    [[nodiscard]] double value_from_json(std::size_t j, const json& v) const {
        if (features_[j].is_categorical()) {
            if (!v.is_string())
                throw Error(ErrorCode::parse, "categorical feature '" + features_[j].name + "' expects a string");
            return parse_value(j, v.get<std::string>());
        }
        if (v.is_number()) return v.get<double>();
        if (v.is_string()) return parse_value(j, v.get<std::string>());
        throw Error(ErrorCode::parse, "numeric feature '" + features_[j].name + "' expects a number");
    }

    friend bool operator==(const FeatureSchema& a, const FeatureSchema& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t j = 0; j < a.size(); ++j) {
            const auto &x = a[j], &y = b[j];
            if (x.name != y.name || x.kind != y.kind || x.levels != y.levels || x.integer_valued != y.integer_valued ||
                x.fixed != y.fixed)
                return false;
            if (x.is_numeric() && (x.min != y.min || x.max != y.max)) return false;
        }
        return true;
    }

private:
    std::vector<FeatureDescriptor> features_;
};

// One point of the feature space. Categorical entries hold level indices.
struct Instance {
    std::vector<double> values;

    Instance() = default;
    explicit Instance(std::vector<double> v) : values(std::move(v)) {}
    Instance(std::initializer_list<double> v) : values(v) {}

    [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
    double& operator[](std::size_t j) { return values[j]; }
    double operator[](std::size_t j) const { return values[j]; }

    friend bool operator==(const Instance&, const Instance&) = default;
    friend auto operator<=>(const Instance& a, const Instance& b) { return a.values <=> b.values; }
};

struct Violation {
    std::string feature;
    std::string reason;
};

inline std::vector<Violation> validate_instance(const Instance& inst, const FeatureSchema& schema) {
    std::vector<Violation> out;
    if (inst.size() != schema.size()) {
        out.push_back({"", "instance has " + std::to_string(inst.size()) + " values, schema has " +
                               std::to_string(schema.size()) + " features"});
        return out;
    }
    for (std::size_t j = 0; j < schema.size(); ++j) {
        const auto& f = schema[j];
        double v = inst[j];
        if (f.is_categorical()) {
            if (!(v >= 0) || v != std::floor(v) || v >= static_cast<double>(f.levels.size()))
                out.push_back({f.name, "value is not a declared level"});
            continue;
        }
        if (!std::isfinite(v)) {
            out.push_back({f.name, "value is not finite"});
            continue;
        }
        if (v < f.min) out.push_back({f.name, "value " + format_double(v) + " below declared min " + format_double(f.min)});
        if (v > f.max) out.push_back({f.name, "value " + format_double(v) + " above declared max " + format_double(f.max)});
        if (f.integer_valued && v != std::floor(v)) out.push_back({f.name, "value is not integral"});
    }
    return out;
}

struct DesiredTarget {
    double lower = 0.0;
    double upper = 1.0;
    std::optional<std::string> class_of_interest;

    [[nodiscard]] bool contains(double score) const noexcept { return score >= lower && score <= upper; }

    void validate(std::optional<Task> task = std::nullopt) const {
        if (std::isnan(lower) || std::isnan(upper) || lower > upper)
            throw Error(ErrorCode::invalid_argument, "desired interval must satisfy lower <= upper");
        if (task == Task::classification && (lower < 0.0 || upper > 1.0))
            throw Error(ErrorCode::invalid_argument, "classification target interval must lie in [0, 1]");
    }
};

inline json to_json(const DesiredTarget& t) {
    json j;
    j["lower"] = t.lower;
    j["upper"] = t.upper;
    j["class_of_interest"] = t.class_of_interest ? json(*t.class_of_interest) : json(nullptr);
    return j;
}

struct Outcomes {
    std::string name;
    Task task = Task::classification;
    std::vector<std::string> labels;  // classification
    std::vector<double> values;       // regression

    [[nodiscard]] std::size_t size() const noexcept { return task == Task::classification ? labels.size() : values.size(); }
};

struct OutcomeSpec {
    std::string name;
    Task task = Task::classification;
};

// Immutable training data plus the per-feature statistics the engine needs.
class Dataset {
public:
    Dataset() = default;

    Dataset(FeatureSchema schema, std::vector<Instance> rows, std::optional<Outcomes> outcomes = std::nullopt)
        : schema_(std::move(schema)), rows_(std::move(rows)), outcomes_(std::move(outcomes)) {
        const std::size_t p = schema_.size();
        for (std::size_t i = 0; i < rows_.size(); ++i) {
            if (rows_[i].size() != p)
                throw Error(ErrorCode::schema, "row " + std::to_string(i) + " has wrong arity");
        }
        if (outcomes_ && outcomes_->size() != rows_.size())
            throw Error(ErrorCode::schema, "outcome count does not match row count");
        compute_statistics();
    }

    [[nodiscard]] const FeatureSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] std::span<const Instance> rows() const noexcept { return rows_; }
    [[nodiscard]] const Instance& row(std::size_t i) const { return rows_[i]; }
    [[nodiscard]] std::size_t size() const noexcept { return rows_.size(); }
    [[nodiscard]] bool empty() const noexcept { return rows_.empty(); }
    [[nodiscard]] const std::optional<Outcomes>& outcomes() const noexcept { return outcomes_; }

    // R̂_j = max(X_j) - min(X_j); 0 for categorical features.
    [[nodiscard]] const std::vector<double>& ranges_hat() const noexcept { return range_; }
    [[nodiscard]] double range_hat(std::size_t j) const { return range_[j]; }
    [[nodiscard]] double observed_min(std::size_t j) const { return min_[j]; }
    [[nodiscard]] double observed_max(std::size_t j) const { return max_[j]; }
    // Sample standard deviation (n - 1); 0 for categorical features or n < 2.
    [[nodiscard]] double sd(std::size_t j) const { return sd_[j]; }

    // Row-major copy of all values, p per row.
    [[nodiscard]] std::span<const double> flat() const noexcept { return flat_; }

    [[nodiscard]] Dataset subset_rows(std::span<const std::size_t> idx) const {
        std::vector<Instance> rows;
        std::optional<Outcomes> out;
        if (outcomes_) {
            out = Outcomes{outcomes_->name, outcomes_->task, {}, {}};
        }
        for (auto i : idx) {
            rows.push_back(rows_.at(i));
            if (out) {
                if (out->task == Task::classification) out->labels.push_back(outcomes_->labels.at(i));
                else out->values.push_back(outcomes_->values.at(i));
            }
        }
        return Dataset(schema_, std::move(rows), std::move(out));
    }

    [[nodiscard]] Dataset subset_columns(std::span<const std::size_t> cols) const {
        std::vector<FeatureDescriptor> feats;
        for (auto c : cols) feats.push_back(schema_[c]);
        std::vector<Instance> rows;
        rows.reserve(rows_.size());
        for (const auto& r : rows_) {
            Instance x;
            for (auto c : cols) x.values.push_back(r[c]);
            rows.push_back(std::move(x));
        }
        return Dataset(FeatureSchema(std::move(feats)), std::move(rows), outcomes_);
    }

private:
    void compute_statistics() {
        const std::size_t p = schema_.size();
        range_.assign(p, 0.0);
        min_.assign(p, 0.0);
        max_.assign(p, 0.0);
        sd_.assign(p, 0.0);
        flat_.clear();
        flat_.reserve(rows_.size() * p);
        for (const auto& r : rows_) flat_.insert(flat_.end(), r.values.begin(), r.values.end());
        if (rows_.empty()) return;
        for (std::size_t j = 0; j < p; ++j) {
            if (!schema_[j].is_numeric()) continue;
            double lo = rows_[0][j], hi = rows_[0][j], sum = 0.0;
            for (const auto& r : rows_) {
                lo = std::min(lo, r[j]);
                hi = std::max(hi, r[j]);
                sum += r[j];
            }
            min_[j] = lo;
            max_[j] = hi;
            range_[j] = hi - lo;
            if (rows_.size() > 1) {
                double mean = sum / static_cast<double>(rows_.size());
                double ss = 0.0;
                for (const auto& r : rows_) ss += (r[j] - mean) * (r[j] - mean);
                sd_[j] = std::sqrt(ss / static_cast<double>(rows_.size() - 1));
            }
        }
    }

    FeatureSchema schema_;
    std::vector<Instance> rows_;
    std::optional<Outcomes> outcomes_;
    std::vector<double> range_, min_, max_, sd_;
    std::vector<double> flat_;
};

// ---------------------------------------------------------------------------
// Schema JSON sidecar

struct SchemaDocument {
    FeatureSchema schema;
    std::optional<OutcomeSpec> outcome;
};

inline SchemaDocument schema_from_json(const json& doc) {
    if (!doc.is_object() || !doc.contains("features") || !doc["features"].is_array())
        throw Error(ErrorCode::schema, "schema document needs a \"features\" array");
    std::vector<FeatureDescriptor> feats;
    for (const auto& jf : doc["features"]) {
        if (!jf.is_object() || !jf.contains("name") || !jf.contains("kind"))
            throw Error(ErrorCode::schema, "every feature needs \"name\" and \"kind\"");
        FeatureDescriptor d;
        d.name = jf["name"].get<std::string>();
        auto kind = jf["kind"].get<std::string>();
        if (kind == "numeric") {
            d.kind = FeatureKind::numeric;
            if (jf.contains("levels")) throw Error(ErrorCode::schema, "numeric feature '" + d.name + "' has levels");
            if (jf.contains("range") && !jf["range"].is_null()) {
                const auto& r = jf["range"];
                // null leaves that side of the range open
                auto side = [](const json& v) { return v.is_number() || v.is_null(); };
                if (!r.is_array() || r.size() != 2 || !side(r[0]) || !side(r[1]))
                    throw Error(ErrorCode::schema, "range of '" + d.name + "' must be [min, max]");
                if (!r[0].is_null()) d.min = r[0].get<double>();
                if (!r[1].is_null()) d.max = r[1].get<double>();
            }
            d.integer_valued = jf.value("integer_valued", false);
        } else if (kind == "categorical") {
            d.kind = FeatureKind::categorical;
            if (jf.contains("range") && !jf["range"].is_null())
                throw Error(ErrorCode::schema, "categorical feature '" + d.name + "' has a range");
            if (!jf.contains("levels") || !jf["levels"].is_array())
                throw Error(ErrorCode::schema, "categorical feature '" + d.name + "' needs levels");
            for (const auto& l : jf["levels"]) d.levels.push_back(l.get<std::string>());
            d.min = d.max = std::numeric_limits<double>::quiet_NaN();
            if (jf.value("integer_valued", false))
                throw Error(ErrorCode::schema, "categorical feature '" + d.name + "' cannot be integer_valued");
        } else {
            throw Error(ErrorCode::schema, "unknown feature kind '" + kind + "'");
        }
        d.fixed = jf.value("fixed", false);
        feats.push_back(std::move(d));
    }
    SchemaDocument out{FeatureSchema(std::move(feats)), std::nullopt};
    if (doc.contains("outcome") && !doc["outcome"].is_null()) {
        const auto& o = doc["outcome"];
        OutcomeSpec spec;
        spec.name = o.at("name").get<std::string>();
        spec.task = parse_task(o.at("kind").get<std::string>());
        if (out.schema.find(spec.name)) throw Error(ErrorCode::schema, "outcome name clashes with a feature");
        out.outcome = spec;
    }
    return out;
}

inline json schema_to_json(const FeatureSchema& schema, const std::optional<OutcomeSpec>& outcome = std::nullopt) {
    json feats = json::array();
    for (const auto& f : schema.features()) {
        json jf;
        jf["name"] = f.name;
        jf["kind"] = f.is_numeric() ? "numeric" : "categorical";
        if (f.is_numeric()) {
            if (std::isfinite(f.min) || std::isfinite(f.max))
                jf["range"] = {std::isfinite(f.min) ? json(f.min) : json(nullptr),
                               std::isfinite(f.max) ? json(f.max) : json(nullptr)};
            jf["integer_valued"] = f.integer_valued;
        } else {
            jf["levels"] = f.levels;
        }
        jf["fixed"] = f.fixed;
        feats.push_back(std::move(jf));
    }
    json doc;
    doc["features"] = std::move(feats);
    if (outcome) doc["outcome"] = {{"name", outcome->name}, {"kind", std::string(to_string(outcome->task))}};
    return doc;
}

inline SchemaDocument load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open schema file '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse, "schema file '" + path + "': " + e.what());
    }
    try {
        return schema_from_json(doc);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::schema, "schema file '" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion

inline Dataset read_dataset(std::istream& in, const SchemaDocument& doc) {
    auto table = csv::parse(in);
    if (table.empty()) throw Error(ErrorCode::empty_dataset, "csv has no header row");
    const auto& header = table.front();
    const auto& schema = doc.schema;
    std::vector<std::size_t> col_of(schema.size(), SIZE_MAX);
    std::size_t outcome_col = SIZE_MAX;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (auto j = schema.find(header[c])) {
            if (col_of[*j] != SIZE_MAX) throw Error(ErrorCode::schema, "duplicate column '" + header[c] + "'");
            col_of[*j] = c;
        } else if (doc.outcome && header[c] == doc.outcome->name) {
            outcome_col = c;
        } else {
            throw Error(ErrorCode::schema, "unexpected column '" + header[c] + "'");
        }
    }
    for (std::size_t j = 0; j < schema.size(); ++j)
        if (col_of[j] == SIZE_MAX) throw Error(ErrorCode::schema, "missing column '" + schema[j].name + "'");
    if (doc.outcome && outcome_col == SIZE_MAX)
        throw Error(ErrorCode::schema, "missing outcome column '" + doc.outcome->name + "'");
    if (table.size() < 2) throw Error(ErrorCode::empty_dataset, "csv contains no data rows");

    std::vector<Instance> rows;
    rows.reserve(table.size() - 1);
    std::optional<Outcomes> outcomes;
    if (doc.outcome) outcomes = Outcomes{doc.outcome->name, doc.outcome->task, {}, {}};
    for (std::size_t r = 1; r < table.size(); ++r) {
        const auto& line = table[r];
        if (line.size() != header.size())
            throw Error(ErrorCode::parse, "csv row " + std::to_string(r) + " has " + std::to_string(line.size()) +
                                              " fields, header has " + std::to_string(header.size()));
        Instance x;
        x.values.resize(schema.size());
        for (std::size_t j = 0; j < schema.size(); ++j) {
            try {
                x[j] = schema.parse_value(j, line[col_of[j]]);
            } catch (const Error& e) {
                throw Error(e.code(), "csv row " + std::to_string(r) + ": " + e.what());
            }
        }
        if (outcomes) {
            const auto& cell = line[outcome_col];
            if (cell.empty() || cell == "NA")
                throw Error(ErrorCode::missing_value, "csv row " + std::to_string(r) + ": missing outcome");
            if (outcomes->task == Task::classification) {
                outcomes->labels.push_back(cell);
            } else {
                auto v = parse_double(cell);
                if (!v) throw Error(ErrorCode::parse, "csv row " + std::to_string(r) + ": unparseable outcome");
                outcomes->values.push_back(*v);
            }
        }
        rows.push_back(std::move(x));
    }
    return Dataset(schema, std::move(rows), std::move(outcomes));
}

inline Dataset load_dataset(const std::string& csv_path, const std::string& schema_path) {
    auto doc = load_schema(schema_path);
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot open csv file '" + csv_path + "'");
    return read_dataset(in, doc);
}

inline void write_dataset(std::ostream& out, const Dataset& data) {
    const auto& schema = data.schema();
    csv::Row header = schema.names();
    const auto& outcomes = data.outcomes();
    if (outcomes) header.push_back(outcomes->name);
    csv::write_row(out, header);
    for (std::size_t i = 0; i < data.size(); ++i) {
        csv::Row line;
        for (std::size_t j = 0; j < schema.size(); ++j) line.push_back(schema.format_value(j, data.row(i)[j]));
        if (outcomes) {
            line.push_back(outcomes->task == Task::classification ? outcomes->labels[i]
                                                                  : format_double(outcomes->values[i]));
        }
        csv::write_row(out, line);
    }
}

inline std::optional<OutcomeSpec> outcome_spec(const Dataset& data) {
    if (!data.outcomes()) return std::nullopt;
    return OutcomeSpec{data.outcomes()->name, data.outcomes()->task};
}

// Renders an instance as a JSON object keyed by feature name.
inline json instance_to_json(const FeatureSchema& schema, const Instance& x) {
    json obj = json::object();
    for (std::size_t j = 0; j < schema.size(); ++j) obj[schema[j].name] = schema.value_to_json(j, x[j]);
    return obj;
}

// Accepts either {"name": value, ...} or [v1, v2, ...] in schema order.
inline Instance instance_from_json(const FeatureSchema& schema, const json& j) {
    Instance x;
    x.values.resize(schema.size());
    if (j.is_array()) {
        if (j.size() != schema.size()) throw Error(ErrorCode::parse, "instance array has wrong length");
        for (std::size_t k = 0; k < schema.size(); ++k) x[k] = schema.value_from_json(k, j[k]);
        return x;
    }
    if (!j.is_object()) throw Error(ErrorCode::parse, "instance must be a JSON object or array");
    for (std::size_t k = 0; k < schema.size(); ++k) {
        if (!j.contains(schema[k].name))
            throw Error(ErrorCode::parse, "instance is missing feature '" + schema[k].name + "'");
        x[k] = schema.value_from_json(k, j[schema[k].name]);
    }
    if (j.size() != schema.size()) throw Error(ErrorCode::parse, "instance has unknown features");
    return x;
}

} // namespace recourse
