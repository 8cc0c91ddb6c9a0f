#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "recourse/distance.hpp"
#include "recourse/error.hpp"
#include "recourse/gower_index.hpp"
#include "recourse/schema.hpp"

namespace recourse {

using ScoreMatrix = std::vector<std::vector<double>>;

// A model f̂ seen through its batch prediction interface. Classification
// models return one score per class label (a probability simplex point);
// regression models return a single value. Implementations must be safe to
// call concurrently.
class PredictionFunction {
public:
    virtual ~PredictionFunction() = default;

    [[nodiscard]] virtual Task task() const = 0;
    [[nodiscard]] virtual const std::vector<std::string>& class_labels() const = 0;
    [[nodiscard]] virtual ScoreMatrix predict_batch(std::span<const Instance> batch) const = 0;
};

using PredictorPtr = std::shared_ptr<const PredictionFunction>;

inline ScoreMatrix predict_batch(const PredictionFunction& f, std::span<const Instance> batch) {
    return f.predict_batch(batch);
}

// Column of the score vector the engine projects onto. Binary classifiers
// default to the second label when no class of interest is given.
inline std::size_t class_index(const PredictionFunction& f, const DesiredTarget& target) {
    if (f.task() == Task::regression) return 0;
    const auto& labels = f.class_labels();
    if (!target.class_of_interest) {
        if (labels.size() == 2) return 1;
        throw Error(ErrorCode::invalid_argument, "multiclass predictor needs a class of interest");
    }
    auto it = std::find(labels.begin(), labels.end(), *target.class_of_interest);
    if (it == labels.end())
        throw Error(ErrorCode::invalid_argument, "unknown class of interest '" + *target.class_of_interest + "'");
    return static_cast<std::size_t>(it - labels.begin());
}

// Scalar f̂ for every instance of the batch.
inline std::vector<double> predict_scores(const PredictionFunction& f, std::span<const Instance> batch,
                                          const DesiredTarget& target) {
    std::size_t c = class_index(f, target);
    auto scores = f.predict_batch(batch);
    std::vector<double> out;
    out.reserve(scores.size());
    for (const auto& s : scores) out.push_back(s.at(c));
    return out;
}

inline double predict_score(const PredictionFunction& f, const Instance& x, const DesiredTarget& target) {
    return predict_scores(f, std::span<const Instance>(&x, 1), target).front();
}

// h(·): argmax over class scores, ties resolved to the lowest label index.
inline std::string hard_label(const PredictionFunction& f, std::span<const double> scores) {
    const auto& labels = f.class_labels();
    if (scores.size() != labels.size()) throw Error(ErrorCode::predictor, "score vector length mismatch");
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[best]) best = c;
    return labels[best];
}

inline std::vector<std::string> sorted_labels(const Outcomes& out) {
    std::set<std::string> s(out.labels.begin(), out.labels.end());
    return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------
// Built-in models

// Binary classifier: positive-class score 1 when feature > cut, else 0.
class ThresholdModel final : public PredictionFunction {
public:
    ThresholdModel(const FeatureSchema& schema, const std::string& feature, double cut,
                   std::vector<std::string> labels = {"0", "1"})
        : feature_(schema.index_of(feature)), cut_(cut), labels_(std::move(labels)) {
        if (!schema[feature_].is_numeric())
            throw Error(ErrorCode::invalid_argument, "threshold feature must be numeric");
        if (labels_.size() != 2) throw Error(ErrorCode::invalid_argument, "threshold model needs two labels");
    }

    [[nodiscard]] Task task() const override { return Task::classification; }
    [[nodiscard]] const std::vector<std::string>& class_labels() const override { return labels_; }
    [[nodiscard]] ScoreMatrix predict_batch(std::span<const Instance> batch) const override {
        ScoreMatrix out;
        out.reserve(batch.size());
        for (const auto& x : batch) {
            double s = x.values.at(feature_) > cut_ ? 1.0 : 0.0;
            out.push_back({1.0 - s, s});
        }
        return out;
    }

private:
    std::size_t feature_;
    double cut_;
    std::vector<std::string> labels_;
};

// Wraps an analytic function. For classification the function yields the
// positive-class probability and the score vector is (1 - s, s).
class FunctionModel final : public PredictionFunction {
public:
    using Fn = std::function<double(const Instance&)>;

    static std::shared_ptr<FunctionModel> regression(Fn fn) {
        return std::shared_ptr<FunctionModel>(new FunctionModel(Task::regression, std::move(fn), {}));
    }
    static std::shared_ptr<FunctionModel> binary(Fn fn, std::vector<std::string> labels = {"0", "1"}) {
        return std::shared_ptr<FunctionModel>(new FunctionModel(Task::classification, std::move(fn), std::move(labels)));
    }

    [[nodiscard]] Task task() const override { return task_; }
    [[nodiscard]] const std::vector<std::string>& class_labels() const override { return labels_; }
    [[nodiscard]] ScoreMatrix predict_batch(std::span<const Instance> batch) const override {
        ScoreMatrix out;
        out.reserve(batch.size());
        for (const auto& x : batch) {
            double s = fn_(x);
            if (task_ == Task::regression) out.push_back({s});
            else out.push_back({1.0 - s, s});
        }
        return out;
    }

private:
    FunctionModel(Task task, Fn fn, std::vector<std::string> labels)
        : task_(task), fn_(std::move(fn)), labels_(std::move(labels)) {}

    Task task_;
    Fn fn_;
    std::vector<std::string> labels_;
};

// k-nearest-neighbor learner under the Gower distance of its training data.
class KnnModel final : public PredictionFunction {
public:
    KnnModel(Dataset data, std::size_t k) : data_(std::make_shared<const Dataset>(std::move(data))), k_(k) {
        if (!data_->outcomes()) throw Error(ErrorCode::invalid_argument, "k-NN needs a dataset with outcomes");
        if (k_ == 0) throw Error(ErrorCode::invalid_argument, "k must be positive");
        if (k_ > data_->size()) throw Error(ErrorCode::invalid_argument, "k exceeds the number of training rows");
        const auto& out = *data_->outcomes();
        task_ = out.task;
        if (task_ == Task::classification) {
            labels_ = sorted_labels(out);
            code_.reserve(out.labels.size());
            for (const auto& l : out.labels)
                code_.push_back(static_cast<std::size_t>(std::lower_bound(labels_.begin(), labels_.end(), l) - labels_.begin()));
        }
        index_ = std::make_unique<GowerIndex>(*data_);
    }

    [[nodiscard]] Task task() const override { return task_; }
    [[nodiscard]] const std::vector<std::string>& class_labels() const override { return labels_; }
    [[nodiscard]] std::size_t k() const noexcept { return k_; }

    [[nodiscard]] ScoreMatrix predict_batch(std::span<const Instance> batch) const override {
        ScoreMatrix out;
        out.reserve(batch.size());
        const auto& outcomes = *data_->outcomes();
        for (const auto& x : batch) {
            auto nn = index_->query(x, k_);
            if (task_ == Task::classification) {
                std::vector<double> s(labels_.size(), 0.0);
                for (const auto& n : nn) s[code_[n.index]] += 1.0;
                for (auto& v : s) v /= static_cast<double>(nn.size());
                out.push_back(std::move(s));
            } else {
                double sum = 0.0;
                for (const auto& n : nn) sum += outcomes.values[n.index];
                out.push_back({sum / static_cast<double>(nn.size())});
            }
        }
        return out;
    }

private:
    std::shared_ptr<const Dataset> data_;
    std::size_t k_;
    Task task_ = Task::classification;
    std::vector<std::string> labels_;
    std::vector<std::size_t> code_;
    std::unique_ptr<GowerIndex> index_;
};

inline std::shared_ptr<KnnModel> fit_knn(const Dataset& data, int k) {
    if (k <= 0) throw Error(ErrorCode::invalid_argument, "k must be positive");
    return std::make_shared<KnnModel>(data, static_cast<std::size_t>(k));
}

// Sigmoid-linear binary classifier fitted by full-batch gradient descent on
// the mean log loss. Numeric features are standardized, categorical features
// one-hot encoded.
class LogisticModel final : public PredictionFunction {
public:
    LogisticModel(const Dataset& data, int epochs, double learning_rate) : schema_(data.schema()) {
        if (!data.outcomes() || data.outcomes()->task != Task::classification)
            throw Error(ErrorCode::invalid_argument, "logistic regression needs a classification outcome");
        labels_ = sorted_labels(*data.outcomes());
        if (labels_.size() != 2)
            throw Error(ErrorCode::invalid_argument, "logistic regression needs a binary outcome, got " +
                                                         std::to_string(labels_.size()) + " classes");
        if (epochs < 0) throw Error(ErrorCode::invalid_argument, "epochs must be non-negative");
        if (!(learning_rate > 0)) throw Error(ErrorCode::invalid_argument, "learning rate must be positive");

        const std::size_t p = schema_.size();
        center_.assign(p, 0.0);
        scale_.assign(p, 1.0);
        for (std::size_t j = 0; j < p; ++j) {
            if (!schema_[j].is_numeric() || data.empty()) continue;
            double sum = 0.0;
            for (const auto& r : data.rows()) sum += r[j];
            center_[j] = sum / static_cast<double>(data.size());
            if (data.sd(j) > 0.0) scale_[j] = data.sd(j);
        }
        std::size_t width = 0;
        for (std::size_t j = 0; j < p; ++j) width += schema_[j].is_numeric() ? 1 : schema_[j].levels.size();
        weights_.assign(width, 0.0);

        std::vector<std::vector<double>> X;
        X.reserve(data.size());
        for (const auto& r : data.rows()) X.push_back(encode(r));
        std::vector<double> y;
        for (const auto& l : data.outcomes()->labels) y.push_back(l == labels_[1] ? 1.0 : 0.0);

        const double n = static_cast<double>(X.size());
        loss_.push_back(loss(X, y));
        for (int e = 0; e < epochs; ++e) {
            std::vector<double> gw(width, 0.0);
            double gb = 0.0;
            for (std::size_t i = 0; i < X.size(); ++i) {
                double err = sigmoid(linear(X[i])) - y[i];
                for (std::size_t c = 0; c < width; ++c) gw[c] += err * X[i][c];
                gb += err;
            }
            for (std::size_t c = 0; c < width; ++c) weights_[c] -= learning_rate * gw[c] / n;
            intercept_ -= learning_rate * gb / n;
            loss_.push_back(loss(X, y));
        }
    }

    [[nodiscard]] Task task() const override { return Task::classification; }
    [[nodiscard]] const std::vector<std::string>& class_labels() const override { return labels_; }
    [[nodiscard]] ScoreMatrix predict_batch(std::span<const Instance> batch) const override {
        ScoreMatrix out;
        out.reserve(batch.size());
        for (const auto& x : batch) {
            if (x.size() != schema_.size()) throw Error(ErrorCode::schema, "instance arity mismatch");
            double s = sigmoid(linear(encode(x)));
            out.push_back({1.0 - s, s});
        }
        return out;
    }

    [[nodiscard]] const std::vector<double>& coefficients() const noexcept { return weights_; }
    [[nodiscard]] double intercept() const noexcept { return intercept_; }
    // Training loss before the first epoch and after each epoch.
    [[nodiscard]] const std::vector<double>& loss_history() const noexcept { return loss_; }

private:
    static double sigmoid(double z) {
        if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
        double e = std::exp(z);
        return e / (1.0 + e);
    }

    [[nodiscard]] std::vector<double> encode(const Instance& x) const {
        std::vector<double> v;
        v.reserve(weights_.empty() ? x.size() : weights_.size());
        for (std::size_t j = 0; j < schema_.size(); ++j) {
            if (schema_[j].is_numeric()) {
                v.push_back((x[j] - center_[j]) / scale_[j]);
            } else {
                for (std::size_t l = 0; l < schema_[j].levels.size(); ++l)
                    v.push_back(static_cast<double>(x[j]) == static_cast<double>(l) ? 1.0 : 0.0);
            }
        }
        return v;
    }

    [[nodiscard]] double linear(const std::vector<double>& v) const {
        double z = intercept_;
        for (std::size_t c = 0; c < v.size(); ++c) z += weights_[c] * v[c];
        return z;
    }

    [[nodiscard]] double loss(const std::vector<std::vector<double>>& X, const std::vector<double>& y) const {
        if (X.empty()) return 0.0;
        double sum = 0.0;
        for (std::size_t i = 0; i < X.size(); ++i) {
            double z = linear(X[i]);
            // log(1 + e^z) - y z, evaluated stably
            double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
            sum += softplus - y[i] * z;
        }
        return sum / static_cast<double>(X.size());
    }

    FeatureSchema schema_;
    std::vector<std::string> labels_;
    std::vector<double> center_, scale_;
    std::vector<double> weights_;
    double intercept_ = 0.0;
    std::vector<double> loss_;
};

inline std::shared_ptr<LogisticModel> fit_logistic(const Dataset& data, int epochs, double learning_rate) {
    return std::make_shared<LogisticModel>(data, epochs, learning_rate);
}

// ---------------------------------------------------------------------------
// Cache

// Canonical text key: values joined by '|', numbers in shortest round-trip form.
inline std::string canonical_key(const Instance& x) {
    std::string key;
    for (std::size_t j = 0; j < x.size(); ++j) {
        if (j) key.push_back('|');
        key += format_double(x[j]);
    }
    return key;
}

class CachedPredictor final : public PredictionFunction {
public:
    explicit CachedPredictor(PredictorPtr inner) : inner_(std::move(inner)) {
        if (!inner_) throw Error(ErrorCode::invalid_argument, "cannot cache a null predictor");
    }

    [[nodiscard]] Task task() const override { return inner_->task(); }
    [[nodiscard]] const std::vector<std::string>& class_labels() const override { return inner_->class_labels(); }

    [[nodiscard]] ScoreMatrix predict_batch(std::span<const Instance> batch) const override {
        ScoreMatrix out(batch.size());
        std::vector<std::string> keys;
        keys.reserve(batch.size());
        std::vector<Instance> missing;
        std::vector<std::size_t> missing_pos;
        std::unordered_map<std::string, std::size_t> pending;  // key -> slot in `missing`
        std::vector<std::size_t> pending_of(batch.size(), SIZE_MAX);
        {
            std::lock_guard lock(mutex_);
            for (std::size_t i = 0; i < batch.size(); ++i) {
                keys.push_back(canonical_key(batch[i]));
                auto it = cache_.find(keys.back());
                if (it != cache_.end()) {
                    out[i] = it->second;
                    ++hits_;
                    continue;
                }
                ++misses_;
                auto [pit, inserted] = pending.emplace(keys.back(), missing.size());
                if (inserted) {
                    missing.push_back(batch[i]);
                    missing_pos.push_back(i);
                }
                pending_of[i] = pit->second;
            }
        }
        if (!missing.empty()) {
            auto fresh = inner_->predict_batch(missing);
            if (fresh.size() != missing.size())
                throw Error(ErrorCode::predictor, "wrapped predictor returned wrong number of rows");
            std::lock_guard lock(mutex_);
            for (std::size_t m = 0; m < missing.size(); ++m) cache_.emplace(keys[missing_pos[m]], fresh[m]);
            for (std::size_t i = 0; i < batch.size(); ++i)
                if (pending_of[i] != SIZE_MAX) out[i] = fresh[pending_of[i]];
        }
        return out;
    }

    [[nodiscard]] std::size_t hits() const noexcept { return hits_; }
    [[nodiscard]] std::size_t misses() const noexcept { return misses_; }
    [[nodiscard]] std::size_t size() const {
        std::lock_guard lock(mutex_);
        return cache_.size();
    }

private:
    PredictorPtr inner_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<std::string, std::vector<double>> cache_;
    mutable std::atomic<std::size_t> hits_{0};
    mutable std::atomic<std::size_t> misses_{0};
};

} // namespace recourse
