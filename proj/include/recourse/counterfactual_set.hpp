#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "recourse/error.hpp"
#include "recourse/objectives.hpp"
#include "recourse/predictor.hpp"
#include "recourse/schema.hpp"

namespace recourse {

// Output of a counterfactual method. Members are unique (exact feature
// equality) and never equal x⋆; `add` silently skips both kinds.
class CounterfactualSet {
public:
    CounterfactualSet(FeatureSchema schema, Instance x_star, DesiredTarget target, std::string method)
        : schema_(std::move(schema)), x_star_(std::move(x_star)), target_(std::move(target)), method_(std::move(method)) {
        detail::check_arity(x_star_, schema_);
    }

    bool add(const Instance& x) {
        detail::check_arity(x, schema_);
        if (x == x_star_) return false;
        if (!seen_.insert(x).second) return false;
        members_.push_back(x);
        return true;
    }

    [[nodiscard]] const FeatureSchema& schema() const noexcept { return schema_; }
    [[nodiscard]] const Instance& x_star() const noexcept { return x_star_; }
    [[nodiscard]] const DesiredTarget& target() const noexcept { return target_; }
    [[nodiscard]] const std::string& method() const noexcept { return method_; }
    [[nodiscard]] const std::vector<Instance>& counterfactuals() const noexcept { return members_; }
    [[nodiscard]] std::size_t size() const noexcept { return members_.size(); }
    [[nodiscard]] bool empty() const noexcept { return members_.empty(); }
    [[nodiscard]] const Instance& operator[](std::size_t i) const { return members_.at(i); }

    // Method-specific notes (flags such as "short" or "all_infeasible").
    json& diagnostics() noexcept { return diagnostics_; }
    [[nodiscard]] const json& diagnostics() const noexcept { return diagnostics_; }
    // Config snapshot and seed sufficient to rerun the method.
    json& provenance() noexcept { return provenance_; }
    [[nodiscard]] const json& provenance() const noexcept { return provenance_; }

    // Keeps members whose prediction lies in Y'. The membership before the
    // first filtering is staged so `revert_subset_to_valid` can restore it.
    void subset_to_valid(const PredictionFunction& f) {
        if (!hidden_) hidden_ = members_;
        if (members_.empty()) return;
        auto scores = predict_scores(f, members_, target_);
        std::vector<Instance> kept;
        for (std::size_t i = 0; i < members_.size(); ++i)
            if (o_valid(scores[i], target_) == 0.0) kept.push_back(members_[i]);
        replace(std::move(kept));
    }

    void revert_subset_to_valid() {
        if (!hidden_) return;
        replace(std::move(*hidden_));
        hidden_.reset();
    }

    [[nodiscard]] bool is_subset() const noexcept { return hidden_.has_value(); }

private:
    void replace(std::vector<Instance> members) {
        members_ = std::move(members);
        seen_ = std::set<Instance>(members_.begin(), members_.end());
    }

    FeatureSchema schema_;
    Instance x_star_;
    DesiredTarget target_;
    std::string method_;
    std::vector<Instance> members_;
    std::set<Instance> seen_;
    std::optional<std::vector<Instance>> hidden_;
    json diagnostics_ = json::object();
    json provenance_ = json::object();
};

} // namespace recourse
