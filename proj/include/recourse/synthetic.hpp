#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "recourse/schema.hpp"

namespace recourse {

struct SyntheticSpec {
    std::size_t n = 500;
    std::size_t numeric = 4;
    std::size_t categorical = 0;
    std::uint64_t seed = 1;
};

// Binary classification data. Numeric features x1..xk are uniform on [0, 1],
// categorical features c1..cm take levels a/b/c uniformly. The label is drawn
// from a logistic model on a fixed linear score, so it is learnable but noisy.
inline Dataset make_synthetic_dataset(const SyntheticSpec& spec) {
    std::vector<FeatureDescriptor> feats;
    for (std::size_t j = 0; j < spec.numeric; ++j)
        feats.push_back(FeatureDescriptor::numeric("x" + std::to_string(j + 1), 0.0, 1.0, false, false));
    for (std::size_t j = 0; j < spec.categorical; ++j)
        feats.push_back(FeatureDescriptor::categorical("c" + std::to_string(j + 1), {"a", "b", "c"}));
    FeatureSchema schema(std::move(feats));

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> lvl(0, 2);
    std::vector<Instance> rows;
    Outcomes out{"y", Task::classification, {}, {}};
    for (std::size_t i = 0; i < spec.n; ++i) {
        Instance x;
        double z = 0.0;
        for (std::size_t j = 0; j < spec.numeric; ++j) {
            double v = u(rng);
            x.values.push_back(v);
            // Alternating signs, decaying weights.
            z += (j % 2 == 0 ? 1.0 : -1.0) * 4.0 / static_cast<double>(j + 1) * (v - 0.5);
        }
        for (std::size_t j = 0; j < spec.categorical; ++j) {
            int l = lvl(rng);
            x.values.push_back(static_cast<double>(l));
            z += 0.8 * (l - 1);
        }
        double prob = 1.0 / (1.0 + std::exp(-3.0 * z));
        out.labels.push_back(u(rng) < prob ? "1" : "0");
        rows.push_back(std::move(x));
    }
    return Dataset(std::move(schema), std::move(rows), std::move(out));
}

} // namespace recourse
