#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "recourse/distance.hpp"
#include "recourse/error.hpp"
#include "recourse/schema.hpp"

namespace recourse {

using Point = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Minimization: a <= b component-wise with at least one strict improvement.
inline bool dominates(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::invalid_argument, "objective vectors differ in arity");
    bool strict = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strict = true;
    }
    return strict;
}

// Deb's feasibility-first rule. Violations are max(0, o_valid - epsilon).
inline bool constrained_dominates(std::span<const double> a, double violation_a, std::span<const double> b,
                                  double violation_b) {
    const bool fa = violation_a <= 0.0, fb = violation_b <= 0.0;
    if (fa && !fb) return true;
    if (!fa && fb) return false;
    if (!fa && !fb && violation_a != violation_b) return violation_a < violation_b;
    return dominates(a, b);
}

inline double constraint_violation(double o_valid, std::optional<double> epsilon) {
    if (!epsilon) return 0.0;
    return std::max(0.0, o_valid - *epsilon);
}

struct FrontPartition {
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<std::size_t> rank;  // front number per index, 0-based
};

// Fast nondominated sorting. With violations, constrained domination is used.
// Members of each front are listed in ascending index order.
inline FrontPartition nondominated_sort(std::span<const Point> pop,
                                        std::span<const double> violations = {}) {
    const std::size_t n = pop.size();
    if (!violations.empty() && violations.size() != n)
        throw Error(ErrorCode::invalid_argument, "violation count does not match population");
    auto dom = [&](std::size_t a, std::size_t b) {
        return violations.empty() ? dominates(pop[a], pop[b])
                                  : constrained_dominates(pop[a], violations[a], pop[b], violations[b]);
    };
    FrontPartition out;
    out.rank.assign(n, 0);
    if (n == 0) return out;
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> count(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (dom(i, j)) {
                dominated[i].push_back(j);
                ++count[j];
            } else if (dom(j, i)) {
                dominated[j].push_back(i);
                ++count[i];
            }
        }
    }
    std::vector<std::size_t> current;
    for (std::size_t i = 0; i < n; ++i)
        if (count[i] == 0) current.push_back(i);
    std::size_t r = 0;
    while (!current.empty()) {
        std::vector<std::size_t> next;
        for (auto i : current) {
            out.rank[i] = r;
            for (auto j : dominated[i])
                if (--count[j] == 0) next.push_back(j);
        }
        std::sort(next.begin(), next.end());
        out.fronts.push_back(std::move(current));
        current = std::move(next);
        ++r;
    }
    return out;
}

// Indices of the members no other member dominates (the first front), in
// O(n) memory.
inline std::vector<std::size_t> nondominated_indices(std::span<const Point> pop,
                                                     std::span<const double> violations = {}) {
    if (!violations.empty() && violations.size() != pop.size())
        throw Error(ErrorCode::invalid_argument, "violation count does not match population");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < pop.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < pop.size() && !dominated; ++j) {
            if (j == i) continue;
            dominated = violations.empty() ? dominates(pop[j], pop[i])
                                           : constrained_dominates(pop[j], violations[j], pop[i], violations[i]);
        }
        if (!dominated) out.push_back(i);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Crowding distance

// NSGA-II objective-space crowding. Gaps are taken between neighboring
// distinct values, so duplicated vectors score identically; members holding
// an objective's minimum or maximum get +inf. Zero-width objectives add 0.
inline std::vector<double> objective_crowding(std::span<const Point> front) {
    const std::size_t n = front.size();
    std::vector<double> out(n, 0.0);
    if (n <= 2) {
        std::fill(out.begin(), out.end(), kInf);
        return out;
    }
    const std::size_t m = front[0].size();
    for (std::size_t o = 0; o < m; ++o) {
        std::vector<double> values;
        values.reserve(n);
        for (const auto& pt : front) values.push_back(pt[o]);
        std::sort(values.begin(), values.end());
        values.erase(std::unique(values.begin(), values.end()), values.end());
        const double lo = values.front(), hi = values.back();
        if (hi == lo) continue;
        for (std::size_t i = 0; i < n; ++i) {
            double v = front[i][o];
            if (v == lo || v == hi) {
                out[i] = kInf;
                continue;
            }
            auto it = std::lower_bound(values.begin(), values.end(), v);
            out[i] += (*(it + 1) - *(it - 1)) / (hi - lo);
        }
    }
    return out;
}

// Mean distance to the two nearest other members, scaled to [0, 1] by the
// front maximum.
inline std::vector<double> feature_crowding(std::span<const Instance> members, const Dataset& data,
                                            const DistanceFunction& dist) {
    const std::size_t n = members.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    Matrix d = dist(members, members, data);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> others;
        for (std::size_t k = 0; k < n; ++k)
            if (k != i) others.push_back(d(i, k));
        std::size_t take = std::min<std::size_t>(2, others.size());
        std::partial_sort(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(take), others.end());
        out[i] = std::accumulate(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(take), 0.0) /
                 static_cast<double>(take);
    }
    double mx = *std::max_element(out.begin(), out.end());
    if (mx > 0.0)
        for (auto& v : out) v /= mx;
    return out;
}

// Objective-space crowding plus feature-space crowding, equal weights.
inline std::vector<double> crowding_distance(std::span<const Point> objectives, std::span<const Instance> members,
                                             const Dataset& data, const DistanceFunction& dist) {
    if (objectives.size() != members.size())
        throw Error(ErrorCode::invalid_argument, "crowding needs one instance per objective vector");
    auto out = objective_crowding(objectives);
    if (objectives.size() <= 2) return out;
    auto feat = feature_crowding(members, data, dist);
    for (std::size_t i = 0; i < out.size(); ++i)
        if (std::isfinite(out[i])) out[i] += feat[i];
    return out;
}

// Positions 0..n-1 ordered by descending score, ties by position.
inline std::vector<std::size_t> crowding_distance_sort(std::span<const double> scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

// ---------------------------------------------------------------------------
// Hypervolume

namespace detail {

inline std::vector<Point> nondominated_prefix(std::vector<Point> pts, std::size_t dims) {
    std::vector<Point> keep;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
            if (i == j) continue;
            bool le = true, lt = false;
            for (std::size_t d = 0; d < dims; ++d) {
                if (pts[j][d] > pts[i][d]) { le = false; break; }
                if (pts[j][d] < pts[i][d]) lt = true;
            }
            // identical points: keep the first occurrence only
            dominated = le && (lt || j < i);
        }
        if (!dominated) keep.push_back(pts[i]);
    }
    return keep;
}

// Volume dominated by pts in the first `dims` coordinates, bounded by ref.
// Every point is strictly better than ref in each of those coordinates.
inline double hv_slice(std::vector<Point> pts, std::span<const double> ref, std::size_t dims) {
    if (pts.empty()) return 0.0;
    if (dims == 1) {
        double best = ref[0];
        for (const auto& p : pts) best = std::min(best, p[0]);
        return ref[0] - best;
    }
    if (pts.size() > 1) pts = nondominated_prefix(std::move(pts), dims);
    const std::size_t last = dims - 1;
    std::sort(pts.begin(), pts.end(), [&](const Point& a, const Point& b) { return a[last] < b[last]; });
    if (dims == 2) {
        double area = 0.0, best_x = ref[0];
        for (std::size_t i = 0; i < pts.size(); ++i) {
            best_x = std::min(best_x, pts[i][0]);
            double next = i + 1 < pts.size() ? pts[i + 1][1] : ref[1];
            area += (ref[0] - best_x) * (next - pts[i][1]);
        }
        return area;
    }
    double vol = 0.0;
    std::vector<Point> active;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        active.push_back(pts[i]);
        double next = i + 1 < pts.size() ? pts[i + 1][last] : ref[last];
        double height = next - pts[i][last];
        if (height > 0.0) vol += hv_slice(active, ref, last) * height;
    }
    return vol;
}

inline double hv_monte_carlo(const std::vector<Point>& pts, std::span<const double> ref, std::size_t samples,
                             std::uint64_t seed) {
    const std::size_t m = ref.size();
    Point lo(ref.begin(), ref.end());
    for (const auto& p : pts)
        for (std::size_t d = 0; d < m; ++d) lo[d] = std::min(lo[d], p[d]);
    double box = 1.0;
    for (std::size_t d = 0; d < m; ++d) box *= ref[d] - lo[d];
    if (box <= 0.0) return 0.0;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t hit = 0;
    Point s(m);
    for (std::size_t t = 0; t < samples; ++t) {
        for (std::size_t d = 0; d < m; ++d) s[d] = lo[d] + u(rng) * (ref[d] - lo[d]);
        for (const auto& p : pts) {
            bool covers = true;
            for (std::size_t d = 0; d < m && covers; ++d) covers = p[d] <= s[d];
            if (covers) {
                ++hit;
                break;
            }
        }
    }
    return box * static_cast<double>(hit) / static_cast<double>(samples);
}

} // namespace detail

struct HvRefPoint {
    Point reference;
};

// Lebesgue measure of the union of boxes [point, ref]. Exact slicing for
// arity <= 4; seeded Monte-Carlo (1e5 samples) above that.
inline double hypervolume(std::span<const Point> points, std::span<const double> ref) {
    std::vector<Point> inside;
    for (const auto& p : points) {
        if (p.size() != ref.size()) throw Error(ErrorCode::invalid_argument, "point arity does not match reference");
        bool strictly = true;
        for (std::size_t d = 0; d < ref.size() && strictly; ++d) strictly = p[d] < ref[d];
        if (strictly) inside.push_back(p);
    }
    if (inside.empty() || ref.empty()) return 0.0;
    if (ref.size() <= 4) return detail::hv_slice(std::move(inside), ref, ref.size());
    return detail::hv_monte_carlo(inside, ref, 100000, 0x5eedULL);
}

inline double hypervolume(std::span<const Point> points, const HvRefPoint& ref) {
    return hypervolume(points, std::span<const double>(ref.reference));
}

} // namespace recourse
