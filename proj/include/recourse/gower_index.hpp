#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "recourse/distance.hpp"
#include "recourse/schema.hpp"

namespace recourse {

// Exact k-nearest-neighbor search over a dataset under the Gower distance.
//
// A kd-tree is built over the numeric features with non-zero range (scaled by
// 1/R̂_j). Categorical and zero-range features only enter the exact leaf
// distance, so the box bound stays a valid lower bound. Results are ordered
// by (distance, row index), matching a brute-force scan.
class GowerIndex {
public:
    struct Neighbor {
        double distance;
        std::size_t index;
        friend bool operator<(const Neighbor& a, const Neighbor& b) {
            return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
        }
    };

    explicit GowerIndex(const Dataset& data, std::size_t leaf_size = 16) : data_(&data), leaf_size_(leaf_size) {
        const auto& schema = data.schema();
        p_ = schema.size();
        range_.resize(p_);
        indicator_.resize(p_);
        for (std::size_t j = 0; j < p_; ++j) {
            range_[j] = data.range_hat(j);
            indicator_[j] = !schema[j].is_numeric() || range_[j] == 0.0;
            if (!indicator_[j]) tree_dims_.push_back(j);
        }
        order_.resize(data.size());
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        if (data.empty()) return;
        build(0, data.size());
        // Rows copied in leaf order so a leaf scan reads contiguous memory.
        rows_.resize(data.size() * p_);
        for (std::size_t i = 0; i < order_.size(); ++i)
            std::copy_n(data.flat().data() + order_[i] * p_, p_, rows_.data() + i * p_);
    }

    [[nodiscard]] std::vector<Neighbor> query(const Instance& q, std::size_t k) const {
        detail::check_arity(q, data_->schema());
        std::vector<Neighbor> heap;  // max-heap on (distance, index)
        k = std::min(k, data_->size());
        if (k == 0) return heap;
        heap.reserve(k + 1);
        if (nodes_.empty()) return heap;
        std::vector<double> qs(tree_dims_.size());
        for (std::size_t d = 0; d < tree_dims_.size(); ++d) qs[d] = q[tree_dims_[d]] / range_[tree_dims_[d]];
        search(0, q, qs, k, heap);
        std::sort_heap(heap.begin(), heap.end());
        return heap;
    }

private:
    struct Node {
        std::size_t begin, end;
        std::size_t left = 0, right = 0;  // 0 = leaf (root is never a child)
    };

    [[nodiscard]] double scaled(std::size_t row, std::size_t j) const {
        return data_->flat()[row * p_ + j] / range_[j];
    }

    [[nodiscard]] const double* lo(std::size_t id) const { return bounds_.data() + id * 2 * tree_dims_.size(); }
    [[nodiscard]] const double* hi(std::size_t id) const { return lo(id) + tree_dims_.size(); }

    std::size_t build(std::size_t begin, std::size_t end) {
        const std::size_t m = tree_dims_.size();
        std::size_t id = nodes_.size();
        nodes_.push_back(Node{begin, end, 0, 0});
        std::vector<double> lo(m, INFINITY), hi(m, -INFINITY);
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t d = 0; d < m; ++d) {
                double v = scaled(order_[i], tree_dims_[d]);
                lo[d] = std::min(lo[d], v);
                hi[d] = std::max(hi[d], v);
            }
        }
        bounds_.insert(bounds_.end(), lo.begin(), lo.end());
        bounds_.insert(bounds_.end(), hi.begin(), hi.end());
        if (end - begin > leaf_size_ && m > 0) {
            std::size_t split = 0;
            double spread = -1.0;
            for (std::size_t d = 0; d < m; ++d) {
                if (hi[d] - lo[d] > spread) {
                    spread = hi[d] - lo[d];
                    split = d;
                }
            }
            if (spread > 0.0) {
                std::size_t mid = begin + (end - begin) / 2;
                std::size_t dim = tree_dims_[split];
                std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 order_.begin() + static_cast<std::ptrdiff_t>(mid),
                                 order_.begin() + static_cast<std::ptrdiff_t>(end),
                                 [&](std::size_t a, std::size_t b) { return scaled(a, dim) < scaled(b, dim); });
                std::size_t l = build(begin, mid);
                std::size_t r = build(mid, end);
                nodes_[id].left = l;
                nodes_[id].right = r;
            }
        }
        return id;
    }

    [[nodiscard]] double lower_bound(std::size_t id, const std::vector<double>& qs) const {
        const double* l = lo(id);
        const double* h = hi(id);
        double sum = 0.0;
        for (std::size_t d = 0; d < qs.size(); ++d) {
            if (qs[d] < l[d]) sum += l[d] - qs[d];
            else if (qs[d] > h[d]) sum += qs[d] - h[d];
        }
        return sum / static_cast<double>(p_);
    }

    // Same arithmetic as gower_distance, so ties resolve exactly as in a scan.
    // Returns early (with a value above `cutoff`) once the partial sum exceeds it.
    [[nodiscard]] double exact(const Instance& q, std::size_t pos, double cutoff) const {
        const double* bv = rows_.data() + pos * p_;
        const double limit = cutoff * static_cast<double>(p_);
        double sum = 0.0;
        for (std::size_t j = 0; j < p_; ++j) {
            sum += indicator_[j] ? (q[j] == bv[j] ? 0.0 : 1.0) : std::abs(q[j] - bv[j]) / range_[j];
            if (sum > limit) return INFINITY;
        }
        return sum / static_cast<double>(p_);
    }

    void search(std::size_t id, const Instance& q, const std::vector<double>& qs, std::size_t k,
                std::vector<Neighbor>& heap) const {
        const Node& node = nodes_[id];
        if (node.left == 0) {
            for (std::size_t i = node.begin; i < node.end; ++i) {
                // The slack keeps equal-distance rows reachable for index tie-breaks.
                double cutoff = heap.size() < k ? INFINITY : heap.front().distance + 1e-12;
                Neighbor cand{exact(q, i, cutoff), order_[i]};
                if (heap.size() < k) {
                    heap.push_back(cand);
                    std::push_heap(heap.begin(), heap.end());
                } else if (cand < heap.front()) {
                    std::pop_heap(heap.begin(), heap.end());
                    heap.back() = cand;
                    std::push_heap(heap.begin(), heap.end());
                }
            }
            return;
        }
        double lb_left = lower_bound(node.left, qs);
        double lb_right = lower_bound(node.right, qs);
        std::pair<double, std::size_t> first{lb_left, node.left}, second{lb_right, node.right};
        if (lb_right < lb_left) std::swap(first, second);
        for (auto [lb, child] : {first, second}) {
            if (heap.size() == k && lb > heap.front().distance + 1e-12) continue;
            search(child, q, qs, k, heap);
        }
    }

    const Dataset* data_;
    std::size_t leaf_size_;
    std::size_t p_ = 0;
    std::vector<double> range_;
    std::vector<unsigned char> indicator_;
    std::vector<std::size_t> tree_dims_;
    std::vector<std::size_t> order_;
    std::vector<double> rows_;
    std::vector<double> bounds_;  // per node: lo then hi over tree_dims_
    std::vector<Node> nodes_;
};

} // namespace recourse
