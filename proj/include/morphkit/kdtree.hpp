#pragma once

// Static k-d tree over fixed-dimension points, used for angle-space shortlists.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>
#include <vector>

namespace morphkit {

template <std::size_t Dim>
class KdTree {
public:
    using Point = std::array<double, Dim>;

    struct Neighbor {
        double dist2;
        std::uint32_t index;
        bool operator<(const Neighbor& o) const { return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index); }
    };

    KdTree() = default;

    explicit KdTree(std::vector<Point> points, std::size_t leaf_size = 8) : points_(std::move(points)), leaf_size_(leaf_size) {
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), 0u);
        if (!points_.empty()) build(0, order_.size());
    }

    std::size_t size() const { return points_.size(); }

    /// k nearest points by Euclidean distance, ascending (ties by index).
    std::vector<Neighbor> knn(const Point& q, std::size_t k) const {
        k = std::min(k, points_.size());
        std::priority_queue<Neighbor> heap;
        if (k > 0) search(0, q, k, heap);
        std::vector<Neighbor> out(heap.size());
        for (std::size_t i = out.size(); i-- > 0;) {
            out[i] = heap.top();
            heap.pop();
        }
        return out;
    }

    static double dist2(const Point& a, const Point& b) {
        double s = 0;
        for (std::size_t d = 0; d < Dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
        return s;
    }

private:
    struct Node {
        std::uint32_t begin, end;
        std::int32_t left = -1, right = -1;
        std::uint32_t axis = 0;
        double split = 0;
        Point lo, hi;  // bounding box
    };

    std::int32_t build(std::size_t begin, std::size_t end) {
        const auto id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back({});
        Node node;
        node.begin = static_cast<std::uint32_t>(begin);
        node.end = static_cast<std::uint32_t>(end);
        node.lo.fill(std::numeric_limits<double>::infinity());
        node.hi.fill(-std::numeric_limits<double>::infinity());
        for (std::size_t i = begin; i < end; ++i)
            for (std::size_t d = 0; d < Dim; ++d) {
                node.lo[d] = std::min(node.lo[d], points_[order_[i]][d]);
                node.hi[d] = std::max(node.hi[d], points_[order_[i]][d]);
            }
        if (end - begin > leaf_size_) {
            std::size_t axis = 0;
            for (std::size_t d = 1; d < Dim; ++d)
                if (node.hi[d] - node.lo[d] > node.hi[axis] - node.lo[axis]) axis = d;
            const std::size_t mid = begin + (end - begin) / 2;
            std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                             [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
            node.axis = static_cast<std::uint32_t>(axis);
            node.split = points_[order_[mid]][axis];
            nodes_[id] = node;
            const auto l = build(begin, mid);
            const auto r = build(mid, end);
            nodes_[id].left = l;
            nodes_[id].right = r;
        } else {
            nodes_[id] = node;
        }
        return id;
    }

    double box_dist2(const Node& n, const Point& q) const {
        double s = 0;
        for (std::size_t d = 0; d < Dim; ++d) {
            const double v = q[d] < n.lo[d] ? n.lo[d] - q[d] : (q[d] > n.hi[d] ? q[d] - n.hi[d] : 0.0);
            s += v * v;
        }
        return s;
    }

    void search(std::int32_t id, const Point& q, std::size_t k, std::priority_queue<Neighbor>& heap) const {
        const Node& n = nodes_[id];
        if (heap.size() == k && box_dist2(n, q) > heap.top().dist2) return;
        if (n.left < 0) {
            for (std::uint32_t i = n.begin; i < n.end; ++i) {
                const Neighbor cand{dist2(points_[order_[i]], q), order_[i]};
                if (heap.size() < k) {
                    heap.push(cand);
                } else if (cand < heap.top()) {
                    heap.pop();
                    heap.push(cand);
                }
            }
            return;
        }
        const bool go_left = q[n.axis] < n.split;
        search(go_left ? n.left : n.right, q, k, heap);
        search(go_left ? n.right : n.left, q, k, heap);
    }

    std::vector<Point> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::size_t leaf_size_ = 8;
};

}  // namespace morphkit
