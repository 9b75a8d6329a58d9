#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <vector>

#include "pcadv/core.hpp"

namespace pcadv {

// Exact 3D k-d tree. Nearest-neighbor queries break distance ties by lowest
// point index, matching the brute-force rule, so either search path gives
// identical results. Duplicates (frequent in addition mode) are handled.
class KdTree {
public:
    explicit KdTree(const std::vector<Point3>& points) : points_(points) {
        order_.resize(points_.size());
        std::iota(order_.begin(), order_.end(), 0);
        nodes_.reserve(points_.size());
        if (!order_.empty()) root_ = build(0, order_.size(), 0);
    }

    // index of the closest point; ties broken by lowest index
    int nearest(const Point3& query) const {
        Best best;
        search(root_, query, best);
        return best.index;
    }

    // indices of the k closest points ordered by (distance, index)
    std::vector<int> nearest_k(const Point3& query, std::size_t k) const {
        k = std::min(k, points_.size());
        std::vector<Entry> heap;  // max-heap on (dist2, index)
        heap.reserve(k + 1);
        search_k(root_, query, k, heap);
        std::sort(heap.begin(), heap.end(), entry_less);
        std::vector<int> out;
        out.reserve(heap.size());
        for (const auto& e : heap) out.push_back(e.index);
        return out;
    }

private:
    struct Node {
        int point = -1;
        int axis = 0;
        int left = -1, right = -1;
    };
    struct Best {
        double dist2 = std::numeric_limits<double>::infinity();
        int index = std::numeric_limits<int>::max();
    };
    struct Entry {
        double dist2;
        int index;
    };

    static bool entry_less(const Entry& a, const Entry& b) {
        return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
    }

    static double coord(const Point3& p, int axis) {
        return axis == 0 ? p.x : (axis == 1 ? p.y : p.z);
    }

    int build(std::size_t lo, std::size_t hi, int depth) {
        if (lo >= hi) return -1;
        const int axis = depth % 3;
        const std::size_t mid = (lo + hi) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](int a, int b) {
                             const double ca = coord(points_[a], axis);
                             const double cb = coord(points_[b], axis);
                             return ca < cb || (ca == cb && a < b);
                         });
        Node node;
        node.point = order_[mid];
        node.axis = axis;
        const int self = static_cast<int>(nodes_.size());
        nodes_.push_back(node);
        const int left = build(lo, mid, depth + 1);
        const int right = build(mid + 1, hi, depth + 1);
        nodes_[self].left = left;
        nodes_[self].right = right;
        return self;
    }

    void consider(int point_index, const Point3& query, Best& best) const {
        const double d2 = squared_distance(points_[point_index], query);
        if (d2 < best.dist2 || (d2 == best.dist2 && point_index < best.index)) {
            best.dist2 = d2;
            best.index = point_index;
        }
    }

    void search(int node_id, const Point3& query, Best& best) const {
        if (node_id < 0) return;
        const Node& node = nodes_[node_id];
        consider(node.point, query, best);
        const double delta = coord(query, node.axis) - coord(points_[node.point], node.axis);
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        search(near, query, best);
        // <= keeps equal-distance candidates reachable for the index tie-break
        if (delta * delta <= best.dist2) search(far, query, best);
    }

    void search_k(int node_id, const Point3& query, std::size_t k,
                  std::vector<Entry>& heap) const {
        if (node_id < 0) return;
        const Node& node = nodes_[node_id];
        const Entry cand{squared_distance(points_[node.point], query), node.point};
        if (heap.size() < k) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end(), entry_less);
        } else if (entry_less(cand, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), entry_less);
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end(), entry_less);
        }
        const double delta = coord(query, node.axis) - coord(points_[node.point], node.axis);
        const int near = delta < 0.0 ? node.left : node.right;
        const int far = delta < 0.0 ? node.right : node.left;
        search_k(near, query, k, heap);
        if (heap.size() < k || delta * delta <= heap.front().dist2)
            search_k(far, query, k, heap);
    }

    const std::vector<Point3>& points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

}  // namespace pcadv
