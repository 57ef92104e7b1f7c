#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "minball/types.hpp"
#include "minball/vec.hpp"

namespace minball {

template <int D>
struct Neighbor {
    std::int32_t index = -1;
    double distance = 0.0;
};

// Static exact-KNN index over a snapshot of point positions. Results are
// identical to a brute-force scan, including tie handling: neighbors are
// ordered by (distance, index) ascending. Immutable after construction, so
// concurrent read-only queries are safe.
template <int D>
class KdTree {
  public:
    KdTree() = default;

    explicit KdTree(const std::vector<Vec<D>>& positions) : pts_(positions) {
        if (pts_.empty()) throw std::invalid_argument("KdTree: empty input");
        for (const auto& p : pts_)
            if (!finite(p)) throw std::invalid_argument("KdTree: non-finite point");
        order_.resize(pts_.size());
        for (std::size_t i = 0; i < order_.size(); ++i)
            order_[i] = static_cast<std::int32_t>(i);
        nodes_.reserve(2 * pts_.size() / kLeafSize + 2);
        root_ = build(0, static_cast<std::int32_t>(pts_.size()));
    }

    std::int64_t size() const { return static_cast<std::int64_t>(pts_.size()); }

    // k nearest points by Euclidean distance, ascending, ties by lower index.
    std::vector<Neighbor<D>> knn(const Vec<D>& query, int k,
                                 std::int64_t* visits = nullptr) const {
        if (k < 1 || k > size()) throw std::invalid_argument("KdTree: bad k");
        Heap heap;
        heap.reserve(k);
        search(root_, query, k, heap, visits);
        std::sort(heap.begin(), heap.end());
        std::vector<Neighbor<D>> out(heap.size());
        for (std::size_t i = 0; i < heap.size(); ++i)
            out[i] = {heap[i].second, std::sqrt(heap[i].first)};
        return out;
    }

    // Nearest point of the set minus the face: fetch (D+1) neighbors of
    // `center` and return the first that is not a face vertex. When the face
    // satisfies the Minimum-Ball condition this is exactly the nearest point
    // outside the face; otherwise it is the relevant blocker.
    Neighbor<D> nearest_excluding(const Vec<D>& center, const Face<D>& face) const {
        if (size() <= D)
            throw std::invalid_argument("nearest_excluding: no points outside face");
        const auto nbrs = knn(center, D + 1);
        for (const auto& nb : nbrs)
            if (!face.contains(nb.index)) return nb;
        return nbrs.back();  // unreachable: face has D vertices, list has D+1
    }

    // All indices with dist(p, center) < radius (strict), ascending by index.
    std::vector<std::int32_t> within_radius(const Vec<D>& center, double radius) const {
        std::vector<std::int32_t> out;
        const double r2 = radius * radius;
        radius_search(root_, center, r2, out);
        std::sort(out.begin(), out.end());
        return out;
    }

    const std::vector<Vec<D>>& points() const { return pts_; }

  private:
    static constexpr int kLeafSize = 16;
    // (squared distance, index); max element = current worst candidate.
    using Entry = std::pair<double, std::int32_t>;
    using Heap = std::vector<Entry>;

    struct Node {
        double split = 0.0;
        std::int32_t left = -1, right = -1;  // children, -1 for leaf
        std::int32_t begin = 0, end = 0;     // range into order_ (leaves)
        std::int8_t axis = 0;
    };

    std::int32_t build(std::int32_t begin, std::int32_t end) {
        Node node;
        node.begin = begin;
        node.end = end;
        const std::int32_t id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back(node);
        if (end - begin <= kLeafSize) return id;

        // split the widest extent; ties in coordinates break by index so the
        // construction is reproducible
        Vec<D> lo = pts_[order_[begin]], hi = pts_[order_[begin]];
        for (std::int32_t i = begin + 1; i < end; ++i) {
            for (int d = 0; d < D; ++d) {
                lo[d] = std::min(lo[d], pts_[order_[i]][d]);
                hi[d] = std::max(hi[d], pts_[order_[i]][d]);
            }
        }
        int axis = 0;
        for (int d = 1; d < D; ++d)
            if (hi[d] - lo[d] > hi[axis] - lo[axis]) axis = d;
        const std::int32_t mid = begin + (end - begin) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid,
                         order_.begin() + end, [&](std::int32_t a, std::int32_t b) {
                             const double pa = pts_[a][axis], pb = pts_[b][axis];
                             return pa < pb || (pa == pb && a < b);
                         });
        nodes_[id].axis = static_cast<std::int8_t>(axis);
        nodes_[id].split = pts_[order_[mid]][axis];
        const std::int32_t l = build(begin, mid);
        const std::int32_t r = build(mid, end);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    static bool better(const Entry& a, const Entry& b) { return a < b; }

    void consider(const Vec<D>& q, std::int32_t idx, int k, Heap& heap) const {
        const Entry e{dist2(q, pts_[idx]), idx};
        if (static_cast<int>(heap.size()) < k) {
            heap.push_back(e);
            std::push_heap(heap.begin(), heap.end());
        } else if (better(e, heap.front())) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = e;
            std::push_heap(heap.begin(), heap.end());
        }
    }

    void search(std::int32_t id, const Vec<D>& q, int k, Heap& heap,
                std::int64_t* visits) const {
        const Node& node = nodes_[id];
        if (visits) ++*visits;
        if (node.left < 0) {
            for (std::int32_t i = node.begin; i < node.end; ++i)
                consider(q, order_[i], k, heap);
            return;
        }
        const double delta = q[node.axis] - node.split;
        const std::int32_t near = delta < 0.0 ? node.left : node.right;
        const std::int32_t far = delta < 0.0 ? node.right : node.left;
        search(near, q, k, heap, visits);
        // descend the far side unless the splitting plane is strictly farther
        // than the current worst candidate (equality must recurse so ties
        // resolve exactly as brute force)
        if (static_cast<int>(heap.size()) < k || delta * delta <= heap.front().first)
            search(far, q, k, heap, visits);
    }

    void radius_search(std::int32_t id, const Vec<D>& q, double r2,
                       std::vector<std::int32_t>& out) const {
        const Node& node = nodes_[id];
        if (node.left < 0) {
            for (std::int32_t i = node.begin; i < node.end; ++i)
                if (dist2(q, pts_[order_[i]]) < r2) out.push_back(order_[i]);
            return;
        }
        const double delta = q[node.axis] - node.split;
        const std::int32_t near = delta < 0.0 ? node.left : node.right;
        const std::int32_t far = delta < 0.0 ? node.right : node.left;
        radius_search(near, q, r2, out);
        if (delta * delta <= r2) radius_search(far, q, r2, out);
    }

    std::vector<Vec<D>> pts_;
    std::vector<std::int32_t> order_;
    std::vector<Node> nodes_;
    std::int32_t root_ = 0;
};

// Mean nearest-neighbor distance of a cloud.
template <int D>
inline double estimate_density(const std::vector<Vec<D>>& cloud) {
    if (cloud.size() < 2) throw std::invalid_argument("density: need >= 2 points");
    const KdTree<D> tree(cloud);
    double acc = 0.0;
    for (const auto& p : cloud) acc += tree.knn(p, 2)[1].distance;
    return acc / static_cast<double>(cloud.size());
}

// Per-query-face candidate neighbor lists, refreshed every n1 optimization
// steps. Candidates are the (K + D) nearest points of each face's ball center
// at build time; face vertices are excluded at lookup, not at build.
template <int D>
struct NeighborCache {
    std::int32_t stride = 0;  // K + D candidates per face
    std::vector<std::int32_t> candidates;
    std::int64_t built_at_step = 0;

    std::int64_t face_count() const {
        return stride == 0 ? 0 : static_cast<std::int64_t>(candidates.size()) / stride;
    }
};

template <int D>
inline NeighborCache<D> build_cache(const KdTree<D>& index,
                                    const std::vector<Face<D>>& faces,
                                    const std::vector<MinBall<D>>& balls, int K,
                                    std::int64_t step = 0) {
    if (K < 1) throw std::invalid_argument("build_cache: K must be >= 1");
    if (K + D > index.size())
        throw std::invalid_argument("build_cache: K + dim exceeds point count");
    NeighborCache<D> cache;
    cache.stride = K + D;
    cache.built_at_step = step;
    cache.candidates.assign(faces.size() * cache.stride, -1);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        if (balls[f].degenerate) continue;  // sentinel -1 entries
        const auto nbrs = index.knn(balls[f].center, K + D);
        for (int j = 0; j < cache.stride; ++j)
            cache.candidates[f * cache.stride + j] = nbrs[j].index;
    }
    return cache;
}

// Nearest cached candidate not on the face, with distances recomputed against
// the current center and positions. The list holds K + D entries and a face
// has only D vertices, so a candidate always remains.
template <int D>
inline Neighbor<D> cached_nearest_excluding(const NeighborCache<D>& cache,
                                            std::int64_t face_ordinal,
                                            const Vec<D>& center, const Face<D>& face,
                                            const std::vector<Vec<D>>& positions) {
    const std::int32_t* cand = cache.candidates.data() + face_ordinal * cache.stride;
    double best = std::numeric_limits<double>::infinity();
    std::int32_t best_idx = -1;
    for (std::int32_t j = 0; j < cache.stride; ++j) {
        const std::int32_t idx = cand[j];
        if (idx < 0 || face.contains(idx)) continue;
        const double d2 = dist2(positions[idx], center);
        if (d2 < best || (d2 == best && idx < best_idx)) {
            best = d2;
            best_idx = idx;
        }
    }
    return {best_idx, std::sqrt(best)};
}

}  // namespace minball
