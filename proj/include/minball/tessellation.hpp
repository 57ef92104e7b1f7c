#pragma once

#include <cstdint>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "minball/geometry.hpp"
#include "minball/kdtree.hpp"
#include "minball/parallel.hpp"
#include "minball/types.hpp"

namespace minball {

// ---------------------------------------------------------------------------
// Face probabilities
// ---------------------------------------------------------------------------

// Probability that a face is "real": min of its vertices' psi. The argmin
// vertex (ties to the lowest index) is where the subgradient flows.
template <int D>
inline std::vector<double> lambda_real(const PointSet<D>& points,
                                       const std::vector<Face<D>>& faces,
                                       std::vector<std::int32_t>* argmin = nullptr) {
    std::vector<double> out(faces.size());
    if (argmin) argmin->assign(faces.size(), -1);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        double best = points.psi[faces[f][0]];
        std::int32_t best_v = faces[f][0];
        for (int i = 1; i < D; ++i) {
            const double s = points.psi[faces[f][i]];
            if (s < best) {
                best = s;
                best_v = faces[f][i];
            }
        }
        out[f] = best;
        if (argmin) (*argmin)[f] = best_v;
    }
    return out;
}

template <int D>
inline std::vector<MinBall<D>> min_balls(const PointSet<D>& points,
                                         const std::vector<Face<D>>& faces) {
    std::vector<MinBall<D>> balls(faces.size());
    parallel_for(static_cast<std::int64_t>(faces.size()),
                 [&](std::int64_t f) { balls[f] = min_ball_of_face(points, faces[f]); });
    return balls;
}

// Signed distance of a face's minimum ball against the full point set,
// looked up through the exact index. -inf for degenerate balls.
template <int D>
inline double exact_signed_distance(const PointSet<D>& points, const Face<D>& face,
                                    const KdTree<D>& index) {
    const MinBall<D> ball = min_ball_of_face(points, face);
    if (ball.degenerate) return -std::numeric_limits<double>::infinity();
    const auto nb = index.nearest_excluding(ball.center, face);
    return nb.distance - ball.radius;
}

// Probability that each face satisfies the Minimum-Ball condition:
// sigma(alpha * signed distance). Degenerate balls map to 0.
template <int D>
inline std::vector<double> lambda_min(const PointSet<D>& points,
                                      const std::vector<Face<D>>& faces, double alpha,
                                      const KdTree<D>& index) {
    if (!(alpha > 0.0)) throw std::invalid_argument("lambda_min: alpha must be > 0");
    std::vector<double> out(faces.size());
    parallel_for(static_cast<std::int64_t>(faces.size()), [&](std::int64_t f) {
        const MinBall<D> ball = min_ball_of_face(points, faces[f]);
        if (ball.degenerate) {
            out[f] = 0.0;
            return;
        }
        const auto nb = index.nearest_excluding(ball.center, faces[f]);
        out[f] = sigmoid(alpha * (nb.distance - ball.radius));
    });
    return out;
}

template <int D>
inline std::vector<double> lambda_min(const PointSet<D>& points,
                                      const std::vector<Face<D>>& faces, double alpha,
                                      const NeighborCache<D>& cache) {
    if (!(alpha > 0.0)) throw std::invalid_argument("lambda_min: alpha must be > 0");
    if (cache.face_count() != static_cast<std::int64_t>(faces.size()))
        throw std::invalid_argument("lambda_min: cache built for different faces");
    std::vector<double> out(faces.size());
    parallel_for(static_cast<std::int64_t>(faces.size()), [&](std::int64_t f) {
        const MinBall<D> ball = min_ball_of_face(points, faces[f]);
        if (ball.degenerate) {
            out[f] = 0.0;
            return;
        }
        const auto nb =
            cached_nearest_excluding(cache, f, ball.center, faces[f], points.positions);
        out[f] = sigmoid(alpha * (nb.distance - ball.radius));
    });
    return out;
}

template <int D, typename Lookup>
inline std::vector<FaceProbability> face_probability(const PointSet<D>& points,
                                                     const std::vector<Face<D>>& faces,
                                                     double alpha,
                                                     const Lookup& lookup) {
    const auto lmin = lambda_min(points, faces, alpha, lookup);
    const auto lreal = lambda_real(points, faces);
    std::vector<FaceProbability> out(faces.size());
    for (std::size_t f = 0; f < faces.size(); ++f)
        out[f] = {lmin[f], lreal[f], lmin[f] * lreal[f]};
    return out;
}

// ---------------------------------------------------------------------------
// Query face generation
// ---------------------------------------------------------------------------

namespace detail {

template <int D>
inline std::vector<std::int32_t> psi_positive(const PointSet<D>& points,
                                              double threshold = 0.5) {
    std::vector<std::int32_t> pos;
    for (std::int32_t i = 0; i < points.size(); ++i)
        if (points.psi[i] >= threshold) pos.push_back(i);
    return pos;
}

// All D-subsets of `ids` as canonical faces.
template <int D>
inline void all_combinations(const std::vector<std::int32_t>& ids,
                             std::unordered_set<Face<D>, FaceHash<D>>& out) {
    const std::size_t n = ids.size();
    if constexpr (D == 2) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) out.insert(Face<2>(ids[i], ids[j]));
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                for (std::size_t k = j + 1; k < n; ++k)
                    out.insert(Face<3>(ids[i], ids[j], ids[k]));
    }
}

}  // namespace detail

template <int D>
struct DelaunayOracleResult {
    std::vector<Face<D>> faces;     // every face possessing some empty bounding ball
    std::vector<Face<D>> boundary;  // zero-margin cases (e.g. cocircular points)
};

// Brute-force enumeration of faces admitting an empty bounding ball. A
// bounding ball center moves on the line through the minimum-ball center
// perpendicular to the face's affine hull; each outside point constrains the
// feasible parameter to a half-line, so emptiness reduces to a 1D interval
// intersection. Test oracle, quadratic/cubic cost: keep N small.
template <int D>
inline DelaunayOracleResult<D> delaunay_oracle(const PointSet<D>& points) {
    if (points.size() > 512)
        throw std::invalid_argument("delaunay_oracle: oracle scale is N <= 512");
    const auto& P = points.positions;
    double diam2 = 0.0;
    for (std::int32_t i = 0; i < points.size(); ++i)
        for (std::int32_t j = i + 1; j < points.size(); ++j)
            diam2 = std::max(diam2, dist2(P[i], P[j]));
    const double tol_t = 1e-9 * std::sqrt(diam2);
    const double tol_a = 1e-12 * std::sqrt(diam2);
    const double tol_b = 1e-12 * diam2;

    DelaunayOracleResult<D> result;
    std::vector<std::int32_t> all(points.size());
    for (std::int32_t i = 0; i < points.size(); ++i) all[i] = i;
    std::unordered_set<Face<D>, FaceHash<D>> cand;
    detail::all_combinations<D>(all, cand);

    for (const Face<D>& face : cand) {
        Vec<D> c0, axis;
        if constexpr (D == 2) {
            const Vec<2> e = P[face[1]] - P[face[0]];
            const double len = norm(e);
            if (len <= 1e-12) continue;
            c0 = 0.5 * (P[face[0]] + P[face[1]]);
            axis = perp(e) / len;
        } else {
            const MinBall<3> mb = min_ball(P[face[0]], P[face[1]], P[face[2]]);
            if (mb.degenerate) continue;
            c0 = mb.center;
            const Vec<3> n = cross(P[face[1]] - P[face[0]], P[face[2]] - P[face[0]]);
            axis = n / norm(n);
        }
        double lo = -std::numeric_limits<double>::infinity();
        double hi = std::numeric_limits<double>::infinity();
        bool feasible = true;
        const Vec<D>& p1 = P[face[0]];
        for (std::int32_t q = 0; q < points.size() && feasible; ++q) {
            if (face.contains(q)) continue;
            // f(t) = |q - c(t)|^2 - |p1 - c(t)|^2 = B + A t must stay >= 0
            const double B = dist2(P[q], c0) - dist2(p1, c0);
            const double A = -2.0 * dot(axis, P[q] - p1);
            if (std::abs(A) <= tol_a) {
                if (B < -tol_b) feasible = false;
                continue;
            }
            const double t = -B / A;
            if (A > 0.0)
                lo = std::max(lo, t);
            else
                hi = std::min(hi, t);
        }
        if (!feasible || lo > hi + tol_t) continue;
        result.faces.push_back(face);
        if (hi - lo <= 2.0 * tol_t) result.boundary.push_back(face);
    }
    std::sort(result.faces.begin(), result.faces.end());
    std::sort(result.boundary.begin(), result.boundary.end());
    return result;
}

// Candidate faces for probability queries: for every psi-positive point, all
// faces formed with (D-1)-subsets of its k nearest psi-positive neighbors.
// With `exact_delaunay_pass` (Step-3 mode) the set is completed with the
// brute-force oracle when the point count permits.
template <int D>
inline std::vector<Face<D>> generate_query_faces(const PointSet<D>& points,
                                                 int knn_k = 10,
                                                 bool exact_delaunay_pass = false,
                                                 double psi_threshold = 0.5) {
    const auto pos = detail::psi_positive(points, psi_threshold);
    if (static_cast<std::int64_t>(pos.size()) < D)
        throw std::invalid_argument("generate_query_faces: fewer than dim psi-positive points");

    std::unordered_set<Face<D>, FaceHash<D>> set;
    std::vector<Vec<D>> pos_pts(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos_pts[i] = points.positions[pos[i]];
    const KdTree<D> pos_index(pos_pts);
    const int k = std::min<int>(knn_k, static_cast<int>(pos.size()) - 1);

    std::vector<std::vector<std::int32_t>> nbrs(pos.size());
    parallel_for(static_cast<std::int64_t>(pos.size()), [&](std::int64_t i) {
        const auto found = pos_index.knn(pos_pts[i], k + 1);
        auto& my = nbrs[i];
        for (const auto& nb : found) {
            if (nb.index == static_cast<std::int32_t>(i)) continue;
            my.push_back(pos[nb.index]);
            if (static_cast<int>(my.size()) == k) break;
        }
    });
    for (std::size_t i = 0; i < pos.size(); ++i) {
        const std::int32_t self = pos[i];
        const auto& my = nbrs[i];
        if constexpr (D == 2) {
            for (std::int32_t nb : my) set.insert(Face<2>(self, nb));
        } else {
            for (std::size_t a = 0; a < my.size(); ++a)
                for (std::size_t b = a + 1; b < my.size(); ++b)
                    set.insert(Face<3>(self, my[a], my[b]));
        }
    }

    if (exact_delaunay_pass && points.size() <= 512) {
        PointSet<D> sub;
        sub.positions = pos_pts;
        sub.psi.assign(pos_pts.size(), 1.0);
        const auto oracle = delaunay_oracle(sub);
        for (const auto& f : oracle.faces) {
            std::array<std::int32_t, D> remapped;
            for (int i = 0; i < D; ++i) remapped[i] = pos[f[i]];
            set.insert(Face<D>(remapped));
        }
    }

    std::vector<Face<D>> out(set.begin(), set.end());
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Hard mesh extraction
// ---------------------------------------------------------------------------

// Hard tessellation: faces whose minimum ball holds no other point strictly
// inside (signed distance >= 0) and whose vertices all have psi above the
// threshold. Vertices are the points referenced by at least one kept face.
template <int D>
inline Mesh<D> extract_mesh(const PointSet<D>& points, double threshold,
                            const KdTree<D>& index) {
    std::vector<std::int32_t> pos;
    for (std::int32_t i = 0; i < points.size(); ++i)
        if (points.psi[i] > threshold) pos.push_back(i);

    Mesh<D> mesh;
    if (static_cast<std::int64_t>(pos.size()) < D) return mesh;

    std::unordered_set<Face<D>, FaceHash<D>> cand_set;
    if (pos.size() <= 256) {
        detail::all_combinations<D>(pos, cand_set);
    } else {
        const auto knn_faces = generate_query_faces(points, 10, false, threshold);
        for (const auto& f : knn_faces) {
            bool ok = true;
            for (int i = 0; i < D; ++i) ok = ok && points.psi[f[i]] > threshold;
            if (ok) cand_set.insert(f);
        }
    }
    std::vector<Face<D>> cand(cand_set.begin(), cand_set.end());
    std::sort(cand.begin(), cand.end());

    std::vector<char> keep(cand.size(), 0);
    parallel_for(static_cast<std::int64_t>(cand.size()), [&](std::int64_t f) {
        keep[f] = exact_signed_distance(points, cand[f], index) >= 0.0;
    });

    std::vector<std::int32_t> remap(points.size(), -1);
    for (std::size_t f = 0; f < cand.size(); ++f) {
        if (!keep[f]) continue;
        std::array<std::int32_t, D> v;
        for (int i = 0; i < D; ++i) {
            const std::int32_t p = cand[f][i];
            if (remap[p] < 0) {
                remap[p] = static_cast<std::int32_t>(mesh.vertices.size());
                mesh.vertices.push_back(points.positions[p]);
                mesh.source_index.push_back(p);
            }
            v[i] = remap[p];
        }
        mesh.faces.push_back(Face<D>(v));
    }
    return mesh;
}

}  // namespace minball
