#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "minball/geometry.hpp"
#include "minball/kdtree.hpp"
#include "minball/parallel.hpp"
#include "minball/rng.hpp"
#include "minball/types.hpp"

namespace minball {

struct MetricsReport {
    double cd = 0.0;
    double f1 = 0.0;
    double nc = 0.0;
    double ecd = 0.0;
    double ef1 = 0.0;
    double ar_mean = 0.0;
    double si_ratio = 0.0;
    double nme_ratio = 0.0;
    double nmv_ratio = 0.0;
    std::int64_t n_verts = 0;
    std::int64_t n_faces = 0;
    double runtime_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// Surface sampling
// ---------------------------------------------------------------------------

template <int D>
struct SurfaceSamples {
    std::vector<Vec<D>> positions;
    std::vector<Vec<D>> normals;  // unit; unoriented
};

template <int D>
inline double face_measure(const Mesh<D>& mesh, const Face<D>& f) {
    if constexpr (D == 2) {
        return dist(mesh.vertices[f[0]], mesh.vertices[f[1]]);
    } else {
        return 0.5 * norm(cross(mesh.vertices[f[1]] - mesh.vertices[f[0]],
                                mesh.vertices[f[2]] - mesh.vertices[f[0]]));
    }
}

template <int D>
inline Vec<D> face_normal(const Mesh<D>& mesh, const Face<D>& f) {
    if constexpr (D == 2) {
        const Vec<2> e = mesh.vertices[f[1]] - mesh.vertices[f[0]];
        const double len = norm(e);
        return len > 0 ? perp(e) / len : Vec<2>{0, 0};
    } else {
        const Vec<3> n = cross(mesh.vertices[f[1]] - mesh.vertices[f[0]],
                               mesh.vertices[f[2]] - mesh.vertices[f[0]]);
        const double len = norm(n);
        return len > 0 ? n / len : Vec<3>{0, 0, 0};
    }
}

// Measure-weighted random samples with their source-face normals.
template <int D>
inline SurfaceSamples<D> sample_surface(const Mesh<D>& mesh, int n_samples,
                                        std::uint64_t seed) {
    if (mesh.faces.empty()) throw std::invalid_argument("sample_surface: empty mesh");
    std::vector<double> cumulative(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        total += face_measure(mesh, mesh.faces[f]);
        cumulative[f] = total;
    }
    if (!(total > 0.0))
        throw std::invalid_argument("sample_surface: mesh has zero measure");

    SurfaceSamples<D> out;
    out.positions.resize(n_samples);
    out.normals.resize(n_samples);
    parallel_for(n_samples, [&](std::int64_t i) {
        Rng rng(seed, static_cast<std::uint64_t>(i));
        const double u = rng.next_double() * total;
        const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
        const std::size_t f = std::min<std::size_t>(
            static_cast<std::size_t>(it - cumulative.begin()), mesh.faces.size() - 1);
        const auto& face = mesh.faces[f];
        if constexpr (D == 2) {
            const double t = rng.next_double();
            out.positions[i] =
                (1.0 - t) * mesh.vertices[face[0]] + t * mesh.vertices[face[1]];
        } else {
            double a = rng.next_double(), b = rng.next_double();
            if (a + b > 1.0) {
                a = 1.0 - a;
                b = 1.0 - b;
            }
            out.positions[i] = (1.0 - a - b) * mesh.vertices[face[0]] +
                               a * mesh.vertices[face[1]] + b * mesh.vertices[face[2]];
        }
        out.normals[i] = face_normal(mesh, face);
    });
    return out;
}

// ---------------------------------------------------------------------------
// Chamfer distance / F1
// ---------------------------------------------------------------------------

inline constexpr int kMetricSamples = 10000;  // desk-scale default
inline constexpr double kMetricTau = 0.005;

namespace detail {

// mean squared nearest distance and the fraction within tau
template <int D>
inline std::pair<double, double> one_sided(const std::vector<Vec<D>>& from,
                                           const KdTree<D>& to_tree, double tau) {
    std::vector<double> d(from.size());
    parallel_for(static_cast<std::int64_t>(from.size()), [&](std::int64_t i) {
        d[i] = to_tree.knn(from[i], 1)[0].distance;
    });
    double acc = 0.0, hit = 0.0;
    for (const double v : d) {
        acc += v * v;
        hit += v <= tau;
    }
    return {acc / static_cast<double>(from.size()),
            hit / static_cast<double>(from.size())};
}

}  // namespace detail

// CD: mean of the two one-sided mean squared nearest distances.
// F1: harmonic mean of precision and recall at threshold tau.
template <int D>
inline std::pair<double, double> chamfer_f1(const Mesh<D>& pred, const Mesh<D>& gt,
                                            int n_samples = kMetricSamples,
                                            double tau = kMetricTau,
                                            std::uint64_t seed = 0) {
    // the same seed stream on both meshes: identical meshes sample
    // identically, so their distance is exactly zero
    const auto ps = sample_surface(pred, n_samples, seed);
    const auto gs = sample_surface(gt, n_samples, seed);
    const KdTree<D> pt(ps.positions), gtree(gs.positions);
    const auto [acc_sq, precision] = detail::one_sided<D>(ps.positions, gtree, tau);
    const auto [comp_sq, recall] = detail::one_sided<D>(gs.positions, pt, tau);
    const double cd = 0.5 * (acc_sq + comp_sq);
    const double f1 =
        precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    return {cd, f1};
}

// Mean |cos| between sample normals and their nearest counterpart's normal,
// two-sided. Absolute value: the tessellation is unoriented.
template <int D>
inline double normal_consistency(const Mesh<D>& pred, const Mesh<D>& gt,
                                 int n_samples = kMetricSamples,
                                 std::uint64_t seed = 0) {
    const auto ps = sample_surface(pred, n_samples, seed);
    const auto gs = sample_surface(gt, n_samples, seed);
    const KdTree<D> pt(ps.positions), gtree(gs.positions);
    auto side = [&](const SurfaceSamples<D>& from, const SurfaceSamples<D>& to,
                    const KdTree<D>& to_tree) {
        std::vector<double> c(from.positions.size());
        parallel_for(static_cast<std::int64_t>(from.positions.size()),
                     [&](std::int64_t i) {
                         const auto nb = to_tree.knn(from.positions[i], 1)[0];
                         c[i] = std::abs(dot(from.normals[i], to.normals[nb.index]));
                     });
        double acc = 0.0;
        for (const double v : c) acc += v;
        return acc / static_cast<double>(from.positions.size());
    };
    return 0.5 * (side(ps, gs, gtree) + side(gs, ps, pt));
}

// ---------------------------------------------------------------------------
// Edge (sharp feature) metrics
// ---------------------------------------------------------------------------

namespace detail {

// 3D: boundary and non-manifold edges always count; interior edges count
// when the normals of the two incident faces deviate by more than the
// threshold. 2D: chain endpoints, junction vertices, and sharp turns.
template <int D>
inline std::vector<Vec<D>> sharp_feature_samples(const Mesh<D>& mesh,
                                                 double angle_thresh_deg,
                                                 int n_samples, std::uint64_t seed) {
    const double cos_thresh =
        std::cos(angle_thresh_deg * std::numbers::pi / 180.0);
    std::vector<Vec<D>> out;
    if constexpr (D == 3) {
        std::map<Face<2>, std::vector<std::int32_t>> edge_faces;
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            const auto& face = mesh.faces[f];
            for (const auto [a, b] :
                 {std::pair{face[0], face[1]}, {face[1], face[2]}, {face[0], face[2]}})
                edge_faces[Face<2>(a, b)].push_back(static_cast<std::int32_t>(f));
        }
        std::vector<Face<2>> sharp;
        for (const auto& [edge, faces] : edge_faces) {
            bool is_sharp = faces.size() != 2;
            if (!is_sharp) {
                const auto n0 = face_normal(mesh, mesh.faces[faces[0]]);
                const auto n1 = face_normal(mesh, mesh.faces[faces[1]]);
                is_sharp = std::abs(dot(n0, n1)) < cos_thresh;
            }
            if (is_sharp) sharp.push_back(edge);
        }
        if (sharp.empty()) return out;
        std::vector<double> cumulative(sharp.size());
        double total = 0.0;
        for (std::size_t e = 0; e < sharp.size(); ++e) {
            total += dist(mesh.vertices[sharp[e][0]], mesh.vertices[sharp[e][1]]);
            cumulative[e] = total;
        }
        if (!(total > 0.0)) return out;
        out.resize(n_samples);
        for (int i = 0; i < n_samples; ++i) {
            Rng rng(seed, static_cast<std::uint64_t>(i));
            const double u = rng.next_double() * total;
            const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
            const std::size_t e = std::min<std::size_t>(
                static_cast<std::size_t>(it - cumulative.begin()), sharp.size() - 1);
            const double t = rng.next_double();
            out[i] = (1.0 - t) * mesh.vertices[sharp[e][0]] +
                     t * mesh.vertices[sharp[e][1]];
        }
    } else {
        std::vector<std::vector<std::int32_t>> incident(mesh.vertices.size());
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            incident[mesh.faces[f][0]].push_back(static_cast<std::int32_t>(f));
            incident[mesh.faces[f][1]].push_back(static_cast<std::int32_t>(f));
        }
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
            bool is_sharp = incident[v].size() == 1 || incident[v].size() > 2;
            if (incident[v].size() == 2) {
                auto dir = [&](std::int32_t f) {
                    const auto& face = mesh.faces[incident[v][f]];
                    const std::int32_t other =
                        face[0] == static_cast<std::int32_t>(v) ? face[1] : face[0];
                    Vec<2> e = mesh.vertices[other] - mesh.vertices[v];
                    return e / norm(e);
                };
                is_sharp = std::abs(dot(dir(0), dir(1))) < cos_thresh;
            }
            if (is_sharp && !incident[v].empty()) out.push_back(mesh.vertices[v]);
        }
    }
    return out;
}

}  // namespace detail

// Chamfer/F1 restricted to sharp-feature samples. Both sets empty: perfect
// agreement (0, 1); one-sided emptiness: worst case.
template <int D>
inline std::pair<double, double> edge_metrics(const Mesh<D>& pred, const Mesh<D>& gt,
                                              double angle_thresh_deg = 30.0,
                                              double tau = kMetricTau,
                                              int n_samples = kMetricSamples,
                                              std::uint64_t seed = 0) {
    const auto pe =
        detail::sharp_feature_samples(pred, angle_thresh_deg, n_samples, seed);
    const auto ge =
        detail::sharp_feature_samples(gt, angle_thresh_deg, n_samples, seed);
    if (pe.empty() && ge.empty()) return {0.0, 1.0};
    if (pe.empty() || ge.empty()) {
        Vec<D> lo, hi;
        const auto& any = pe.empty() ? ge : pe;
        lo = hi = any[0];
        for (const auto& p : any)
            for (int d = 0; d < D; ++d) {
                lo[d] = std::min(lo[d], p[d]);
                hi[d] = std::max(hi[d], p[d]);
            }
        return {dist2(lo, hi), 0.0};
    }
    const KdTree<D> pt(pe), gtree(ge);
    const auto [a, precision] = detail::one_sided<D>(pe, gtree, tau);
    const auto [b, recall] = detail::one_sided<D>(ge, pt, tau);
    const double f1 =
        precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    return {0.5 * (a + b), f1};
}

// ---------------------------------------------------------------------------
// Mesh quality: aspect ratio, self-intersection, non-manifoldness
// ---------------------------------------------------------------------------

namespace detail {

inline double orient2d(const Vec<2>& a, const Vec<2>& b, const Vec<2>& c) {
    return cross2(b - a, c - a);
}

// proper segment crossing, shared endpoints excluded by the caller
inline bool segments_cross(const Vec<2>& a, const Vec<2>& b, const Vec<2>& c,
                           const Vec<2>& d) {
    const double d1 = orient2d(a, b, c), d2 = orient2d(a, b, d);
    const double d3 = orient2d(c, d, a), d4 = orient2d(c, d, b);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
        ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    // collinear overlap of positive length
    if (d1 == 0 && d2 == 0 && d3 == 0 && d4 == 0) {
        const Vec<2> e = b - a;
        const double len2 = norm2(e);
        if (len2 == 0) return false;
        double t0 = dot(c - a, e) / len2, t1 = dot(d - a, e) / len2;
        if (t0 > t1) std::swap(t0, t1);
        return std::min(t1, 1.0) - std::max(t0, 0.0) > 1e-12;
    }
    return false;
}

inline double orient3d(const Vec<3>& a, const Vec<3>& b, const Vec<3>& c,
                       const Vec<3>& d) {
    return dot(d - a, cross(b - a, c - a));
}

// Moller-style triangle-triangle intersection: plane-side rejection, then
// interval overlap along the planes' intersection line. Transversal crossings
// only; touching contacts within epsilon do not count.
inline bool triangles_intersect(const Vec<3>* t1, const Vec<3>* t2) {
    double scale = 0.0;
    for (int i = 0; i < 3; ++i) {
        scale = std::max(scale, norm2(t1[i]));
        scale = std::max(scale, norm2(t2[i]));
    }
    const double eps = 1e-12 * std::max(scale, 1e-300);

    double d2[3], d1[3];
    for (int i = 0; i < 3; ++i) d2[i] = orient3d(t1[0], t1[1], t1[2], t2[i]);
    for (int i = 0; i < 3; ++i) d1[i] = orient3d(t2[0], t2[1], t2[2], t1[i]);
    auto all_one_side = [&](const double* d) {
        return (d[0] > eps && d[1] > eps && d[2] > eps) ||
               (d[0] < -eps && d[1] < -eps && d[2] < -eps);
    };
    if (all_one_side(d2) || all_one_side(d1)) return false;

    const bool coplanar = std::abs(d2[0]) <= eps && std::abs(d2[1]) <= eps &&
                          std::abs(d2[2]) <= eps;
    if (coplanar) {
        // project onto the dominant axis plane and run the 2D test
        const Vec<3> n = cross(t1[1] - t1[0], t1[2] - t1[0]);
        int drop = 0;
        for (int d = 1; d < 3; ++d)
            if (std::abs(n[d]) > std::abs(n[drop])) drop = d;
        auto proj = [&](const Vec<3>& p) {
            return Vec<2>{p[(drop + 1) % 3], p[(drop + 2) % 3]};
        };
        Vec<2> a[3], b[3];
        for (int i = 0; i < 3; ++i) {
            a[i] = proj(t1[i]);
            b[i] = proj(t2[i]);
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (segments_cross(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3]))
                    return true;
        auto inside = [](const Vec<2>* tri, const Vec<2>& p) {
            const double s0 = orient2d(tri[0], tri[1], p);
            const double s1 = orient2d(tri[1], tri[2], p);
            const double s2 = orient2d(tri[2], tri[0], p);
            return (s0 > 0 && s1 > 0 && s2 > 0) || (s0 < 0 && s1 < 0 && s2 < 0);
        };
        return inside(b, a[0]) || inside(a, b[0]);
    }

    // intersection segment of each triangle with the other's plane, projected
    // onto the line direction; strict interval overlap means intersection
    const Vec<3> n1 = cross(t1[1] - t1[0], t1[2] - t1[0]);
    const Vec<3> n2 = cross(t2[1] - t2[0], t2[2] - t2[0]);
    const Vec<3> dir = cross(n1, n2);
    auto interval = [&](const Vec<3>* tri, const double* d, double& lo, double& hi) {
        // edges crossing the plane contribute parametric points
        lo = std::numeric_limits<double>::infinity();
        hi = -lo;
        for (int i = 0; i < 3; ++i) {
            for (int j = i + 1; j < 3; ++j) {
                const double di = d[i], dj = d[j];
                if ((di > eps && dj > eps) || (di < -eps && dj < -eps)) continue;
                if (std::abs(di - dj) <= eps) {
                    if (std::abs(di) <= eps) {  // edge in the plane
                        lo = std::min({lo, dot(dir, tri[i]), dot(dir, tri[j])});
                        hi = std::max({hi, dot(dir, tri[i]), dot(dir, tri[j])});
                    }
                    continue;
                }
                const double t = di / (di - dj);
                if (t < -1e-9 || t > 1.0 + 1e-9) continue;
                const Vec<3> p = tri[i] + t * (tri[j] - tri[i]);
                const double proj = dot(dir, p);
                lo = std::min(lo, proj);
                hi = std::max(hi, proj);
            }
        }
    };
    double lo1, hi1, lo2, hi2;
    interval(t1, d1, lo1, hi1);
    interval(t2, d2, lo2, hi2);
    if (lo1 > hi1 || lo2 > hi2) return false;
    const double overlap = std::min(hi1, hi2) - std::max(lo1, lo2);
    return overlap > eps * std::max(1.0, std::sqrt(norm2(dir)));
}

}  // namespace detail

struct MeshQuality {
    double ar_mean = 0.0;
    double si_ratio = 0.0;
    double nme_ratio = 0.0;
    double nmv_ratio = 0.0;
};

// AR: circumradius / (2 inradius), mean over triangles (0 in 2D).
// SI: fraction of faces properly intersecting a face they share no vertex
// with. NME: edges with more than two incident faces (2D: vertices with more
// than two incident segments). NMV: vertices whose incident face fan is
// disconnected (3D only).
template <int D>
inline MeshQuality mesh_quality(const Mesh<D>& mesh) {
    MeshQuality q;
    const std::size_t nf = mesh.faces.size();
    if (nf == 0) return q;

    if constexpr (D == 3) {
        double acc = 0.0;
        for (const auto& f : mesh.faces)
            acc += aspect_ratio(mesh.vertices[f[0]], mesh.vertices[f[1]],
                                mesh.vertices[f[2]]);
        q.ar_mean = acc / static_cast<double>(nf);
    }

    // self-intersections with a uniform grid over face bounding boxes
    std::vector<char> intersecting(nf, 0);
    {
        Vec<D> lo = mesh.vertices.empty() ? Vec<D>{} : mesh.vertices[0], hi = lo;
        double mean_diam = 0.0;
        std::vector<std::pair<Vec<D>, Vec<D>>> boxes(nf);
        for (std::size_t f = 0; f < nf; ++f) {
            Vec<D> blo = mesh.vertices[mesh.faces[f][0]], bhi = blo;
            for (int v = 1; v < D; ++v)
                for (int d = 0; d < D; ++d) {
                    blo[d] = std::min(blo[d], mesh.vertices[mesh.faces[f][v]][d]);
                    bhi[d] = std::max(bhi[d], mesh.vertices[mesh.faces[f][v]][d]);
                }
            boxes[f] = {blo, bhi};
            mean_diam += dist(blo, bhi);
            for (int d = 0; d < D; ++d) {
                lo[d] = std::min(lo[d], blo[d]);
                hi[d] = std::max(hi[d], bhi[d]);
            }
        }
        mean_diam /= static_cast<double>(nf);
        const double cell = std::max(mean_diam, 1e-12);
        std::unordered_map<std::uint64_t, std::vector<std::int32_t>> grid;
        auto for_cells = [&](std::size_t f, auto&& fn) {
            std::int64_t c0[3] = {0, 0, 0}, c1[3] = {0, 0, 0};
            for (int d = 0; d < D; ++d) {
                c0[d] = static_cast<std::int64_t>(
                    std::floor((boxes[f].first[d] - lo[d]) / cell));
                c1[d] = static_cast<std::int64_t>(
                    std::floor((boxes[f].second[d] - lo[d]) / cell));
            }
            for (std::int64_t x = c0[0]; x <= c1[0]; ++x)
                for (std::int64_t y = c0[1]; y <= c1[1]; ++y) {
                    if constexpr (D == 2) {
                        std::uint64_t key = 0xcbf29ce484222325ULL;
                        key = (key ^ static_cast<std::uint64_t>(x + 7)) * 0x100000001b3ULL;
                        key = (key ^ static_cast<std::uint64_t>(y + 7)) * 0x100000001b3ULL;
                        fn(key);
                    } else {
                        for (std::int64_t z = c0[2]; z <= c1[2]; ++z) {
                            std::uint64_t key = 0xcbf29ce484222325ULL;
                            key = (key ^ static_cast<std::uint64_t>(x + 7)) * 0x100000001b3ULL;
                            key = (key ^ static_cast<std::uint64_t>(y + 7)) * 0x100000001b3ULL;
                            key = (key ^ static_cast<std::uint64_t>(z + 7)) * 0x100000001b3ULL;
                            fn(key);
                        }
                    }
                }
        };
        for (std::size_t f = 0; f < nf; ++f)
            for_cells(f, [&](std::uint64_t key) {
                grid[key].push_back(static_cast<std::int32_t>(f));
            });

        auto share_vertex = [&](std::size_t f, std::size_t g) {
            for (int i = 0; i < D; ++i)
                for (int j = 0; j < D; ++j)
                    if (mesh.faces[f][i] == mesh.faces[g][j]) return true;
            return false;
        };
        auto boxes_overlap = [&](std::size_t f, std::size_t g) {
            for (int d = 0; d < D; ++d)
                if (boxes[f].second[d] < boxes[g].first[d] ||
                    boxes[g].second[d] < boxes[f].first[d])
                    return false;
            return true;
        };
        std::unordered_set<std::uint64_t> tested;
        for (const auto& [key, members] : grid) {
            for (std::size_t i = 0; i < members.size(); ++i)
                for (std::size_t j = i + 1; j < members.size(); ++j) {
                    const std::size_t f = members[i], g = members[j];
                    const std::uint64_t pair_id =
                        (static_cast<std::uint64_t>(std::min(f, g)) << 32) |
                        std::max(f, g);
                    if (!tested.insert(pair_id).second) continue;
                    if (share_vertex(f, g) || !boxes_overlap(f, g)) continue;
                    bool hit = false;
                    if constexpr (D == 2) {
                        hit = detail::segments_cross(mesh.vertices[mesh.faces[f][0]],
                                                     mesh.vertices[mesh.faces[f][1]],
                                                     mesh.vertices[mesh.faces[g][0]],
                                                     mesh.vertices[mesh.faces[g][1]]);
                    } else {
                        const Vec<3> t1[3] = {mesh.vertices[mesh.faces[f][0]],
                                              mesh.vertices[mesh.faces[f][1]],
                                              mesh.vertices[mesh.faces[f][2]]};
                        const Vec<3> t2[3] = {mesh.vertices[mesh.faces[g][0]],
                                              mesh.vertices[mesh.faces[g][1]],
                                              mesh.vertices[mesh.faces[g][2]]};
                        hit = detail::triangles_intersect(t1, t2);
                    }
                    if (hit) {
                        intersecting[f] = 1;
                        intersecting[g] = 1;
                    }
                }
        }
    }
    std::int64_t n_si = 0;
    for (const char v : intersecting) n_si += v;
    q.si_ratio = static_cast<double>(n_si) / static_cast<double>(nf);

    if constexpr (D == 2) {
        std::vector<int> degree(mesh.vertices.size(), 0);
        for (const auto& f : mesh.faces) {
            degree[f[0]]++;
            degree[f[1]]++;
        }
        std::int64_t nm = 0;
        for (const int d : degree) nm += d > 2;
        q.nme_ratio = mesh.vertices.empty()
                          ? 0.0
                          : static_cast<double>(nm) /
                                static_cast<double>(mesh.vertices.size());
        q.nmv_ratio = 0.0;
    } else {
        std::map<Face<2>, std::vector<std::int32_t>> edge_faces;
        for (std::size_t f = 0; f < nf; ++f) {
            const auto& face = mesh.faces[f];
            for (const auto [a, b] :
                 {std::pair{face[0], face[1]}, {face[1], face[2]}, {face[0], face[2]}})
                edge_faces[Face<2>(a, b)].push_back(static_cast<std::int32_t>(f));
        }
        std::int64_t nme = 0;
        for (const auto& [e, fs] : edge_faces) nme += fs.size() > 2;
        q.nme_ratio = edge_faces.empty()
                          ? 0.0
                          : static_cast<double>(nme) /
                                static_cast<double>(edge_faces.size());

        // vertex fans: faces incident to a vertex, connected via shared edges
        std::vector<std::vector<std::int32_t>> incident(mesh.vertices.size());
        for (std::size_t f = 0; f < nf; ++f)
            for (int v = 0; v < 3; ++v)
                incident[mesh.faces[f][v]].push_back(static_cast<std::int32_t>(f));
        std::int64_t nmv = 0;
        for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
            const auto& fan = incident[v];
            if (fan.size() <= 1) continue;
            std::vector<int> comp(fan.size());
            for (std::size_t i = 0; i < fan.size(); ++i) comp[i] = static_cast<int>(i);
            std::function<int(int)> find = [&](int x) {
                while (comp[x] != x) x = comp[x] = comp[comp[x]];
                return x;
            };
            for (std::size_t i = 0; i < fan.size(); ++i)
                for (std::size_t j = i + 1; j < fan.size(); ++j) {
                    // connected if the two faces share an edge through v
                    int shared = 0;
                    for (int a = 0; a < 3; ++a)
                        for (int b = 0; b < 3; ++b)
                            shared += mesh.faces[fan[i]][a] == mesh.faces[fan[j]][b];
                    if (shared >= 2) comp[find(static_cast<int>(i))] =
                        find(static_cast<int>(j));
                }
            int roots = 0;
            for (std::size_t i = 0; i < fan.size(); ++i)
                roots += find(static_cast<int>(i)) == static_cast<int>(i);
            nmv += roots > 1;
        }
        q.nmv_ratio = mesh.vertices.empty()
                          ? 0.0
                          : static_cast<double>(nmv) /
                                static_cast<double>(mesh.vertices.size());
    }
    return q;
}

// Full report over a predicted / ground-truth mesh pair.
template <int D>
inline MetricsReport evaluate(const Mesh<D>& pred, const Mesh<D>& gt,
                              int n_samples = kMetricSamples, double tau = kMetricTau,
                              std::uint64_t seed = 0) {
    const auto t0 = std::chrono::steady_clock::now();
    MetricsReport r;
    const auto [cd, f1] = chamfer_f1(pred, gt, n_samples, tau, seed);
    r.cd = cd;
    r.f1 = f1;
    r.nc = normal_consistency(pred, gt, n_samples, seed);
    const auto [ecd, ef1] = edge_metrics(pred, gt, 30.0, tau, n_samples, seed);
    r.ecd = ecd;
    r.ef1 = ef1;
    const auto q = mesh_quality(pred);
    r.ar_mean = q.ar_mean;
    r.si_ratio = q.si_ratio;
    r.nme_ratio = q.nme_ratio;
    r.nmv_ratio = q.nmv_ratio;
    r.n_verts = static_cast<std::int64_t>(pred.vertices.size());
    r.n_faces = static_cast<std::int64_t>(pred.faces.size());
    r.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

}  // namespace minball
