#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "minball/adam.hpp"
#include "minball/losses.hpp"
#include "minball/tessellation.hpp"

namespace minball {

struct ReconConfig {
    int epochs = 1;
    int steps_real_init = 0;  // Step 1 iterations (grid init mode)
    int steps_position = 0;   // Step 2 iterations (n0)
    int steps_real = 0;       // Step 3 iterations
    int cache_refresh = 50;   // n1
    int cache_K = 10;         // K cached neighbors per query face
    int knn_k = 10;           // neighbors per point for query-face generation
    double lr_position = 1e-3;
    double lr_psi = 0.3;
    double grid_edge = 0.0;  // 0: derive as 3x estimated cloud density
    double lambda_qual = 0.0;
    double lambda_real = 1e-4;
    int samples_per_face = 1;
    int k_cd = kDefaultKcd;
    double extract_threshold = 0.5;
    double snap_threshold = 0.01;  // psi above this snaps to 1 after Steps 1/3
    bool pointcloud_init = false;  // false: regular grid init
    std::uint64_t seed = 0;

    LossWeights loss_weights() const { return {lambda_qual, lambda_real, 0.0}; }
};

template <int D>
struct ReconHooks {
    // stage in {"init", "step1", "step2", "step3", "subdivide", "final"}
    std::function<void(const std::string& stage, const PointSet<D>&, const Mesh<D>*)>
        on_stage;
    std::function<void(const std::string& stage, int step, const LossBreakdown&,
                       std::size_t n_faces)>
        on_progress;
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

template <int D>
struct GridInit {
    PointSet<D> points;
    std::vector<Face<D>> faces;
};

namespace detail {

template <int D>
inline void dedup_faces(std::vector<Face<D>>& faces) {
    std::unordered_set<Face<D>, FaceHash<D>> set(faces.begin(), faces.end());
    faces.assign(set.begin(), set.end());
    std::sort(faces.begin(), faces.end());
}

// Every emitted face must satisfy Def. 1 exactly; the construction guarantees
// it, this guards against a misplaced bound or index.
template <int D>
inline void verify_grid(const GridInit<D>& grid) {
    const KdTree<D> index(grid.points.positions);
    std::vector<char> ok(grid.faces.size(), 0);
    parallel_for(static_cast<std::int64_t>(grid.faces.size()), [&](std::int64_t f) {
        ok[f] = exact_signed_distance(grid.points, grid.faces[f], index) > 0.0;
    });
    for (const char v : ok)
        if (!v) throw std::logic_error("init_grid: face violates the Minimum-Ball condition");
}

}  // namespace detail

// 2D: rows of equilateral triangles (row spacing edge * sqrt(3)/2, odd rows
// shifted by edge/2); faces are the triangle edges. psi starts at 0.5.
inline GridInit<2> init_grid_2d(double edge, Vec<2> lo, Vec<2> hi) {
    if (!(edge > 0.0)) throw std::invalid_argument("init_grid: edge must be > 0");
    if (hi[0] - lo[0] < edge || hi[1] - lo[1] < edge)
        throw std::invalid_argument("init_grid: bounds too small for one cell");
    const double row_h = edge * std::sqrt(3.0) / 2.0;
    const int cols = static_cast<int>(std::ceil((hi[0] - lo[0]) / edge)) + 2;
    const int rows = static_cast<int>(std::ceil((hi[1] - lo[1]) / row_h)) + 2;

    GridInit<2> grid;
    auto id = [&](int i, int j) { return j * cols + i; };
    for (int j = 0; j < rows; ++j) {
        const double off = (j % 2) ? edge / 2.0 : 0.0;
        for (int i = 0; i < cols; ++i)
            grid.points.positions.push_back(
                {lo[0] - edge / 2.0 + i * edge + off, lo[1] - row_h / 2.0 + j * row_h});
    }
    grid.points.psi.assign(grid.points.positions.size(), 0.5);

    std::vector<Face<2>> faces;
    for (int j = 0; j + 1 < rows; ++j) {
        const bool lower_shifted = (j % 2) != 0;
        for (int i = 0; i + 1 < cols; ++i) {
            // two triangles per cell; orientation depends on which row is shifted
            const int a = id(i, j), b = id(i + 1, j);
            const int c = id(i, j + 1), d = id(i + 1, j + 1);
            const auto emit = [&](int u, int v, int w) {
                faces.push_back(Face<2>(u, v));
                faces.push_back(Face<2>(v, w));
                faces.push_back(Face<2>(u, w));
            };
            if (!lower_shifted) {
                emit(a, b, c);
                emit(b, d, c);
            } else {
                emit(a, b, d);
                emit(a, d, c);
            }
        }
    }
    grid.faces = std::move(faces);
    detail::dedup_faces(grid.faces);
    detail::verify_grid(grid);
    return grid;
}

// 3D: body-centered cubic lattice with its standard tetrahedral
// decomposition (each cubic-lattice edge spans four tets with the adjacent
// pairs of cell centers); faces are the tet triangles.
inline GridInit<3> init_grid_3d(double edge, Vec<3> lo, Vec<3> hi) {
    if (!(edge > 0.0)) throw std::invalid_argument("init_grid: edge must be > 0");
    for (int d = 0; d < 3; ++d)
        if (hi[d] - lo[d] < edge)
            throw std::invalid_argument("init_grid: bounds too small for one cell");
    int n[3];
    for (int d = 0; d < 3; ++d)
        n[d] = static_cast<int>(std::ceil((hi[d] - lo[d]) / edge)) + 1;

    GridInit<3> grid;
    const auto corner_id = [&](int i, int j, int k) {
        return (k * (n[1] + 1) + j) * (n[0] + 1) + i;
    };
    const std::int64_t n_corners =
        static_cast<std::int64_t>(n[0] + 1) * (n[1] + 1) * (n[2] + 1);
    const auto center_id = [&](int i, int j, int k) {
        return n_corners + (static_cast<std::int64_t>(k) * n[1] + j) * n[0] + i;
    };
    for (int k = 0; k <= n[2]; ++k)
        for (int j = 0; j <= n[1]; ++j)
            for (int i = 0; i <= n[0]; ++i)
                grid.points.positions.push_back({lo[0] + (i - 0.5) * edge,
                                                 lo[1] + (j - 0.5) * edge,
                                                 lo[2] + (k - 0.5) * edge});
    for (int k = 0; k < n[2]; ++k)
        for (int j = 0; j < n[1]; ++j)
            for (int i = 0; i < n[0]; ++i)
                grid.points.positions.push_back(
                    {lo[0] + i * edge, lo[1] + j * edge, lo[2] + k * edge});
    grid.points.psi.assign(grid.points.positions.size(), 0.5);

    std::vector<Face<3>> faces;
    const auto emit_tet = [&](std::int64_t a, std::int64_t b, std::int64_t c,
                              std::int64_t d) {
        const std::int32_t v[4] = {static_cast<std::int32_t>(a),
                                   static_cast<std::int32_t>(b),
                                   static_cast<std::int32_t>(c),
                                   static_cast<std::int32_t>(d)};
        faces.push_back(Face<3>(v[0], v[1], v[2]));
        faces.push_back(Face<3>(v[0], v[1], v[3]));
        faces.push_back(Face<3>(v[0], v[2], v[3]));
        faces.push_back(Face<3>(v[1], v[2], v[3]));
    };
    // per axis edge: the four surrounding cell centers, ring-adjacent pairs
    for (int axis = 0; axis < 3; ++axis) {
        const int u = (axis + 1) % 3, v = (axis + 2) % 3;
        int lim[3] = {n[0], n[1], n[2]};
        ++lim[u];
        ++lim[v];
        int idx[3];
        for (idx[2] = 0; idx[2] < lim[2]; ++idx[2])
            for (idx[1] = 0; idx[1] < lim[1]; ++idx[1])
                for (idx[0] = 0; idx[0] < lim[0]; ++idx[0]) {
                    int c2[3] = {idx[0], idx[1], idx[2]};
                    ++c2[axis];
                    const auto e1 = corner_id(idx[0], idx[1], idx[2]);
                    const auto e2 = corner_id(c2[0], c2[1], c2[2]);
                    // centers offset by {-1,0} along u and v from the edge cell
                    const int ring[4][2] = {{-1, -1}, {-1, 0}, {0, 0}, {0, -1}};
                    std::int64_t ctr[4];
                    bool valid[4];
                    for (int r = 0; r < 4; ++r) {
                        int cc[3] = {idx[0], idx[1], idx[2]};
                        cc[u] += ring[r][0];
                        cc[v] += ring[r][1];
                        valid[r] = cc[0] >= 0 && cc[0] < n[0] && cc[1] >= 0 &&
                                   cc[1] < n[1] && cc[2] >= 0 && cc[2] < n[2];
                        ctr[r] = valid[r] ? center_id(cc[0], cc[1], cc[2]) : -1;
                    }
                    for (int r = 0; r < 4; ++r) {
                        const int s = (r + 1) % 4;
                        if (valid[r] && valid[s]) emit_tet(e1, e2, ctr[r], ctr[s]);
                    }
                }
    }
    grid.faces = std::move(faces);
    detail::dedup_faces(grid.faces);
    detail::verify_grid(grid);
    return grid;
}

template <int D>
inline GridInit<D> init_grid(double edge, const Vec<D>& lo, const Vec<D>& hi) {
    if constexpr (D == 2)
        return init_grid_2d(edge, lo, hi);
    else
        return init_grid_3d(edge, lo, hi);
}

// Point-cloud initialization: voxel-downsample the cloud at its density
// (kept points get psi = 1), then surround it with a band of imaginary
// psi = 0 support points on a grid with spacing 3x density.
template <int D>
inline PointSet<D> init_from_pointcloud(const std::vector<Vec<D>>& cloud,
                                        double* grid_edge_out = nullptr) {
    if (static_cast<std::int64_t>(cloud.size()) < D + 1)
        throw std::invalid_argument("init_from_pointcloud: cloud too small");
    const double density = estimate_density(cloud);
    if (!(density > 0.0))
        throw std::invalid_argument("init_from_pointcloud: degenerate cloud");

    // one representative per occupied voxel: the member nearest the cell center
    struct CellBest {
        std::int32_t idx;
        double d2;
    };
    std::unordered_map<std::uint64_t, CellBest> cells;
    Vec<D> lo = cloud[0], hi = cloud[0];
    for (const auto& p : cloud)
        for (int d = 0; d < D; ++d) {
            lo[d] = std::min(lo[d], p[d]);
            hi[d] = std::max(hi[d], p[d]);
        }
    const double cell = density;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        std::uint64_t key = 0xcbf29ce484222325ULL;
        Vec<D> center{};
        for (int d = 0; d < D; ++d) {
            const auto c = static_cast<std::int64_t>(
                std::floor((cloud[i][d] - lo[d]) / cell));
            center[d] = lo[d] + (c + 0.5) * cell;
            key = (key ^ static_cast<std::uint64_t>(c + 1)) * 0x100000001b3ULL;
        }
        const double d2 = dist2(cloud[i], center);
        auto [it, inserted] = cells.try_emplace(key, CellBest{static_cast<std::int32_t>(i), d2});
        if (!inserted && (d2 < it->second.d2 ||
                          (d2 == it->second.d2 && static_cast<std::int32_t>(i) < it->second.idx)))
            it->second = {static_cast<std::int32_t>(i), d2};
    }
    std::vector<std::int32_t> kept;
    kept.reserve(cells.size());
    for (const auto& [k, v] : cells) kept.push_back(v.idx);
    std::sort(kept.begin(), kept.end());

    PointSet<D> ps;
    for (const std::int32_t i : kept) ps.positions.push_back(cloud[i]);
    ps.psi.assign(ps.positions.size(), 1.0);

    // imaginary support band: grid spacing 3x density, kept where the
    // distance to the surface is within [0.5, 3] spacings
    const double spacing = 3.0 * density;
    if (grid_edge_out) *grid_edge_out = spacing;
    const double band_lo = 0.5 * spacing, band_hi = 3.0 * spacing;
    const KdTree<D> surface(ps.positions);
    Vec<D> glo = lo, ghi = hi;
    for (int d = 0; d < D; ++d) {
        glo[d] -= band_hi + spacing;
        ghi[d] += band_hi + spacing;
    }
    std::vector<Vec<D>> shell_pts;
    if constexpr (D == 2) {
        const double row_h = spacing * std::sqrt(3.0) / 2.0;
        const int cols = static_cast<int>(std::ceil((ghi[0] - glo[0]) / spacing)) + 1;
        const int rows = static_cast<int>(std::ceil((ghi[1] - glo[1]) / row_h)) + 1;
        for (int j = 0; j < rows; ++j)
            for (int i = 0; i < cols; ++i)
                shell_pts.push_back({glo[0] + i * spacing + (j % 2 ? spacing / 2 : 0.0),
                                     glo[1] + j * row_h});
    } else {
        int n[3];
        for (int d = 0; d < 3; ++d)
            n[d] = static_cast<int>(std::ceil((ghi[d] - glo[d]) / spacing)) + 1;
        for (int k = 0; k < n[2]; ++k)
            for (int j = 0; j < n[1]; ++j)
                for (int i = 0; i < n[0]; ++i) {
                    shell_pts.push_back(
                        {glo[0] + i * spacing, glo[1] + j * spacing, glo[2] + k * spacing});
                    shell_pts.push_back({glo[0] + (i + 0.5) * spacing,
                                         glo[1] + (j + 0.5) * spacing,
                                         glo[2] + (k + 0.5) * spacing});
                }
    }
    std::vector<char> in_band(shell_pts.size(), 0);
    parallel_for(static_cast<std::int64_t>(shell_pts.size()), [&](std::int64_t i) {
        const double d = surface.knn(shell_pts[i], 1)[0].distance;
        in_band[i] = d >= band_lo && d <= band_hi;
    });
    for (std::size_t i = 0; i < shell_pts.size(); ++i) {
        if (!in_band[i]) continue;
        ps.positions.push_back(shell_pts[i]);
        ps.psi.push_back(0.0);
    }
    return ps;
}

// ---------------------------------------------------------------------------
// Optimization steps
// ---------------------------------------------------------------------------

template <int D>
struct OptimState {
    PointSet<D> points;
    SigmoidSchedule schedule;
    std::int64_t step = 0;
};

namespace detail {

template <int D>
inline void snap_psi(PointSet<D>& points, double threshold) {
    for (auto& s : points.psi) s = s > threshold ? 1.0 : 0.0;
}

// Shared inner loop for Steps 1 and 3: positions frozen, lambda_min held
// constant, psi optimized under lambda_qual = 0.
template <int D>
inline void optimize_psi_frozen(OptimState<D>& state, const std::vector<Face<D>>& faces,
                                const std::vector<double>& frozen_lmin,
                                const std::vector<Vec<D>>& target,
                                const ReconConfig& cfg, int steps,
                                const std::string& stage, const ReconHooks<D>& hooks) {
    if (steps <= 0 || faces.empty()) return;
    LossConfig<D> lcfg;
    lcfg.weights = {0.0, cfg.lambda_real, 0.0};
    lcfg.samples_per_face = cfg.samples_per_face;
    lcfg.k_cd = cfg.k_cd;
    lcfg.frozen_lambda_min = frozen_lmin;

    const KdTree<D> target_tree(target);
    const KdTree<D> index(state.points.positions);  // unused under frozen lambda_min
    // positions are frozen, so the Chamfer candidate sets are exact for the
    // whole step and get built once
    const auto probe =
        sample_faces(state.points, faces, std::vector<double>(faces.size(), 1.0),
                     cfg.samples_per_face);
    const auto cd_cache = build_cd_cache<D>(probe.positions, target_tree, cfg.k_cd);

    Adam adam(state.points.psi.size(), cfg.lr_psi);
    for (int it = 0; it < steps; ++it) {
        const ReconLoss<D> loss(state.points, faces, target, index, &target_tree, lcfg,
                                &cd_cache);
        const auto grad = loss.grad_psi();
        adam.step(state.points.psi.data(), grad.data(), grad.size());
        for (auto& s : state.points.psi) s = std::clamp(s, 0.0, 1.0);
        if (hooks.on_progress && (it % 25 == 0 || it + 1 == steps))
            hooks.on_progress(stage, it, loss.value(), faces.size());
    }
}

}  // namespace detail

// Step 1 (grid init mode): treat lambda_min as 1 on the grid faces and
// optimize psi; afterwards snap psi at the 0.01 threshold.
template <int D>
inline void optimize_real_init(OptimState<D>& state, const std::vector<Face<D>>& faces,
                               const std::vector<Vec<D>>& target, const ReconConfig& cfg,
                               const ReconHooks<D>& hooks = {}) {
    const std::vector<double> ones(faces.size(), 1.0);
    detail::optimize_psi_frozen(state, faces, ones, target, cfg, cfg.steps_real_init,
                                "step1", hooks);
    detail::snap_psi(state.points, cfg.snap_threshold);
}

// Step 2: fix psi, optimize positions. Query faces, minimum balls, the
// nearest-neighbor cache and the Chamfer candidate sets refresh every n1
// steps; in between, probabilities use the cache with live distances.
template <int D>
inline void optimize_positions(OptimState<D>& state, const std::vector<Vec<D>>& target,
                               const ReconConfig& cfg, const ReconHooks<D>& hooks = {}) {
    if (cfg.steps_position <= 0) return;
    LossConfig<D> lcfg;
    lcfg.weights = cfg.loss_weights();
    lcfg.samples_per_face = cfg.samples_per_face;
    lcfg.k_cd = cfg.k_cd;
    lcfg.alpha = state.schedule.alpha();

    const KdTree<D> target_tree(target);
    Adam adam(state.points.positions.size() * D, cfg.lr_position);

    std::vector<Face<D>> faces;
    NeighborCache<D> cache;
    CdNeighborCache cd_cache;
    const int refresh = std::max(1, cfg.cache_refresh);
    for (int it = 0; it < cfg.steps_position; ++it, ++state.step) {
        if (it % refresh == 0) {
            faces = generate_query_faces(state.points, cfg.knn_k);
            if (faces.empty())
                throw std::runtime_error("optimize_positions: query face set is empty");
            const KdTree<D> index(state.points.positions);
            const auto balls = min_balls(state.points, faces);
            cache = build_cache(index, faces, balls, cfg.cache_K, state.step);
            const auto probe = sample_faces(state.points, faces,
                                            std::vector<double>(faces.size(), 1.0),
                                            cfg.samples_per_face);
            cd_cache = build_cd_cache<D>(probe.positions, target_tree, cfg.k_cd);
        }
        const ReconLoss<D> loss(state.points, faces, target, cache, &target_tree, lcfg,
                                &cd_cache);
        const auto grad = loss.grad_positions();
        adam.step(reinterpret_cast<double*>(state.points.positions.data()),
                  reinterpret_cast<const double*>(grad.data()), grad.size() * D);
        if (hooks.on_progress && (it % refresh == 0 || it + 1 == cfg.steps_position))
            hooks.on_progress("step2", it, loss.value(), faces.size());
    }
}

// Step 3: fix positions, re-optimize psi over the faces that exactly satisfy
// the Minimum-Ball condition among psi-positive candidates, with lambda_min
// frozen at its exact values.
template <int D>
inline void optimize_real(OptimState<D>& state, const std::vector<Vec<D>>& target,
                          const ReconConfig& cfg, const ReconHooks<D>& hooks = {}) {
    if (cfg.steps_real <= 0) return;
    const KdTree<D> index(state.points.positions);
    const auto candidates = generate_query_faces(state.points, cfg.knn_k, true);
    std::vector<Face<D>> faces;
    std::vector<double> frozen;
    const double alpha = state.schedule.alpha();
    for (const auto& f : candidates) {
        const double s = exact_signed_distance(state.points, f, index);
        if (s >= 0.0) {
            faces.push_back(f);
            frozen.push_back(sigmoid(alpha * s));
        }
    }
    detail::optimize_psi_frozen(state, faces, frozen, target, cfg, cfg.steps_real,
                                "step3", hooks);
    detail::snap_psi(state.points, cfg.snap_threshold);
}

// ---------------------------------------------------------------------------
// Step 4: subdivision
// ---------------------------------------------------------------------------

// Insert psi = 1 points at the midpoints of all edges adjacent to existing
// faces and psi = 0 points at the minimum-ball centers of blocker faces,
// then advance the sigmoid schedule (alpha halves).
template <int D>
inline void subdivide(OptimState<D>& state, const Mesh<D>& extracted,
                      const std::vector<Face<D>>& blockers) {
    std::unordered_set<Face<2>, FaceHash<2>> edges;
    for (const auto& f : extracted.faces) {
        const auto src = [&](int i) { return extracted.source_index[f[i]]; };
        if constexpr (D == 2) {
            edges.insert(Face<2>(src(0), src(1)));
        } else {
            edges.insert(Face<2>(src(0), src(1)));
            edges.insert(Face<2>(src(1), src(2)));
            edges.insert(Face<2>(src(0), src(2)));
        }
    }
    std::vector<Face<2>> sorted_edges(edges.begin(), edges.end());
    std::sort(sorted_edges.begin(), sorted_edges.end());
    for (const auto& e : sorted_edges) {
        state.points.positions.push_back(
            0.5 * (state.points.positions[e[0]] + state.points.positions[e[1]]));
        state.points.psi.push_back(1.0);
    }
    for (const auto& b : blockers) {
        const auto ball = min_ball_of_face(state.points, b);
        if (ball.degenerate) continue;
        state.points.positions.push_back(ball.center);
        state.points.psi.push_back(0.0);
    }
    state.schedule.epoch += 1;
}

// Blockers for point-cloud reconstruction: extracted faces whose removal
// strictly reduces the reconstruction loss, found by masked re-evaluation
// with unit weights.
template <int D>
inline std::vector<Face<D>> detect_blockers(const PointSet<D>& points,
                                            const Mesh<D>& extracted,
                                            const std::vector<Vec<D>>& target,
                                            const ReconConfig& cfg) {
    const std::size_t nf = extracted.faces.size();
    if (nf < 2) return {};
    std::vector<Face<D>> source_faces(nf);
    for (std::size_t f = 0; f < nf; ++f) {
        std::array<std::int32_t, D> src;
        for (int i = 0; i < D; ++i) src[i] = extracted.source_index[extracted.faces[f][i]];
        source_faces[f] = Face<D>(src);
    }
    const auto cloud = sample_faces(points, source_faces,
                                    std::vector<double>(nf, 1.0), cfg.samples_per_face);
    const auto m = static_cast<std::int64_t>(cloud.positions.size());
    const int spf = static_cast<int>(m / nf);

    const KdTree<D> target_tree(target);
    std::vector<double> rho(m);
    parallel_for(m, [&](std::int64_t i) {
        rho[i] = target_tree.knn(cloud.positions[i], 1)[0].distance;
    });
    double rho_sum = 0.0;
    for (double v : rho) rho_sum += v;

    // per target: nearest sample and nearest sample from a different face
    const KdTree<D> sample_tree(cloud.positions);
    const auto nt = static_cast<std::int64_t>(target.size());
    std::vector<std::int32_t> nn_face(nt, -1);
    std::vector<double> nn_dist(nt), alt_dist(nt);
    parallel_for(nt, [&](std::int64_t t) {
        const int k = static_cast<int>(std::min<std::int64_t>(m, 2 * spf + 2));
        const auto nb = sample_tree.knn(target[t], k);
        nn_face[t] = cloud.source_face[nb[0].index];
        nn_dist[t] = nb[0].distance;
        alt_dist[t] = nb.back().distance;  // pessimistic fallback
        for (const auto& e : nb)
            if (cloud.source_face[e.index] != nn_face[t]) {
                alt_dist[t] = e.distance;
                break;
            }
    });

    // forward delta per face: targets whose nearest sample it owns fall back
    // to their nearest other-face sample
    std::vector<double> fwd_delta(nf, 0.0), rho_face(nf, 0.0);
    for (std::int64_t t = 0; t < nt; ++t)
        fwd_delta[nn_face[t]] += (alt_dist[t] - nn_dist[t]) / static_cast<double>(nt);
    for (std::int64_t i = 0; i < m; ++i) rho_face[cloud.source_face[i]] += rho[i];

    std::vector<Face<D>> blockers;
    const double rev = rho_sum / static_cast<double>(m);
    for (std::size_t f = 0; f < nf; ++f) {
        const double rev_without =
            (rho_sum - rho_face[f]) / static_cast<double>(m - spf);
        const double delta = fwd_delta[f] + (rev_without - rev);
        if (delta < 0.0) blockers.push_back(source_faces[f]);
    }
    return blockers;
}

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

template <int D>
struct ReconResult {
    PointSet<D> points;
    Mesh<D> mesh;
    double grid_edge = 0.0;
    SigmoidSchedule schedule;
};

// init -> [Step 2 -> Step 3 -> Step 4] x epochs -> extract.
template <int D>
inline ReconResult<D> reconstruct(const std::vector<Vec<D>>& cloud, ReconConfig cfg,
                                  const ReconHooks<D>& hooks = {}) {
    if (static_cast<std::int64_t>(cloud.size()) < D + 1)
        throw std::invalid_argument("reconstruct: input cloud too small");

    OptimState<D> state;
    std::vector<Face<D>> grid_faces;
    if (cfg.grid_edge <= 0.0) cfg.grid_edge = 3.0 * estimate_density(cloud);
    if (cfg.pointcloud_init) {
        state.points = init_from_pointcloud(cloud);
    } else {
        Vec<D> lo = cloud[0], hi = cloud[0];
        for (const auto& p : cloud)
            for (int d = 0; d < D; ++d) {
                lo[d] = std::min(lo[d], p[d]);
                hi[d] = std::max(hi[d], p[d]);
            }
        auto grid = init_grid<D>(cfg.grid_edge, lo, hi);
        state.points = std::move(grid.points);
        grid_faces = std::move(grid.faces);
    }
    state.schedule = {alpha_min_first_epoch(D, cfg.grid_edge), 1};
    if (hooks.on_stage) hooks.on_stage("init", state.points, nullptr);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (epoch == 1 && !cfg.pointcloud_init && cfg.steps_real_init > 0) {
            optimize_real_init(state, grid_faces, cloud, cfg, hooks);
            if (hooks.on_stage) hooks.on_stage("step1", state.points, nullptr);
        }
        optimize_positions(state, cloud, cfg, hooks);
        if (hooks.on_stage) hooks.on_stage("step2", state.points, nullptr);
        optimize_real(state, cloud, cfg, hooks);
        if (hooks.on_stage) hooks.on_stage("step3", state.points, nullptr);

        if (epoch < cfg.epochs) {
            const KdTree<D> index(state.points.positions);
            const Mesh<D> mesh = extract_mesh(state.points, cfg.extract_threshold, index);
            const auto blockers = detect_blockers(state.points, mesh, cloud, cfg);
            subdivide(state, mesh, blockers);
            if (hooks.on_stage) hooks.on_stage("subdivide", state.points, &mesh);
        }
    }

    ReconResult<D> result;
    const KdTree<D> index(state.points.positions);
    result.mesh = extract_mesh(state.points, cfg.extract_threshold, index);
    result.points = std::move(state.points);
    result.grid_edge = cfg.grid_edge;
    result.schedule = state.schedule;
    if (hooks.on_stage) hooks.on_stage("final", result.points, &result.mesh);
    return result;
}

}  // namespace minball
