#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "minball/geometry.hpp"
#include "minball/kdtree.hpp"
#include "minball/parallel.hpp"
#include "minball/tessellation.hpp"
#include "minball/types.hpp"

namespace minball {

struct LossWeights {
    double lambda_qual = 0.0;
    double lambda_real = 0.0;
    double eps_card = 0.0;  // cardinality weight, used by Reinforce-Ball
};

// ---------------------------------------------------------------------------
// Face sampling
// ---------------------------------------------------------------------------

template <int D>
struct WeightedSampleCloud {
    std::vector<Vec<D>> positions;
    std::vector<double> weights;             // existence probability of source face
    std::vector<std::int32_t> source_face;   // ordinal into the face list
    std::vector<std::array<double, D>> bary; // sample = sum bary[i] * vertex[i]
};

namespace detail {

// Deterministic stratified barycentric patterns. Segments: midpoints of n
// equal pieces. Triangles: centroid for 1, centroid + edge midpoints for 4,
// otherwise centroids of a k x k congruent subdivision (count rounded to k^2).
template <int D>
inline std::vector<std::array<double, D>> sample_pattern(int n);

template <>
inline std::vector<std::array<double, 2>> sample_pattern<2>(int n) {
    std::vector<std::array<double, 2>> out(n);
    for (int i = 0; i < n; ++i) {
        const double t = (i + 0.5) / n;
        out[i] = {1.0 - t, t};
    }
    return out;
}

template <>
inline std::vector<std::array<double, 3>> sample_pattern<3>(int n) {
    const double third = 1.0 / 3.0;
    if (n == 1) return {{third, third, third}};
    if (n == 4)
        return {{third, third, third}, {0.5, 0.5, 0.0}, {0.0, 0.5, 0.5}, {0.5, 0.0, 0.5}};
    int k = 1;
    while (k * k < n) ++k;
    std::vector<std::array<double, 3>> out;
    out.reserve(k * k);
    // centroids of the standard k^2 subdivision: k*(k-1)/2 "down" triangles
    // interleaved with upward ones, expressed directly in barycentric space
    for (int row = 0; row < k; ++row) {
        for (int col = 0; col + row < k; ++col) {
            const double b1 = (3.0 * col + 1.0) / (3.0 * k);
            const double b2 = (3.0 * row + 1.0) / (3.0 * k);
            out.push_back({1.0 - b1 - b2, b1, b2});
            if (col + row + 1 < k) {
                const double c1 = (3.0 * col + 2.0) / (3.0 * k);
                const double c2 = (3.0 * row + 2.0) / (3.0 * k);
                out.push_back({1.0 - c1 - c2, c1, c2});
            }
        }
    }
    return out;
}

}  // namespace detail

// Deterministic samples on each face carrying the face's probability as
// weight. No RNG here, so finite-difference checks stay clean.
template <int D>
inline WeightedSampleCloud<D> sample_faces(const PointSet<D>& points,
                                           const std::vector<Face<D>>& faces,
                                           const std::vector<double>& probs,
                                           int samples_per_face) {
    if (samples_per_face < 1)
        throw std::invalid_argument("sample_faces: samples_per_face must be >= 1");
    const auto pattern = detail::sample_pattern<D>(samples_per_face);
    WeightedSampleCloud<D> cloud;
    const std::size_t total = faces.size() * pattern.size();
    cloud.positions.resize(total);
    cloud.weights.resize(total);
    cloud.source_face.resize(total);
    cloud.bary.resize(total);
    parallel_for(static_cast<std::int64_t>(faces.size()), [&](std::int64_t f) {
        for (std::size_t s = 0; s < pattern.size(); ++s) {
            const std::size_t i = f * pattern.size() + s;
            Vec<D> x{};
            for (int v = 0; v < D; ++v)
                x += pattern[s][v] * points.positions[faces[f][v]];
            cloud.positions[i] = x;
            cloud.weights[i] = probs[f];
            cloud.source_face[i] = static_cast<std::int32_t>(f);
            cloud.bary[i] = pattern[s];
        }
    });
    return cloud;
}

// ---------------------------------------------------------------------------
// Expected Chamfer distance
// ---------------------------------------------------------------------------

struct ExpectedChamfer {
    double total = 0.0;
    double forward = 0.0;   // target -> weighted samples expectation
    double reverse = 0.0;   // weighted mean sample -> target distance
    bool weights_all_zero = false;
};

inline constexpr int kDefaultKcd = 8;

// Forward term per target: walk its k_cd nearest samples in ascending order,
// d_(1)..d_(K); the expectation is sum_k d_k w_k prod_{j<k}(1-w_j) with the
// residual mass prod_{j<=K}(1-w_j) assigned to d_K. Exact when weights are
// all 0/1. Reverse term: sum w_i dist(s_i, nn_target) / sum w_i.
template <int D>
inline ExpectedChamfer expected_chamfer(const WeightedSampleCloud<D>& samples,
                                        const std::vector<Vec<D>>& target,
                                        int k_cd = kDefaultKcd) {
    if (target.empty()) throw std::invalid_argument("expected_chamfer: empty target");
    if (samples.positions.empty())
        throw std::invalid_argument("expected_chamfer: no samples");

    const KdTree<D> sample_tree(samples.positions);
    const int k = std::min<int>(k_cd, static_cast<int>(samples.positions.size()));

    std::vector<double> fwd(target.size());
    parallel_for(static_cast<std::int64_t>(target.size()), [&](std::int64_t t) {
        const auto nb = sample_tree.knn(target[t], k);
        double acc = 0.0, carry = 1.0;
        for (int i = 0; i < k; ++i) {
            const double w = samples.weights[nb[i].index];
            acc += nb[i].distance * w * carry;
            carry *= 1.0 - w;
        }
        fwd[t] = acc + nb[k - 1].distance * carry;
    });

    ExpectedChamfer out;
    for (double v : fwd) out.forward += v;
    out.forward /= static_cast<double>(target.size());

    double wsum = 0.0;
    for (double w : samples.weights) wsum += w;
    if (wsum == 0.0) {
        out.weights_all_zero = true;
        out.total = out.forward;
        return out;
    }
    const KdTree<D> target_tree(target);
    std::vector<double> rho(samples.positions.size());
    parallel_for(static_cast<std::int64_t>(samples.positions.size()), [&](std::int64_t i) {
        rho[i] = samples.weights[i] == 0.0
                     ? 0.0
                     : samples.weights[i] *
                           target_tree.knn(samples.positions[i], 1)[0].distance;
    });
    for (double v : rho) out.reverse += v;
    out.reverse /= wsum;
    out.total = out.forward + out.reverse;
    return out;
}

// ---------------------------------------------------------------------------
// Regularizers and the total objective
// ---------------------------------------------------------------------------

// Mean aspect ratio weighted by face probability; zero in 2D (segments have
// no aspect ratio).
template <int D>
inline double quality_loss(const PointSet<D>& points, const std::vector<Face<D>>& faces,
                           const std::vector<double>& probs) {
    if constexpr (D == 2) {
        (void)points;
        (void)faces;
        (void)probs;
        return 0.0;
    } else {
        if (faces.empty()) return 0.0;
        std::vector<double> per(faces.size());
        parallel_for(static_cast<std::int64_t>(faces.size()), [&](std::int64_t f) {
            per[f] = aspect_ratio(points.positions[faces[f][0]],
                                  points.positions[faces[f][1]],
                                  points.positions[faces[f][2]]) *
                     probs[f];
        });
        double acc = 0.0;
        for (double v : per) acc += v;
        return acc / static_cast<double>(faces.size());
    }
}

template <int D>
inline double real_loss(const PointSet<D>& points) {
    double acc = 0.0;
    for (double s : points.psi) acc += s;
    return acc / static_cast<double>(points.size());
}

inline double total_loss(double recon, double qual, double real,
                         const LossWeights& w) {
    return recon + w.lambda_qual * qual + w.lambda_real * real;
}

// ---------------------------------------------------------------------------
// Reconstruction loss engine with reverse-mode gradients
// ---------------------------------------------------------------------------

// Periodically refreshed discrete neighbor structure for the Chamfer terms:
// per-target candidate sample ids and per-sample candidate target ids.
// Distances are recomputed exactly at every step; only the candidate sets
// are stale, mirroring the nearest-neighbor cache used for lambda_min.
struct CdNeighborCache {
    int k_fwd = 0;
    int k_rev = 0;
    std::vector<std::int32_t> fwd;  // n_targets x k_fwd
    std::vector<std::int32_t> rev;  // n_samples x k_rev
};

template <int D>
inline CdNeighborCache build_cd_cache(const std::vector<Vec<D>>& sample_positions,
                                      const KdTree<D>& target_tree, int k_cd,
                                      int pad = 8, int k_rev = 4) {
    CdNeighborCache cache;
    const auto n_samples = static_cast<std::int64_t>(sample_positions.size());
    const KdTree<D> sample_tree(sample_positions);
    cache.k_fwd = std::min<int>(k_cd + pad, static_cast<int>(n_samples));
    cache.k_rev = std::min<int>(k_rev, static_cast<int>(target_tree.size()));
    const auto n_targets = target_tree.size();
    cache.fwd.resize(n_targets * cache.k_fwd);
    cache.rev.resize(n_samples * cache.k_rev);
    parallel_for(n_targets, [&](std::int64_t t) {
        const auto nb = sample_tree.knn(target_tree.points()[t], cache.k_fwd);
        for (int i = 0; i < cache.k_fwd; ++i)
            cache.fwd[t * cache.k_fwd + i] = nb[i].index;
    });
    parallel_for(n_samples, [&](std::int64_t s) {
        const auto nb = target_tree.knn(sample_positions[s], cache.k_rev);
        for (int i = 0; i < cache.k_rev; ++i)
            cache.rev[s * cache.k_rev + i] = nb[i].index;
    });
    return cache;
}

struct LossBreakdown {
    double total = 0.0;
    double recon = 0.0;
    double forward = 0.0;
    double reverse = 0.0;
    double qual = 0.0;
    double real = 0.0;
    bool weights_all_zero = false;
};

inline constexpr int kMaxKcd = 32;

template <int D>
struct LossConfig {
    double alpha = 1.0;
    LossWeights weights;
    int samples_per_face = 1;
    int k_cd = kDefaultKcd;
    // Step 1/3: positions frozen, lambda_min held at these constants.
    // Empty means lambda_min is live (Step 2).
    std::vector<double> frozen_lambda_min;
};

// One forward evaluation with everything the backward pass needs recorded.
// Discrete selections (nearest neighbors, sort orders, argmins) are made
// here and held fixed by the backward passes.
template <int D>
class ReconLoss {
  public:
    // `lookup` resolves the nearest point outside each face: either a fresh
    // KdTree over all points or a NeighborCache built at the last refresh.
    // `cd_cache` (optional) restricts Chamfer neighbor candidates; exact
    // trees are used when it is null.
    template <typename Lookup>
    ReconLoss(const PointSet<D>& points, const std::vector<Face<D>>& faces,
              const std::vector<Vec<D>>& target, const Lookup& lookup,
              const KdTree<D>* target_tree, const LossConfig<D>& cfg,
              const CdNeighborCache* cd_cache = nullptr)
        : points_(points), faces_(faces), target_(target), cfg_(cfg) {
        if (target.empty()) throw std::invalid_argument("loss: empty target");
        if (faces.empty()) throw std::invalid_argument("loss: empty face set");
        if (cfg.k_cd < 1 || cfg.k_cd > kMaxKcd)
            throw std::invalid_argument("loss: k_cd out of range");
        const bool frozen = !cfg.frozen_lambda_min.empty();
        if (frozen && cfg.frozen_lambda_min.size() != faces.size())
            throw std::invalid_argument("loss: frozen lambda_min size mismatch");

        const auto nf = static_cast<std::int64_t>(faces.size());
        balls_.resize(nf);
        lmin_.resize(nf);
        nearest_.assign(nf, -1);
        nearest_dist_.resize(nf);
        parallel_for(nf, [&](std::int64_t f) {
            balls_[f] = min_ball_of_face(points_, faces_[f]);
            if (frozen) {
                lmin_[f] = cfg_.frozen_lambda_min[f];
                return;
            }
            if (balls_[f].degenerate) {
                lmin_[f] = 0.0;
                return;
            }
            Neighbor<D> nb;
            if constexpr (std::is_same_v<Lookup, NeighborCache<D>>)
                nb = cached_nearest_excluding(lookup, f, balls_[f].center, faces_[f],
                                              points_.positions);
            else
                nb = lookup.nearest_excluding(balls_[f].center, faces_[f]);
            nearest_[f] = nb.index;
            nearest_dist_[f] = nb.distance;
            lmin_[f] = sigmoid(cfg_.alpha * (nb.distance - balls_[f].radius));
        });

        lreal_ = lambda_real(points_, faces_, &real_argmin_);
        lambda_.resize(nf);
        for (std::int64_t f = 0; f < nf; ++f) lambda_[f] = lmin_[f] * lreal_[f];

        samples_ = sample_faces(points_, faces_, lambda_, cfg_.samples_per_face);
        const auto ns = static_cast<std::int64_t>(samples_.positions.size());

        // forward Chamfer term: per-target sorted candidate lists
        k_ = std::min<int>(cfg_.k_cd, static_cast<int>(ns));
        const auto nt = static_cast<std::int64_t>(target_.size());
        fwd_ids_.resize(nt * k_);
        fwd_dist_.resize(nt * k_);
        std::vector<double> fwd_term(nt);
        const KdTree<D>* sample_tree = nullptr;
        KdTree<D> local_sample_tree;
        if (!cd_cache) {
            local_sample_tree = KdTree<D>(samples_.positions);
            sample_tree = &local_sample_tree;
        }
        parallel_for(nt, [&](std::int64_t t) {
            std::vector<std::pair<double, std::int32_t>> cand;
            if (cd_cache) {
                cand.reserve(cd_cache->k_fwd);
                for (int i = 0; i < cd_cache->k_fwd; ++i) {
                    const std::int32_t s = cd_cache->fwd[t * cd_cache->k_fwd + i];
                    cand.emplace_back(dist(target_[t], samples_.positions[s]), s);
                }
                std::sort(cand.begin(), cand.end());
                cand.resize(k_);
            } else {
                const auto nb = sample_tree->knn(target_[t], k_);
                for (const auto& e : nb) cand.emplace_back(e.distance, e.index);
            }
            double acc = 0.0, carry = 1.0;
            for (int i = 0; i < k_; ++i) {
                fwd_ids_[t * k_ + i] = cand[i].second;
                fwd_dist_[t * k_ + i] = cand[i].first;
                const double w = samples_.weights[cand[i].second];
                acc += cand[i].first * w * carry;
                carry *= 1.0 - w;
            }
            fwd_term[t] = acc + cand[k_ - 1].first * carry;
        });
        for (double v : fwd_term) breakdown_.forward += v;
        breakdown_.forward /= static_cast<double>(nt);

        // reverse term
        wsum_ = 0.0;
        for (double w : samples_.weights) wsum_ += w;
        rev_ids_.assign(ns, -1);
        rev_dist_.assign(ns, 0.0);
        if (wsum_ > 0.0) {
            parallel_for(ns, [&](std::int64_t s) {
                if (cd_cache) {
                    double best = std::numeric_limits<double>::infinity();
                    std::int32_t best_t = -1;
                    for (int i = 0; i < cd_cache->k_rev; ++i) {
                        const std::int32_t t = cd_cache->rev[s * cd_cache->k_rev + i];
                        const double d2 = dist2(samples_.positions[s], target_[t]);
                        if (d2 < best || (d2 == best && t < best_t)) {
                            best = d2;
                            best_t = t;
                        }
                    }
                    rev_ids_[s] = best_t;
                    rev_dist_[s] = std::sqrt(best);
                } else {
                    const auto nb = target_tree->knn(samples_.positions[s], 1);
                    rev_ids_[s] = nb[0].index;
                    rev_dist_[s] = nb[0].distance;
                }
            });
            double acc = 0.0;
            for (std::int64_t s = 0; s < ns; ++s)
                acc += samples_.weights[s] * rev_dist_[s];
            breakdown_.reverse = acc / wsum_;
        } else {
            breakdown_.weights_all_zero = true;
        }
        breakdown_.recon = breakdown_.forward + breakdown_.reverse;

        // quality term (3D only)
        if (cfg_.weights.lambda_qual != 0.0) {
            if constexpr (D == 3) {
                ar_.resize(nf);
                parallel_for(nf, [&](std::int64_t f) {
                    ar_[f] = aspect_ratio(points_.positions[faces_[f][0]],
                                          points_.positions[faces_[f][1]],
                                          points_.positions[faces_[f][2]]);
                });
                double acc = 0.0;
                for (std::int64_t f = 0; f < nf; ++f) acc += ar_[f] * lambda_[f];
                breakdown_.qual = acc / static_cast<double>(nf);
            }
        }

        breakdown_.real = real_loss(points_);
        breakdown_.total = total_loss(breakdown_.recon, breakdown_.qual,
                                      breakdown_.real, cfg_.weights);
    }

    const LossBreakdown& value() const { return breakdown_; }
    const std::vector<double>& face_lambda() const { return lambda_; }
    const std::vector<double>& face_lambda_min() const { return lmin_; }

    // Hash of every discrete selection the backward pass holds fixed.
    // Coordinates whose perturbation flips this are tie-adjacent.
    std::uint64_t discrete_signature() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](std::uint64_t v) {
            h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        };
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            mix(static_cast<std::uint64_t>(nearest_[f] + 1));
            mix(static_cast<std::uint64_t>(real_argmin_[f]));
            mix(balls_[f].degenerate ? 2u : 3u);
            if (!ar_.empty()) mix(ar_[f] >= kAspectRatioCap ? 5u : 7u);
        }
        for (const auto id : fwd_ids_) mix(static_cast<std::uint64_t>(id));
        for (const auto id : rev_ids_) mix(static_cast<std::uint64_t>(id + 1));
        return h;
    }

    // dL/d(positions), discrete selections held at forward values.
    std::vector<Vec<D>> grad_positions() const {
        const auto nf = static_cast<std::int64_t>(faces_.size());
        const auto ns = static_cast<std::int64_t>(samples_.positions.size());
        const auto nt = static_cast<std::int64_t>(target_.size());

        std::vector<double> wbar(nf, 0.0);      // dL / d lambda(face)
        std::vector<Vec<D>> xbar(ns, Vec<D>{}); // dL / d sample position
        accumulate_chamfer_bars(wbar, xbar);

        if (cfg_.weights.lambda_qual != 0.0 && !ar_.empty()) {
            for (std::int64_t f = 0; f < nf; ++f)
                wbar[f] += cfg_.weights.lambda_qual * ar_[f] / static_cast<double>(nf);
        }

        // per-face vertex gradients, then one sequential scatter
        std::vector<std::array<Vec<D>, D>> face_grad(nf);
        std::vector<Vec<D>> nearest_grad(nf, Vec<D>{});
        const bool live = cfg_.frozen_lambda_min.empty();
        const int spf = static_cast<int>(samples_.positions.size() / faces_.size());
        parallel_for(nf, [&](std::int64_t f) {
            auto& fg = face_grad[f];
            for (int v = 0; v < D; ++v) fg[v] = Vec<D>{};
            // sample positions -> vertices
            for (int s = 0; s < spf; ++s) {
                const std::int64_t i = f * spf + s;
                for (int v = 0; v < D; ++v) fg[v] += samples_.bary[i][v] * xbar[i];
            }
            // lambda_min path (live only): sigmoid -> signed distance ->
            // ball center/radius and the selected nearest point
            if (live && !balls_[f].degenerate && nearest_[f] >= 0 && wbar[f] != 0.0) {
                const double lm = lmin_[f];
                const double sbar =
                    wbar[f] * lreal_[f] * cfg_.alpha * lm * (1.0 - lm);
                if (sbar != 0.0 && nearest_dist_[f] > 0.0) {
                    const Vec<D> pj = points_.positions[nearest_[f]];
                    const Vec<D> u = (pj - balls_[f].center) / nearest_dist_[f];
                    nearest_grad[f] = sbar * u;
                    const Vec<D> cbar = -sbar * u;
                    const double rbar = -sbar;
                    if constexpr (D == 2)
                        min_ball_backward(points_.positions[faces_[f][0]],
                                          points_.positions[faces_[f][1]], balls_[f],
                                          cbar, rbar, fg[0], fg[1]);
                    else
                        min_ball_backward(points_.positions[faces_[f][0]],
                                          points_.positions[faces_[f][1]],
                                          points_.positions[faces_[f][2]], balls_[f],
                                          cbar, rbar, fg[0], fg[1], fg[2]);
                }
            }
            // quality: AR depends on vertex positions
            if constexpr (D == 3) {
                if (cfg_.weights.lambda_qual != 0.0 && !ar_.empty()) {
                    const double arbar = cfg_.weights.lambda_qual * lambda_[f] /
                                         static_cast<double>(nf);
                    if (arbar != 0.0)
                        aspect_ratio_backward(points_.positions[faces_[f][0]],
                                              points_.positions[faces_[f][1]],
                                              points_.positions[faces_[f][2]], arbar,
                                              fg[0], fg[1], fg[2]);
                }
            }
        });

        std::vector<Vec<D>> grad(points_.size(), Vec<D>{});
        for (std::int64_t f = 0; f < nf; ++f) {
            for (int v = 0; v < D; ++v) grad[faces_[f][v]] += face_grad[f][v];
            if (nearest_[f] >= 0) grad[nearest_[f]] += nearest_grad[f];
        }
        (void)nt;
        return grad;
    }

    // dL/d(psi): through lambda_real (argmin fixed) plus the real-loss mean.
    std::vector<double> grad_psi() const {
        const auto nf = static_cast<std::int64_t>(faces_.size());
        const auto ns = static_cast<std::int64_t>(samples_.positions.size());
        std::vector<double> wbar(nf, 0.0);
        std::vector<Vec<D>> xbar(ns, Vec<D>{});  // unused by psi
        accumulate_chamfer_bars(wbar, xbar);
        if (cfg_.weights.lambda_qual != 0.0 && !ar_.empty()) {
            for (std::int64_t f = 0; f < nf; ++f)
                wbar[f] += cfg_.weights.lambda_qual * ar_[f] / static_cast<double>(nf);
        }
        std::vector<double> grad(points_.size(),
                                 cfg_.weights.lambda_real /
                                     static_cast<double>(points_.size()));
        for (std::int64_t f = 0; f < nf; ++f)
            grad[real_argmin_[f]] += wbar[f] * lmin_[f];
        return grad;
    }

  private:
    // dL/d(face lambda) and dL/d(sample position) from both Chamfer terms.
    void accumulate_chamfer_bars(std::vector<double>& wbar,
                                 std::vector<Vec<D>>& xbar) const {
        const auto nt = static_cast<std::int64_t>(target_.size());
        const auto ns = static_cast<std::int64_t>(samples_.positions.size());
        const double inv_t = 1.0 / static_cast<double>(nt);

        // forward term: per-target K x K partials, stored per target then
        // scattered sequentially (samples are shared across targets)
        std::vector<double> dw(nt * k_), dd(nt * k_);
        parallel_for(nt, [&](std::int64_t t) {
            const std::int32_t* ids = fwd_ids_.data() + t * k_;
            const double* dist_k = fwd_dist_.data() + t * k_;
            double w[kMaxKcd], prefix[kMaxKcd + 1];
            prefix[0] = 1.0;
            for (int i = 0; i < k_; ++i) {
                w[i] = samples_.weights[ids[i]];
                prefix[i + 1] = prefix[i] * (1.0 - w[i]);
            }
            for (int i = 0; i < k_; ++i) {
                dd[t * k_ + i] = w[i] * prefix[i] + (i == k_ - 1 ? prefix[k_] : 0.0);
                // d(fwd)/d(w_i): own term, minus the tail terms whose carry
                // contains (1 - w_i), products taken with index i skipped
                double g = dist_k[i] * prefix[i];
                double prod = prefix[i];
                for (int m = i + 1; m < k_; ++m) {
                    g -= dist_k[m] * w[m] * prod;
                    prod *= 1.0 - w[m];
                }
                g -= dist_k[k_ - 1] * prod;
                dw[t * k_ + i] = g;
            }
        });
        for (std::int64_t t = 0; t < nt; ++t) {
            for (int i = 0; i < k_; ++i) {
                const std::int32_t s = fwd_ids_[t * k_ + i];
                wbar[samples_.source_face[s]] += inv_t * dw[t * k_ + i];
                const double db = inv_t * dd[t * k_ + i];
                if (db != 0.0 && fwd_dist_[t * k_ + i] > 0.0) {
                    const Vec<D> u = (samples_.positions[s] - target_[t]) /
                                     fwd_dist_[t * k_ + i];
                    xbar[s] += db * u;
                }
            }
        }

        // reverse term: quotient rule over sum(w rho) / sum(w)
        if (wsum_ > 0.0) {
            const double rev = breakdown_.reverse;
            for (std::int64_t s = 0; s < ns; ++s) {
                const double w = samples_.weights[s];
                wbar[samples_.source_face[s]] += (rev_dist_[s] - rev) / wsum_;
                if (w != 0.0 && rev_dist_[s] > 0.0) {
                    const Vec<D> u = (samples_.positions[s] - target_[rev_ids_[s]]) /
                                     rev_dist_[s];
                    xbar[s] += (w / wsum_) * u;
                }
            }
        }
    }

    const PointSet<D>& points_;
    const std::vector<Face<D>>& faces_;
    const std::vector<Vec<D>>& target_;
    LossConfig<D> cfg_;

    std::vector<MinBall<D>> balls_;
    std::vector<double> lmin_, lreal_, lambda_;
    std::vector<std::int32_t> real_argmin_;
    std::vector<std::int32_t> nearest_;
    std::vector<double> nearest_dist_;
    WeightedSampleCloud<D> samples_;
    std::vector<double> ar_;

    int k_ = 0;
    std::vector<std::int32_t> fwd_ids_;
    std::vector<double> fwd_dist_;
    std::vector<std::int32_t> rev_ids_;
    std::vector<double> rev_dist_;
    double wsum_ = 0.0;

    LossBreakdown breakdown_;
};

// ---------------------------------------------------------------------------
// Convenience wrappers matching the optimization steps
// ---------------------------------------------------------------------------

template <int D, typename Lookup>
inline std::vector<Vec<D>> grad_positions(const PointSet<D>& points,
                                          const std::vector<Face<D>>& faces,
                                          const std::vector<Vec<D>>& target,
                                          double alpha, const Lookup& lookup,
                                          const LossWeights& weights,
                                          int samples_per_face = 1,
                                          int k_cd = kDefaultKcd,
                                          LossBreakdown* value = nullptr) {
    LossConfig<D> cfg;
    cfg.alpha = alpha;
    cfg.weights = weights;
    cfg.samples_per_face = samples_per_face;
    cfg.k_cd = k_cd;
    const KdTree<D> target_tree(target);
    const ReconLoss<D> loss(points, faces, target, lookup, &target_tree, cfg);
    if (value) *value = loss.value();
    return loss.grad_positions();
}

template <int D>
inline std::vector<double> grad_psi(const PointSet<D>& points,
                                    const std::vector<Face<D>>& faces,
                                    const std::vector<Vec<D>>& target,
                                    const std::vector<double>& frozen_lambda_min,
                                    const LossWeights& weights,
                                    int samples_per_face = 1, int k_cd = kDefaultKcd,
                                    LossBreakdown* value = nullptr) {
    LossConfig<D> cfg;
    cfg.weights = weights;
    cfg.samples_per_face = samples_per_face;
    cfg.k_cd = k_cd;
    cfg.frozen_lambda_min = frozen_lambda_min;
    const KdTree<D> target_tree(target);
    // lookup is unused when lambda_min is frozen
    const KdTree<D> dummy(points.positions);
    const ReconLoss<D> loss(points, faces, target, dummy, &target_tree, cfg);
    if (value) *value = loss.value();
    return loss.grad_psi();
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checker
// ---------------------------------------------------------------------------

struct FdReport {
    double max_rel_error = 0.0;
    std::int64_t checked = 0;
    std::int64_t excluded = 0;  // tie-adjacent coordinates, skipped
    std::int64_t within_tolerance = 0;
    double tolerance = 0.0;
};

namespace detail {

template <int D>
struct FdEval {
    double loss;
    std::uint64_t signature;
};

template <int D>
inline FdEval<D> fd_eval(const PointSet<D>& points, const std::vector<Face<D>>& faces,
                         const std::vector<Vec<D>>& target, const KdTree<D>& target_tree,
                         const LossConfig<D>& cfg) {
    const KdTree<D> index(points.positions);
    const ReconLoss<D> loss(points, faces, target, index, &target_tree, cfg);
    return {loss.value().total, loss.discrete_signature()};
}

}  // namespace detail

// Central-difference check of dL/d(positions). Coordinates whose +-10h
// perturbation changes any discrete selection are excluded as tie-adjacent.
template <int D>
inline FdReport finite_diff_check_positions(const PointSet<D>& points,
                                            const std::vector<Face<D>>& faces,
                                            const std::vector<Vec<D>>& target,
                                            const LossConfig<D>& cfg, double h,
                                            double tolerance) {
    const KdTree<D> target_tree(target);
    const KdTree<D> index(points.positions);
    const ReconLoss<D> base(points, faces, target, index, &target_tree, cfg);
    const auto analytic = base.grad_positions();
    const std::uint64_t sig0 = base.discrete_signature();

    FdReport report;
    report.tolerance = tolerance;
    PointSet<D> probe = points;
    for (std::int32_t i = 0; i < points.size(); ++i) {
        for (int d = 0; d < D; ++d) {
            const double saved = probe.positions[i][d];
            bool tie = false;
            for (const double delta : {-10.0 * h, 10.0 * h}) {
                probe.positions[i][d] = saved + delta;
                tie = tie || detail::fd_eval(probe, faces, target, target_tree, cfg)
                                     .signature != sig0;
            }
            if (tie) {
                probe.positions[i][d] = saved;
                ++report.excluded;
                continue;
            }
            probe.positions[i][d] = saved + h;
            const double up = detail::fd_eval(probe, faces, target, target_tree, cfg).loss;
            probe.positions[i][d] = saved - h;
            const double dn = detail::fd_eval(probe, faces, target, target_tree, cfg).loss;
            probe.positions[i][d] = saved;
            const double fd = (up - dn) / (2.0 * h);
            const double a = analytic[i][d];
            const double rel =
                std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
            ++report.checked;
            report.max_rel_error = std::max(report.max_rel_error, rel);
            report.within_tolerance += rel < tolerance;
        }
    }
    return report;
}

template <int D>
inline FdReport finite_diff_check_psi(const PointSet<D>& points,
                                      const std::vector<Face<D>>& faces,
                                      const std::vector<Vec<D>>& target,
                                      const LossConfig<D>& cfg, double h,
                                      double tolerance) {
    if (cfg.frozen_lambda_min.empty())
        throw std::invalid_argument("psi check requires frozen lambda_min");
    const KdTree<D> target_tree(target);
    const KdTree<D> index(points.positions);
    const ReconLoss<D> base(points, faces, target, index, &target_tree, cfg);
    const auto analytic = base.grad_psi();
    const std::uint64_t sig0 = base.discrete_signature();

    FdReport report;
    report.tolerance = tolerance;
    PointSet<D> probe = points;
    for (std::int32_t i = 0; i < points.size(); ++i) {
        const double saved = probe.psi[i];
        bool tie = false;
        for (const double delta : {-10.0 * h, 10.0 * h}) {
            probe.psi[i] = saved + delta;
            tie = tie ||
                  detail::fd_eval(probe, faces, target, target_tree, cfg).signature !=
                      sig0;
        }
        if (tie) {
            probe.psi[i] = saved;
            ++report.excluded;
            continue;
        }
        probe.psi[i] = saved + h;
        const double up = detail::fd_eval(probe, faces, target, target_tree, cfg).loss;
        probe.psi[i] = saved - h;
        const double dn = detail::fd_eval(probe, faces, target, target_tree, cfg).loss;
        probe.psi[i] = saved;
        const double fd = (up - dn) / (2.0 * h);
        const double rel = std::abs(analytic[i] - fd) /
                           std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
        ++report.checked;
        report.max_rel_error = std::max(report.max_rel_error, rel);
        report.within_tolerance += rel < tolerance;
    }
    return report;
}

}  // namespace minball
