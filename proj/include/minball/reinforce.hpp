#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "minball/adam.hpp"
#include "minball/losses.hpp"
#include "minball/rng.hpp"
#include "minball/tessellation.hpp"

namespace minball {

// Per-point existence probabilities, kept inside [1e-4, 1 - 1e-4] so the
// log-derivative stays finite.
struct ExistenceProbs {
    std::vector<double> phi;

    static constexpr double kFloor = 1e-4;

    explicit ExistenceProbs(std::size_t n, double init = 0.99) : phi(n, init) {}

    void clamp() {
        for (double& p : phi) p = std::clamp(p, kFloor, 1.0 - kFloor);
    }
};

struct SampleBatch {
    std::int64_t n_points = 0;
    int batch_size = 0;
    std::vector<char> masks;      // batch_size x n_points
    std::vector<double> losses;   // per batch
    std::vector<double> log_prob; // log P(P^i | Phi), Bernoulli product

    const char* mask(int b) const { return masks.data() + static_cast<std::int64_t>(b) * n_points; }
    char* mask(int b) { return masks.data() + static_cast<std::int64_t>(b) * n_points; }
};

// Independent Bernoulli draws per point per batch. Each batch row uses its
// own counter-based stream, so parallel evaluation cannot perturb the draw.
inline SampleBatch sample_batches(const ExistenceProbs& probs, int batch_size,
                                  std::uint64_t seed) {
    if (batch_size < 1) throw std::invalid_argument("sample_batches: B must be >= 1");
    SampleBatch batch;
    batch.n_points = static_cast<std::int64_t>(probs.phi.size());
    batch.batch_size = batch_size;
    batch.masks.assign(static_cast<std::int64_t>(batch_size) * batch.n_points, 0);
    batch.losses.assign(batch_size, 0.0);
    batch.log_prob.assign(batch_size, 0.0);
    parallel_for(batch_size, [&](std::int64_t b) {
        Rng rng(seed, static_cast<std::uint64_t>(b));
        char* m = batch.mask(static_cast<int>(b));
        double lp = 0.0;
        for (std::int64_t j = 0; j < batch.n_points; ++j) {
            const bool in = rng.next_double() < probs.phi[j];
            m[j] = in;
            lp += std::log(in ? probs.phi[j] : 1.0 - probs.phi[j]);
        }
        batch.log_prob[b] = lp;
    }, 8);
    return batch;
}

// Points strictly inside each face's minimum ball; candidates for blocking
// the face when sampled. Precomputed once per epoch (positions are frozen).
template <int D>
inline std::vector<std::vector<std::int32_t>> precompute_inside_points(
    const PointSet<D>& points, const std::vector<Face<D>>& faces,
    const std::vector<MinBall<D>>& balls) {
    const KdTree<D> index(points.positions);
    std::vector<std::vector<std::int32_t>> inside(faces.size());
    parallel_for(static_cast<std::int64_t>(faces.size()), [&](std::int64_t f) {
        if (balls[f].degenerate) return;
        for (const std::int32_t q : index.within_radius(balls[f].center, balls[f].radius))
            if (!faces[f].contains(q)) inside[f].push_back(q);
    });
    return inside;
}

// A face exists for a mask iff all its vertices are sampled and no sampled
// point lies strictly inside its ball (hard Def. 1 against the subset).
template <int D>
inline std::vector<Face<D>> batch_faces(const char* mask,
                                        const std::vector<Face<D>>& query_faces,
                                        const std::vector<MinBall<D>>& balls,
                                        const std::vector<std::vector<std::int32_t>>& inside) {
    std::vector<Face<D>> out;
    for (std::size_t f = 0; f < query_faces.size(); ++f) {
        if (balls[f].degenerate) continue;
        bool exists = true;
        for (int v = 0; v < D && exists; ++v) exists = mask[query_faces[f][v]];
        for (std::size_t q = 0; q < inside[f].size() && exists; ++q)
            exists = !mask[inside[f][q]];
        if (exists) out.push_back(query_faces[f]);
    }
    return out;
}

template <int D>
inline std::vector<Face<D>> batch_faces(const char* mask,
                                        const std::vector<Face<D>>& query_faces,
                                        const std::vector<MinBall<D>>& balls,
                                        const PointSet<D>& points) {
    return batch_faces(mask, query_faces, balls,
                       precompute_inside_points(points, query_faces, balls));
}

// ---------------------------------------------------------------------------
// Batch loss
// ---------------------------------------------------------------------------

inline constexpr double kEmptyMaskLossCap = 1.0;

namespace detail {

// Length/area-proportional stratified samples, so that splitting a face into
// collinear/coplanar pieces leaves the sample density unchanged.
template <int D>
inline void stratified_samples(const PointSet<D>& points, const Face<D>& face,
                               double spacing, std::vector<Vec<D>>& out_pos) {
    if constexpr (D == 2) {
        const Vec<2>& a = points.positions[face[0]];
        const Vec<2>& b = points.positions[face[1]];
        const int n = std::max(1, static_cast<int>(std::ceil(dist(a, b) / spacing)));
        for (int i = 0; i < n; ++i) {
            const double t = (i + 0.5) / n;
            out_pos.push_back((1.0 - t) * a + t * b);
        }
    } else {
        const Vec<3>& a = points.positions[face[0]];
        const Vec<3>& b = points.positions[face[1]];
        const Vec<3>& c = points.positions[face[2]];
        const double area = 0.5 * norm(cross(b - a, c - a));
        const int n = std::max(
            1, static_cast<int>(std::ceil(area / (spacing * spacing))));
        for (const auto& bc : sample_pattern<3>(n)) {
            out_pos.push_back(bc[0] * a + bc[1] * b + bc[2] * c);
        }
    }
}

}  // namespace detail

// Per-epoch evaluation context for the Reinforce-Ball objective: balls,
// blocker lists, samples, and Chamfer neighbor structures over the frozen
// positions. eval() is the batch loss for one mask.
template <int D>
class ReinforceContext {
  public:
    ReinforceContext(const PointSet<D>& points, const std::vector<Vec<D>>& target,
                     int knn_k, double spacing)
        : points_(points), targets_(target) {
        if (target.empty()) throw std::invalid_argument("reinforce: empty target");
        faces_ = generate_query_faces(points, knn_k);
        balls_ = min_balls(points, faces_);
        inside_ = precompute_inside_points(points, faces_, balls_);

        face_sample_begin_.assign(faces_.size() + 1, 0);
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            detail::stratified_samples(points, faces_[f], spacing, sample_pos_);
            face_sample_begin_[f + 1] = static_cast<std::int32_t>(sample_pos_.size());
        }

        const KdTree<D> target_tree(target);
        rho_.resize(sample_pos_.size());
        parallel_for(static_cast<std::int64_t>(sample_pos_.size()), [&](std::int64_t i) {
            rho_[i] = target_tree.knn(sample_pos_[i], 1)[0].distance;
        });

        // per target: samples ordered by distance; the forward term for a
        // mask is the first existing entry. The list is capped for large
        // clouds; a target that exhausts it falls back to the loss cap,
        // which only happens under near-empty masks.
        const KdTree<D> sample_tree(sample_pos_);
        const int k = static_cast<int>(
            std::min<std::size_t>(sample_pos_.size(), 256));
        cand_ids_.resize(target.size() * k);
        cand_dist_.resize(target.size() * k);
        stride_ = k;
        parallel_for(static_cast<std::int64_t>(target.size()), [&](std::int64_t t) {
            const auto nb = sample_tree.knn(target[t], k);
            for (int i = 0; i < k; ++i) {
                cand_ids_[t * k + i] = nb[i].index;
                cand_dist_[t * k + i] = nb[i].distance;
            }
        });
        n_targets_ = static_cast<std::int64_t>(target.size());
    }

    const std::vector<Face<D>>& faces() const { return faces_; }
    const std::vector<MinBall<D>>& balls() const { return balls_; }
    const std::vector<std::vector<std::int32_t>>& inside() const { return inside_; }

    // L_rl = L_recon(existing faces, unit weights) + eps_card * |sampled|
    double eval(const char* mask, double eps_card) const {
        std::int64_t n_sampled = 0;
        for (std::int64_t j = 0; j < points_.size(); ++j) n_sampled += mask[j] != 0;

        std::vector<char> sample_alive(sample_pos_.size(), 0);
        bool any = false;
        for (std::size_t f = 0; f < faces_.size(); ++f) {
            if (balls_[f].degenerate) continue;
            bool exists = true;
            for (int v = 0; v < D && exists; ++v) exists = mask[faces_[f][v]];
            for (std::size_t q = 0; q < inside_[f].size() && exists; ++q)
                exists = !mask[inside_[f][q]];
            if (!exists) continue;
            any = true;
            for (std::int32_t i = face_sample_begin_[f]; i < face_sample_begin_[f + 1]; ++i)
                sample_alive[i] = 1;
        }
        if (!any) return kEmptyMaskLossCap + eps_card * static_cast<double>(n_sampled);

        double fwd = 0.0;
        for (std::int64_t t = 0; t < n_targets_; ++t) {
            const std::int32_t* ids = cand_ids_.data() + t * stride_;
            const double* ds = cand_dist_.data() + t * stride_;
            double found = -1.0;
            for (int i = 0; i < stride_; ++i) {
                if (sample_alive[ids[i]]) {
                    found = ds[i];
                    break;
                }
            }
            if (found < 0.0) {
                // candidate list exhausted (heavy drop): exact linear scan
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < sample_pos_.size(); ++i)
                    if (sample_alive[i])
                        best = std::min(best, dist2(targets_[t], sample_pos_[i]));
                found = std::sqrt(best);
            }
            fwd += found;
        }
        fwd /= static_cast<double>(n_targets_);

        double rev = 0.0;
        std::int64_t n_alive = 0;
        for (std::size_t i = 0; i < sample_pos_.size(); ++i) {
            if (!sample_alive[i]) continue;
            rev += rho_[i];
            ++n_alive;
        }
        rev /= static_cast<double>(n_alive);
        return fwd + rev + eps_card * static_cast<double>(n_sampled);
    }

  private:
    const PointSet<D>& points_;
    std::vector<Vec<D>> targets_;
    std::vector<Face<D>> faces_;
    std::vector<MinBall<D>> balls_;
    std::vector<std::vector<std::int32_t>> inside_;
    std::vector<Vec<D>> sample_pos_;
    std::vector<std::int32_t> face_sample_begin_;
    std::vector<double> rho_;
    std::vector<std::int32_t> cand_ids_;
    std::vector<double> cand_dist_;
    int stride_ = 0;
    std::int64_t n_targets_ = 0;
};

// Standalone batch loss matching ReinforceContext::eval.
template <int D>
inline double batch_loss(const PointSet<D>& points, const char* mask,
                         const std::vector<Vec<D>>& target, double eps_card,
                         double spacing, int knn_k = 10) {
    const ReinforceContext<D> ctx(points, target, knn_k, spacing);
    return ctx.eval(mask, eps_card);
}

// ---------------------------------------------------------------------------
// Score-function gradient
// ---------------------------------------------------------------------------

// (1/B) sum_i grad_phi log P(P^i | Phi) * L^i, with the losses standardized
// across the batch (subtract mean, divide by std) as variance reduction.
// `standardize = false` gives the raw estimator whose expectation is the
// exact gradient of E[L].
inline std::vector<double> estimate_gradient(const ExistenceProbs& probs,
                                             const SampleBatch& batch,
                                             bool standardize = true) {
    const int B = batch.batch_size;
    if (standardize && B < 2)
        throw std::invalid_argument("estimate_gradient: standardization needs B >= 2");
    std::vector<double> scaled(batch.losses);
    if (standardize) {
        const auto [lo, hi] = std::minmax_element(scaled.begin(), scaled.end());
        if (*lo == *hi) return std::vector<double>(batch.n_points, 0.0);
        double mean = 0.0;
        for (const double l : scaled) mean += l;
        mean /= B;
        double var = 0.0;
        for (const double l : scaled) var += (l - mean) * (l - mean);
        const double stddev = std::max(std::sqrt(var / B), 1e-8);
        for (double& l : scaled) l = (l - mean) / stddev;
    }
    const auto n = batch.n_points;
    std::vector<double> grad(n, 0.0);
    for (int b = 0; b < B; ++b) {
        const char* m = batch.mask(b);
        const double l = scaled[b];
        if (l == 0.0) continue;
        for (std::int64_t j = 0; j < n; ++j) {
            const double p = probs.phi[j];
            grad[j] += l * (m[j] ? 1.0 / p : -1.0 / (1.0 - p));
        }
    }
    for (double& g : grad) g /= B;
    return grad;
}

// ---------------------------------------------------------------------------
// Optimization driver
// ---------------------------------------------------------------------------

struct ReinforceConfig {
    int epochs = 10;         // n0
    int steps = 2000;        // n1
    int batch_size = 1024;   // B
    double eps_card = 0.0;
    double lr_phi = 0.01;    // no value stated upstream; required knob
    double spacing = 0.0;    // sample spacing; 0: estimated from the target
    int knn_k = 10;
    double prune_threshold = 0.5;
    std::uint64_t seed = 0;
};

template <int D>
struct ReinforceResult {
    PointSet<D> points;                 // surviving points, psi unchanged
    std::vector<std::int32_t> kept;     // indices into the input set
    std::vector<std::int64_t> count_per_epoch;
    double initial_loss = 0.0;          // full-mask loss before optimization
    double final_loss = 0.0;            // full-mask loss of the survivors
};

// Per epoch: refresh query faces and balls, run n1 score-function steps on
// the per-point probabilities, then drop points below the threshold.
template <int D>
inline ReinforceResult<D> reinforce_optimize(const PointSet<D>& input,
                                             const std::vector<Vec<D>>& target,
                                             const ReinforceConfig& cfg) {
    ReinforceResult<D> result;
    result.points = input;
    result.kept.resize(input.size());
    for (std::int32_t i = 0; i < input.size(); ++i) result.kept[i] = i;

    const double spacing =
        cfg.spacing > 0.0 ? cfg.spacing : estimate_density(target);
    ExistenceProbs probs(result.points.positions.size());
    probs.clamp();

    {
        const ReinforceContext<D> ctx(result.points, target, cfg.knn_k, spacing);
        const std::vector<char> full(result.points.size(), 1);
        result.initial_loss = ctx.eval(full.data(), 0.0);
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const ReinforceContext<D> ctx(result.points, target, cfg.knn_k, spacing);
        Adam adam(probs.phi.size(), cfg.lr_phi);
        for (int it = 0; it < cfg.steps; ++it) {
            auto batch = sample_batches(
                probs, cfg.batch_size,
                Rng::mix(cfg.seed ^ (static_cast<std::uint64_t>(epoch) << 32 | it)));
            parallel_for(cfg.batch_size, [&](std::int64_t b) {
                batch.losses[b] = ctx.eval(batch.mask(static_cast<int>(b)), cfg.eps_card);
            }, 8);
            const auto grad = estimate_gradient(probs, batch, true);
            adam.step(probs.phi.data(), grad.data(), grad.size());
            probs.clamp();
        }

        // prune and remap
        std::vector<std::int32_t> survivors;
        for (std::int32_t i = 0; i < result.points.size(); ++i)
            if (probs.phi[i] >= cfg.prune_threshold) survivors.push_back(i);
        if (survivors.empty())
            throw std::runtime_error("reinforce_optimize: all points pruned");
        if (static_cast<std::int64_t>(survivors.size()) < result.points.size()) {
            PointSet<D> next;
            ExistenceProbs next_probs(survivors.size());
            std::vector<std::int32_t> next_kept(survivors.size());
            for (std::size_t i = 0; i < survivors.size(); ++i) {
                next.positions.push_back(result.points.positions[survivors[i]]);
                next.psi.push_back(result.points.psi[survivors[i]]);
                next_probs.phi[i] = probs.phi[survivors[i]];
                next_kept[i] = result.kept[survivors[i]];
            }
            result.points = std::move(next);
            probs = std::move(next_probs);
            result.kept = std::move(next_kept);
        }
        result.count_per_epoch.push_back(result.points.size());
    }

    const ReinforceContext<D> ctx(result.points, target, cfg.knn_k, spacing);
    const std::vector<char> full(result.points.size(), 1);
    result.final_loss = ctx.eval(full.data(), 0.0);
    return result;
}

}  // namespace minball
