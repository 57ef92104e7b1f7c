#pragma once

#include <cmath>
#include <stdexcept>

#include "minball/types.hpp"
#include "minball/vec.hpp"

namespace minball {

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// Minimum bounding balls
// ---------------------------------------------------------------------------

// 2D: the minimum ball of a segment is the ball on its midpoint.
inline MinBall<2> min_ball(const Vec<2>& p1, const Vec<2>& p2) {
    MinBall<2> b;
    b.center = 0.5 * (p1 + p2);
    b.radius = 0.5 * dist(p1, p2);
    b.degenerate = dist(p1, p2) <= 1e-12;
    return b;
}

// 3D: circumcenter of the triangle within its own plane.
// Degeneracy threshold is scale-invariant: |d1 x d2|^2 < 1e-24 * (max edge)^4.
inline MinBall<3> min_ball(const Vec<3>& p1, const Vec<3>& p2, const Vec<3>& p3) {
    MinBall<3> b;
    const Vec<3> d1 = p2 - p1;
    const Vec<3> d2 = p3 - p1;
    const Vec<3> n = cross(d1, d2);
    const double n2 = norm2(n);
    const double max_e2 =
        std::max(norm2(d1), std::max(norm2(d2), dist2(p2, p3)));
    if (n2 < 1e-24 * max_e2 * max_e2) {
        b.degenerate = true;
        return b;
    }
    const Vec<3> num =
        norm2(d2) * cross(cross(d1, d2), d1) + norm2(d1) * cross(cross(d2, d1), d2);
    b.center = p1 + num / (2.0 * n2);
    b.radius = dist(b.center, p1);
    return b;
}

template <int D>
inline MinBall<D> min_ball_of_face(const PointSet<D>& points, const Face<D>& f) {
    if constexpr (D == 2)
        return min_ball(points.positions[f[0]], points.positions[f[1]]);
    else
        return min_ball(points.positions[f[0]], points.positions[f[1]],
                        points.positions[f[2]]);
}

// Reverse-mode accumulation through the ball map: scatter d(center)=cbar and
// d(radius)=rbar into the face vertex gradients. No-op for degenerate balls
// (their probability is a constant 0 downstream).
inline void min_ball_backward(const Vec<2>& p1, const Vec<2>&, const MinBall<2>& b,
                              Vec<2> cbar, double rbar, Vec<2>& g1, Vec<2>& g2) {
    if (b.degenerate) return;
    if (rbar != 0.0 && b.radius > 0.0) {
        const Vec<2> u = (b.center - p1) / b.radius;
        cbar += rbar * u;
        g1 -= rbar * u;
    }
    g1 += 0.5 * cbar;
    g2 += 0.5 * cbar;
}

inline void min_ball_backward(const Vec<3>& p1, const Vec<3>& p2, const Vec<3>& p3,
                              const MinBall<3>& b, Vec<3> cbar, double rbar,
                              Vec<3>& g1, Vec<3>& g2, Vec<3>& g3) {
    if (b.degenerate) return;
    if (rbar != 0.0 && b.radius > 0.0) {
        const Vec<3> u = (b.center - p1) / b.radius;
        cbar += rbar * u;
        g1 -= rbar * u;
    }
    // The center solves A q = rhs with rows [d1; d2; n], rhs = (|d1|^2/2,
    // |d2|^2/2, 0), c = p1 + q. Differentiate implicitly: lambda = A^-T cbar,
    // then d(rhs) and d(A) contributions fall out of A dq = d(rhs) - dA q.
    const Vec<3> d1 = p2 - p1;
    const Vec<3> d2 = p3 - p1;
    const Vec<3> n = cross(d1, d2);
    const double det = norm2(n);  // det[d1, d2, n]
    const Vec<3> q = b.center - p1;
    auto det3 = [](const Vec<3>& a, const Vec<3>& bb, const Vec<3>& c) {
        return dot(a, cross(bb, c));
    };
    const double l1 = det3(cbar, d2, n) / det;
    const double l2 = det3(d1, cbar, n) / det;
    const double l3 = det3(d1, d2, cbar) / det;
    Vec<3> d1bar = l1 * d1 - l1 * q;
    Vec<3> d2bar = l2 * d2 - l2 * q;
    const Vec<3> nbar = -l3 * q;
    d1bar += cross(d2, nbar);
    d2bar += cross(nbar, d1);
    g1 += cbar - d1bar - d2bar;
    g2 += d1bar;
    g3 += d2bar;
}

// ---------------------------------------------------------------------------
// Signed distance (test oracle; the fast path lives in the spatial index)
// ---------------------------------------------------------------------------

// min over p outside F of |p - center| - radius, scanning every point.
// Positive iff the ball is empty.
template <int D>
inline double signed_distance_bruteforce(const MinBall<D>& ball,
                                         const PointSet<D>& points,
                                         const Face<D>& face) {
    if (ball.degenerate)
        throw std::invalid_argument("signed distance of a degenerate ball");
    if (points.size() <= D)
        throw std::invalid_argument("no points outside the face");
    double best = std::numeric_limits<double>::infinity();
    for (std::int32_t i = 0; i < points.size(); ++i) {
        if (face.contains(i)) continue;
        best = std::min(best, dist(points.positions[i], ball.center));
    }
    return best - ball.radius;
}

// ---------------------------------------------------------------------------
// Grid constants and sigmoid coefficient schedule
// ---------------------------------------------------------------------------

// Common signed distance shared by every interior face of the regular
// initialization grid with edge length x.
inline double d_common(int dim, double x) {
    if (!(x > 0.0)) throw std::invalid_argument("d_common: edge must be > 0");
    if (dim == 2) return 0.5 * (std::sqrt(3.0) - 1.0) * x;
    if (dim == 3) return (std::sqrt(34.0) - 3.0 * std::sqrt(2.0)) / 8.0 * x;
    throw std::invalid_argument("d_common: dim must be 2 or 3");
}

// First-epoch sigmoid coefficient: grid faces start at sigma(32) ~= 1.
inline double alpha_min_first_epoch(int dim, double grid_edge) {
    return 32.0 / d_common(dim, grid_edge);
}

inline double alpha_min(const SigmoidSchedule& s) {
    if (s.epoch < 1) throw std::invalid_argument("epoch must be >= 1");
    return s.alpha();
}

// ---------------------------------------------------------------------------
// Triangle aspect ratio: circumradius / (2 * inradius), 1 for equilateral.
// ---------------------------------------------------------------------------

inline constexpr double kAspectRatioCap = 1e4;

inline double aspect_ratio(const Vec<3>& p1, const Vec<3>& p2, const Vec<3>& p3) {
    const double a = dist(p2, p3);
    const double b = dist(p1, p3);
    const double c = dist(p1, p2);
    const double s = 0.5 * (a + b + c);
    const double area = 0.5 * norm(cross(p2 - p1, p3 - p1));
    if (!(area > 0.0)) return kAspectRatioCap;
    const double ar = a * b * c * s / (8.0 * area * area);
    return std::min(ar, kAspectRatioCap);
}

// d(AR)/d(vertices); zero when the cap is active (flat region).
inline void aspect_ratio_backward(const Vec<3>& p1, const Vec<3>& p2,
                                  const Vec<3>& p3, double arbar, Vec<3>& g1,
                                  Vec<3>& g2, Vec<3>& g3) {
    const double a = dist(p2, p3);
    const double b = dist(p1, p3);
    const double c = dist(p1, p2);
    const double s = 0.5 * (a + b + c);
    const Vec<3> n = cross(p2 - p1, p3 - p1);
    const double area = 0.5 * norm(n);
    if (!(area > 0.0)) return;
    const double ar = a * b * c * s / (8.0 * area * area);
    if (ar >= kAspectRatioCap) return;
    const double inv = 1.0 / (8.0 * area * area);
    const double abar = arbar * (b * c * s + a * b * c * 0.5) * inv;
    const double bbar = arbar * (a * c * s + a * b * c * 0.5) * inv;
    const double cbar = arbar * (a * b * s + a * b * c * 0.5) * inv;
    const double areabar = arbar * (-2.0 * a * b * c * s / (8.0 * area * area * area));
    // edge lengths
    const Vec<3> ua = (p2 - p3) / a;
    const Vec<3> ub = (p1 - p3) / b;
    const Vec<3> uc = (p1 - p2) / c;
    g2 += abar * ua;
    g3 -= abar * ua;
    g1 += bbar * ub;
    g3 -= bbar * ub;
    g1 += cbar * uc;
    g2 -= cbar * uc;
    // area = |n|/2 with n = d1 x d2
    const Vec<3> nbar = (areabar / (4.0 * area)) * n;
    const Vec<3> d1 = p2 - p1;
    const Vec<3> d2 = p3 - p1;
    const Vec<3> d1bar = cross(d2, nbar);
    const Vec<3> d2bar = cross(nbar, d1);
    g1 -= d1bar + d2bar;
    g2 += d1bar;
    g3 += d2bar;
}

}  // namespace minball
