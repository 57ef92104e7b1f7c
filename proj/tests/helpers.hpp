#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "minball/rng.hpp"
#include "minball/types.hpp"
#include "minball/vec.hpp"

namespace testutil {

using minball::Face;
using minball::PointSet;
using minball::Rng;
using minball::Vec;

template <int D>
inline std::vector<Vec<D>> random_points(int n, Rng& rng, double lo = 0.0,
                                         double hi = 1.0) {
    std::vector<Vec<D>> pts(n);
    for (auto& p : pts)
        for (int d = 0; d < D; ++d) p[d] = rng.uniform(lo, hi);
    return pts;
}

template <int D>
inline PointSet<D> random_pointset(int n, Rng& rng, double psi = 1.0) {
    PointSet<D> ps(random_points<D>(n, rng));
    std::fill(ps.psi.begin(), ps.psi.end(), psi);
    return ps;
}

// Uniform samples on a circle of given radius centered in the unit square.
inline std::vector<Vec<2>> circle_cloud(int n, double radius = 0.35,
                                        Vec<2> center = {0.5, 0.5}) {
    std::vector<Vec<2>> pts(n);
    for (int i = 0; i < n; ++i) {
        const double a = 2.0 * std::numbers::pi * (i + 0.5) / n;
        pts[i] = {center[0] + radius * std::cos(a), center[1] + radius * std::sin(a)};
    }
    return pts;
}

// Deterministic equal-area-ish samples on a sphere (Fibonacci lattice).
inline std::vector<Vec<3>> sphere_cloud(int n, double radius = 0.35,
                                        Vec<3> center = {0.5, 0.5, 0.5}) {
    std::vector<Vec<3>> pts(n);
    const double ga = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double a = ga * i;
        pts[i] = {center[0] + radius * r * std::cos(a),
                  center[1] + radius * r * std::sin(a), center[2] + radius * z};
    }
    return pts;
}

// Brute-force k nearest neighbors with the library's tie rule.
template <int D>
inline std::vector<std::pair<double, std::int32_t>> brute_knn(
    const std::vector<Vec<D>>& pts, const Vec<D>& q, int k) {
    std::vector<std::pair<double, std::int32_t>> all(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i)
        all[i] = {minball::dist2(q, pts[i]), static_cast<std::int32_t>(i)};
    std::sort(all.begin(), all.end());
    all.resize(k);
    for (auto& e : all) e.first = std::sqrt(e.first);
    return all;
}

// Independent circumcenter oracle: solve the in-plane 2x2 equidistance
// system in the (d1, d2) basis. Used to cross-check the closed form.
inline Vec<3> circumcenter_oracle(const Vec<3>& p1, const Vec<3>& p2,
                                  const Vec<3>& p3) {
    const Vec<3> d1 = p2 - p1, d2 = p3 - p1;
    const double a11 = 2.0 * minball::dot(d1, d1), a12 = 2.0 * minball::dot(d1, d2);
    const double a22 = 2.0 * minball::dot(d2, d2);
    const double b1 = minball::dot(d1, d1), b2 = minball::dot(d2, d2);
    const double det = a11 * a22 - a12 * a12;
    const double s = (b1 * a22 - b2 * a12) / det;
    const double t = (a11 * b2 - a12 * b1) / det;
    return p1 + s * d1 + t * d2;
}

}  // namespace testutil
