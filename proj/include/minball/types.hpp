#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "minball/vec.hpp"

namespace minball {

// A face is a (D-1)-simplex: a segment in 2D, a triangle in 3D. Indices are
// kept strictly increasing (canonical form) so faces hash and compare by value.
template <int D>
struct Face {
    std::array<std::int32_t, D> idx{};

    Face() = default;
    explicit Face(std::array<std::int32_t, D> indices) : idx(indices) {
        std::sort(idx.begin(), idx.end());
    }
    Face(std::int32_t a, std::int32_t b) : idx{a, b} {
        static_assert(D == 2);
        std::sort(idx.begin(), idx.end());
    }
    Face(std::int32_t a, std::int32_t b, std::int32_t c) : idx{a, b, c} {
        static_assert(D == 3);
        std::sort(idx.begin(), idx.end());
    }

    std::int32_t operator[](int i) const { return idx[i]; }

    bool contains(std::int32_t p) const {
        for (int i = 0; i < D; ++i)
            if (idx[i] == p) return true;
        return false;
    }

    bool valid(std::int64_t n_points) const {
        for (int i = 0; i < D; ++i) {
            if (idx[i] < 0 || idx[i] >= n_points) return false;
            if (i > 0 && idx[i] <= idx[i - 1]) return false;
        }
        return true;
    }

    friend bool operator==(const Face& a, const Face& b) { return a.idx == b.idx; }
    friend bool operator<(const Face& a, const Face& b) { return a.idx < b.idx; }
};

template <int D>
struct FaceHash {
    std::size_t operator()(const Face<D>& f) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (int i = 0; i < D; ++i) {
            h ^= static_cast<std::uint64_t>(f.idx[i]) + 0x9e3779b97f4a7c15ULL +
                 (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

// The continuous state being optimized: positions plus a per-point real
// value psi in [0,1] that marks whether the point lies on the surface.
template <int D>
struct PointSet {
    std::vector<Vec<D>> positions;
    std::vector<double> psi;

    PointSet() = default;
    explicit PointSet(std::vector<Vec<D>> pos, double psi_init = 1.0)
        : positions(std::move(pos)), psi(positions.size(), psi_init) {}

    std::int64_t size() const { return static_cast<std::int64_t>(positions.size()); }

    void validate() const {
        if (size() < D) throw std::invalid_argument("point set smaller than dim");
        if (psi.size() != positions.size())
            throw std::invalid_argument("psi size mismatch");
        for (const auto& p : positions)
            if (!finite(p)) throw std::invalid_argument("non-finite coordinate");
        for (double s : psi)
            if (!(s >= 0.0 && s <= 1.0))
                throw std::invalid_argument("psi outside [0,1]");
    }
};

// Minimum bounding ball of a face: the smallest ball through all its
// vertices. Its center lies on the face's affine hull. Degenerate
// (collinear / coincident) faces are flagged and excluded downstream.
template <int D>
struct MinBall {
    Vec<D> center{};
    double radius = 0.0;
    bool degenerate = false;
};

// Sigmoid sharpness schedule: alpha halves at each subdivision epoch.
struct SigmoidSchedule {
    double alpha1 = 1.0;  // first-epoch coefficient
    int epoch = 1;

    double alpha() const {
        return alpha1 / static_cast<double>(std::int64_t{1} << (epoch - 1));
    }
};

struct FaceProbability {
    double lambda_min = 0.0;
    double lambda_real = 0.0;
    double lambda = 0.0;  // product of the two
};

// Extracted hard mesh: vertices are a subset of the point set, faces index
// into `vertices`. `source_index` maps a mesh vertex back to its point.
template <int D>
struct Mesh {
    std::vector<Vec<D>> vertices;
    std::vector<Face<D>> faces;
    std::vector<std::int32_t> source_index;
};

}  // namespace minball
