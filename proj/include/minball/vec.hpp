#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <ostream>

namespace minball {

// Small fixed-dimension vector. D is 2 or 3 throughout this library.
template <int D>
struct Vec {
    std::array<double, D> v{};

    Vec() = default;
    Vec(double x, double y) : v{x, y} { static_assert(D == 2); }
    Vec(double x, double y, double z) : v{x, y, z} { static_assert(D == 3); }

    double& operator[](int i) { return v[i]; }
    double operator[](int i) const { return v[i]; }

    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < D; ++i) v[i] += o.v[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (int i = 0; i < D; ++i) v[i] -= o.v[i];
        return *this;
    }
    Vec& operator*=(double s) {
        for (int i = 0; i < D; ++i) v[i] *= s;
        return *this;
    }

    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(Vec a, double s) { return a *= s; }
    friend Vec operator*(double s, Vec a) { return a *= s; }
    friend Vec operator/(Vec a, double s) { return a *= (1.0 / s); }
    friend Vec operator-(const Vec& a) {
        Vec r;
        for (int i = 0; i < D; ++i) r.v[i] = -a.v[i];
        return r;
    }
    friend bool operator==(const Vec& a, const Vec& b) { return a.v == b.v; }
};

template <int D>
inline double dot(const Vec<D>& a, const Vec<D>& b) {
    double s = 0;
    for (int i = 0; i < D; ++i) s += a[i] * b[i];
    return s;
}

template <int D>
inline double norm2(const Vec<D>& a) {
    return dot(a, a);
}

template <int D>
inline double norm(const Vec<D>& a) {
    return std::sqrt(norm2(a));
}

template <int D>
inline double dist2(const Vec<D>& a, const Vec<D>& b) {
    double s = 0;
    for (int i = 0; i < D; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

template <int D>
inline double dist(const Vec<D>& a, const Vec<D>& b) {
    return std::sqrt(dist2(a, b));
}

inline Vec<3> cross(const Vec<3>& a, const Vec<3>& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0]};
}

// z-component of the 2D cross product; sign gives orientation.
inline double cross2(const Vec<2>& a, const Vec<2>& b) {
    return a[0] * b[1] - a[1] * b[0];
}

// Counter-clockwise perpendicular.
inline Vec<2> perp(const Vec<2>& a) {
    return {-a[1], a[0]};
}

template <int D>
inline bool finite(const Vec<D>& a) {
    for (int i = 0; i < D; ++i)
        if (!std::isfinite(a[i])) return false;
    return true;
}

template <int D>
inline std::ostream& operator<<(std::ostream& os, const Vec<D>& a) {
    os << '(';
    for (int i = 0; i < D; ++i) os << (i ? "," : "") << a[i];
    return os << ')';
}

}  // namespace minball
