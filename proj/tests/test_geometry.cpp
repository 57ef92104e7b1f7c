#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "minball/geometry.hpp"

using namespace minball;
using testutil::circumcenter_oracle;

TEST_CASE("min ball of a 2D segment is its midpoint ball", "[geometry]") {
    const auto b = min_ball(Vec<2>{0, 0}, Vec<2>{1, 0});
    CHECK(b.center == Vec<2>{0.5, 0.0});
    CHECK(b.radius == 0.5);
    CHECK_FALSE(b.degenerate);

    const auto c = min_ball(Vec<2>{0, 0}, Vec<2>{3, 4});
    CHECK(c.center == Vec<2>{1.5, 2.0});
    CHECK(c.radius == Catch::Approx(2.5).margin(1e-15));

    CHECK(min_ball(Vec<2>{0.3, -1}, Vec<2>{0.3, -1}).degenerate);
}

TEST_CASE("3D circumcenter matches the equidistance solve", "[geometry]") {
    const Vec<3> p1{0, 0, 0}, p2{1, 0, 0}, p3{0, 1, 0};
    const auto b = min_ball(p1, p2, p3);
    REQUIRE_FALSE(b.degenerate);
    CHECK(dist(b.center, Vec<3>{0.5, 0.5, 0.0}) < 1e-14);
    CHECK(b.radius == Catch::Approx(std::sqrt(0.5)).epsilon(1e-13));

    // equilateral side 1: circumradius 1/sqrt(3)
    const Vec<3> q3{0.5, std::sqrt(3.0) / 2.0, 0.0};
    const auto e = min_ball(p1, p2, q3);
    CHECK(e.radius == Catch::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
    CHECK(dist(e.center, circumcenter_oracle(p1, p2, q3)) < 1e-12);

    CHECK(min_ball(Vec<3>{0, 0, 0}, Vec<3>{1, 0, 0}, Vec<3>{2, 0, 0}).degenerate);
}

TEST_CASE("random min balls: equidistant, on the affine hull, minimal",
          "[geometry][property]") {
    Rng rng(42);
    int degenerate_2d = 0, degenerate_3d = 0;
    for (int it = 0; it < 10000; ++it) {
        {
            const auto p1 = testutil::random_points<2>(1, rng)[0];
            const auto p2 = testutil::random_points<2>(1, rng)[0];
            const auto b = min_ball(p1, p2);
            if (b.degenerate) {
                ++degenerate_2d;
                continue;
            }
            REQUIRE(std::abs(dist(b.center, p1) - b.radius) <= 1e-9 * b.radius);
            REQUIRE(std::abs(dist(b.center, p2) - b.radius) <= 1e-9 * b.radius);
            // center on the segment's line
            const Vec<2> e = p2 - p1;
            REQUIRE(std::abs(cross2(b.center - p1, e)) / norm(e) < 1e-9);
        }
        {
            const auto pts = testutil::random_points<3>(3, rng);
            const auto b = min_ball(pts[0], pts[1], pts[2]);
            if (b.degenerate) {
                ++degenerate_3d;
                continue;
            }
            for (const auto& p : pts)
                REQUIRE(std::abs(dist(b.center, p) - b.radius) <= 1e-9 * b.radius);
            Vec<3> n = cross(pts[1] - pts[0], pts[2] - pts[0]);
            n = n / norm(n);
            REQUIRE(std::abs(dot(b.center - pts[0], n)) < 1e-9 * (1.0 + b.radius));
        }
    }
    CHECK(degenerate_2d == 0);  // random reals never coincide
    CHECK(degenerate_3d == 0);
}

TEST_CASE("min ball minimality along the plane normal", "[geometry][property]") {
    Rng rng(7);
    for (int it = 0; it < 1000; ++it) {
        const auto pts = testutil::random_points<3>(3, rng);
        const auto b = min_ball(pts[0], pts[1], pts[2]);
        if (b.degenerate) continue;
        Vec<3> n = cross(pts[1] - pts[0], pts[2] - pts[0]);
        n = n / norm(n);
        for (int j = 0; j < 8; ++j) {
            const double t = rng.uniform(-1.0, 1.0);
            const double r_perturbed = dist(b.center + t * n, pts[0]);
            REQUIRE(b.radius <= r_perturbed + 1e-9);
        }
    }
}

TEST_CASE("brute-force signed distance", "[geometry]") {
    PointSet<2> ps;
    ps.positions = {{0, 0}, {1, 0}, {0.5, 0.5}};
    ps.psi = {1, 1, 1};
    const Face<2> f(0, 1);
    const auto ball = min_ball_of_face(ps, f);

    CHECK(signed_distance_bruteforce(ball, ps, f) == Catch::Approx(0.0).margin(1e-15));
    ps.positions[2] = {0.5, 0.2};
    CHECK(signed_distance_bruteforce(ball, ps, f) == Catch::Approx(-0.3).margin(1e-12));
    ps.positions[2] = {0.5, 2.0};
    CHECK(signed_distance_bruteforce(ball, ps, f) == Catch::Approx(1.5).margin(1e-12));

    PointSet<2> two;
    two.positions = {{0, 0}, {1, 0}};
    two.psi = {1, 1};
    CHECK_THROWS(signed_distance_bruteforce(ball, two, f));
}

TEST_CASE("grid common distance constants", "[geometry]") {
    CHECK(d_common(2, 1.0) == Catch::Approx(0.5 * (std::sqrt(3.0) - 1.0)).epsilon(1e-14));
    CHECK(d_common(2, 1.0) == Catch::Approx(0.36602540378443865).epsilon(1e-14));
    CHECK(d_common(3, 1.0) == Catch::Approx(0.19853890096575188).epsilon(1e-13));
    CHECK(d_common(2, 0.05) == Catch::Approx(0.018301270189221933).epsilon(1e-13));
    CHECK_THROWS(d_common(4, 1.0));
    CHECK_THROWS(d_common(2, 0.0));
}

TEST_CASE("alpha_min schedule halves per epoch", "[geometry]") {
    const double a1 = alpha_min_first_epoch(2, 1.0);
    CHECK(a1 == Catch::Approx(32.0 * (std::sqrt(3.0) + 1.0)).epsilon(1e-13));

    SigmoidSchedule s{a1, 1};
    CHECK(alpha_min(s) == a1);
    s.epoch = 2;
    CHECK(alpha_min(s) == Catch::Approx(a1 / 2.0));

    double prev = std::numeric_limits<double>::infinity();
    for (int epoch = 1; epoch <= 10; ++epoch) {
        s.epoch = epoch;
        const double a = alpha_min(s);
        REQUIRE(a > 0.0);
        REQUIRE(a < prev);
        prev = a;
    }
}

TEST_CASE("aspect ratio normalized to equilateral", "[geometry]") {
    const Vec<3> a{0, 0, 0}, b{1, 0, 0};
    const Vec<3> c{0.5, std::sqrt(3.0) / 2.0, 0.0};
    CHECK(aspect_ratio(a, b, c) == Catch::Approx(1.0).epsilon(1e-12));

    // right isoceles, legs 1
    const Vec<3> r{0, 1, 0};
    CHECK(aspect_ratio(a, b, r) ==
          Catch::Approx((std::sqrt(2.0) + 1.0) / 2.0).epsilon(1e-12));

    // collinear: capped
    CHECK(aspect_ratio(a, b, Vec<3>{2, 0, 0}) == kAspectRatioCap);
}

TEST_CASE("min ball backward matches finite differences", "[geometry][grad]") {
    Rng rng(11);
    for (int it = 0; it < 50; ++it) {
        const auto pts = testutil::random_points<3>(3, rng);
        const auto b = min_ball(pts[0], pts[1], pts[2]);
        if (b.degenerate) continue;
        // scalar probe: dot(c, w) + r * wr
        const Vec<3> w{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double wr = rng.uniform(-1, 1);
        Vec<3> g1{}, g2{}, g3{};
        min_ball_backward(pts[0], pts[1], pts[2], b, w, wr, g1, g2, g3);
        const Vec<3>* grads[3] = {&g1, &g2, &g3};
        const double h = 1e-6;
        for (int v = 0; v < 3; ++v) {
            for (int d = 0; d < 3; ++d) {
                auto probe = [&](double delta) {
                    auto q = pts;
                    q[v][d] += delta;
                    const auto bb = min_ball(q[0], q[1], q[2]);
                    return dot(bb.center, w) + bb.radius * wr;
                };
                const double fd = (probe(h) - probe(-h)) / (2.0 * h);
                REQUIRE((*grads[v])[d] ==
                        Catch::Approx(fd).margin(1e-4).epsilon(1e-5));
            }
        }
    }
}

TEST_CASE("aspect ratio backward matches finite differences", "[geometry][grad]") {
    Rng rng(13);
    for (int it = 0; it < 50; ++it) {
        const auto pts = testutil::random_points<3>(3, rng);
        if (aspect_ratio(pts[0], pts[1], pts[2]) >= kAspectRatioCap) continue;
        Vec<3> g1{}, g2{}, g3{};
        aspect_ratio_backward(pts[0], pts[1], pts[2], 1.0, g1, g2, g3);
        const Vec<3>* grads[3] = {&g1, &g2, &g3};
        const double h = 1e-6;
        for (int v = 0; v < 3; ++v) {
            for (int d = 0; d < 3; ++d) {
                auto probe = [&](double delta) {
                    auto q = pts;
                    q[v][d] += delta;
                    return aspect_ratio(q[0], q[1], q[2]);
                };
                const double fd = (probe(h) - probe(-h)) / (2.0 * h);
                const double got = (*grads[v])[d];
                REQUIRE(got == Catch::Approx(fd).margin(1e-3).epsilon(1e-4));
            }
        }
    }
}
