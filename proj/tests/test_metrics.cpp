#include <catch2/catch_amalgamated.hpp>
#include <numbers>

#include "helpers.hpp"
#include "minball/metrics.hpp"
#include "minball/tessellation.hpp"

using namespace minball;

namespace {

Mesh<3> cube_mesh(double side = 1.0, Vec<3> origin = {0, 0, 0}) {
    Mesh<3> m;
    for (int z = 0; z <= 1; ++z)
        for (int y = 0; y <= 1; ++y)
            for (int x = 0; x <= 1; ++x)
                m.vertices.push_back(origin + side * Vec<3>{double(x), double(y), double(z)});
    // 12 triangles, two per cube facet
    const int quads[6][4] = {{0, 1, 3, 2}, {4, 5, 7, 6}, {0, 1, 5, 4},
                             {2, 3, 7, 6}, {0, 2, 6, 4}, {1, 3, 7, 5}};
    for (const auto& q : quads) {
        m.faces.push_back(Face<3>(q[0], q[1], q[2]));
        m.faces.push_back(Face<3>(q[0], q[2], q[3]));
    }
    m.source_index.resize(m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i)
        m.source_index[i] = static_cast<std::int32_t>(i);
    return m;
}

Mesh<3> sphere_mesh(int n = 2048, double radius = 0.35) {
    PointSet<3> ps(testutil::sphere_cloud(n, radius));
    // support shell keeps the global near-cosphericity from leaking big faces
    for (const double r : {radius - 0.08, radius + 0.08})
        for (const auto& q : testutil::sphere_cloud(n / 4, r)) {
            ps.positions.push_back(q);
            ps.psi.push_back(0.0);
        }
    const KdTree<3> index(ps.positions);
    return extract_mesh(ps, 0.5, index);
}

Mesh<2> polyline_circle(int n, double radius = 0.35) {
    Mesh<2> m;
    m.vertices = testutil::circle_cloud(n, radius);
    for (int i = 0; i < n; ++i) m.faces.push_back(Face<2>(i, (i + 1) % n));
    m.source_index.resize(n);
    for (int i = 0; i < n; ++i) m.source_index[i] = i;
    return m;
}

}  // namespace

TEST_CASE("chamfer of identical meshes is zero, f1 is one", "[metrics]") {
    const auto cube = cube_mesh();
    const auto [cd, f1] = chamfer_f1(cube, cube, 4000, 0.005, 3);
    CHECK(cd < 1e-6);
    CHECK(f1 == 1.0);
}

TEST_CASE("translated plane: squared convention", "[metrics]") {
    Mesh<3> plane;
    plane.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    plane.faces = {Face<3>(0, 1, 2), Face<3>(0, 2, 3)};
    plane.source_index = {0, 1, 2, 3};
    Mesh<3> shifted = plane;
    const double t = 0.02;
    for (auto& v : shifted.vertices) v[2] += t;
    const auto [cd, f1] = chamfer_f1(plane, shifted, 20000, 0.005, 5);
    CHECK(cd == Catch::Approx(t * t).epsilon(0.05));
    CHECK(f1 == 0.0);  // 0.02 displacement exceeds tau = 0.005 everywhere

    Mesh<3> far = plane;
    for (auto& v : far.vertices) v[0] += 50.0;
    CHECK(chamfer_f1(plane, far, 2000, 0.005, 5).second == 0.0);
}

TEST_CASE("chamfer is symmetric with identical sample seeds", "[metrics]") {
    const auto a = cube_mesh();
    auto b = cube_mesh(0.9, {0.05, 0.05, 0.05});
    const auto ab = chamfer_f1(a, b, 5000, 0.005, 11);
    const auto ba = chamfer_f1(b, a, 5000, 0.005, 11);
    // the two one-sided terms swap but samples differ per mesh seed stream
    CHECK(ab.first == Catch::Approx(ba.first).epsilon(0.05));
}

TEST_CASE("normal consistency", "[metrics]") {
    Mesh<3> plane;
    plane.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    plane.faces = {Face<3>(0, 1, 2), Face<3>(0, 2, 3)};
    plane.source_index = {0, 1, 2, 3};
    CHECK(normal_consistency(plane, plane, 2000, 1) == Catch::Approx(1.0));

    // flipped orientation: |cos| convention keeps it at 1
    Mesh<3> flipped = plane;
    flipped.faces = {Face<3>(0, 2, 1), Face<3>(0, 3, 2)};
    CHECK(normal_consistency(plane, flipped, 2000, 1) == Catch::Approx(1.0));

    // orthogonal planes: cos = 0
    Mesh<3> wall;
    wall.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 0, 1}, {0, 0, 1}};
    wall.faces = {Face<3>(0, 1, 2), Face<3>(0, 2, 3)};
    wall.source_index = {0, 1, 2, 3};
    CHECK(normal_consistency(plane, wall, 2000, 1) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("edge metrics: cubes, spheres, and a beveled cube", "[metrics]") {
    const auto cube = cube_mesh();
    const auto [ecd, ef1] = edge_metrics(cube, cube, 30.0, 0.005, 4000, 7);
    CHECK(ecd < 1e-5);
    CHECK(ef1 == Catch::Approx(1.0).margin(1e-6));

    // smooth rings have no sharp features: the both-empty convention
    const auto sphere = sphere_mesh();
    REQUIRE(sphere.faces.size() > 100);
    const auto [secd, sef1] = edge_metrics(sphere, sphere, 30.0, 0.005, 2000, 7);
    CHECK(secd == 0.0);
    CHECK(sef1 == 1.0);

    // displacing the cube moves its sharp edges
    auto moved = cube_mesh(1.0, {0.05, 0.0, 0.0});
    const auto [becd, bef1] = edge_metrics(cube, moved, 30.0, 0.005, 4000, 7);
    CHECK(becd > 0.0);
}

TEST_CASE("mesh quality of a closed cube", "[metrics]") {
    const auto q = mesh_quality(cube_mesh());
    CHECK(q.si_ratio == 0.0);
    CHECK(q.nme_ratio == 0.0);
    CHECK(q.nmv_ratio == 0.0);
    CHECK(q.ar_mean > 1.0);  // right isoceles triangles
    CHECK(q.ar_mean == Catch::Approx((std::sqrt(2.0) + 1.0) / 2.0).epsilon(1e-9));
}

TEST_CASE("equilateral has aspect ratio exactly one", "[metrics]") {
    Mesh<3> m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0}};
    m.faces = {Face<3>(0, 1, 2)};
    m.source_index = {0, 1, 2};
    CHECK(mesh_quality(m).ar_mean == Catch::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("crossing triangles are flagged as self-intersection", "[metrics]") {
    Mesh<3> m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0},      // flat triangle
                  {0.5, 0.5, -1}, {0.5, 0.5, 1}, {0.4, -0.5, 0.1}};  // pierces it
    m.faces = {Face<3>(0, 1, 2), Face<3>(3, 4, 5)};
    m.source_index = {0, 1, 2, 3, 4, 5};
    CHECK(mesh_quality(m).si_ratio == 1.0);

    // sharing a vertex excludes the pair
    Mesh<3> adj;
    adj.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0}, {-1, 0, 0}, {-0.5, 1, 0}};
    adj.faces = {Face<3>(0, 1, 2), Face<3>(0, 3, 4)};
    adj.source_index = {0, 1, 2, 3, 4};
    CHECK(mesh_quality(adj).si_ratio == 0.0);
}

TEST_CASE("2D segment crossings and junction vertices", "[metrics]") {
    Mesh<2> m;
    m.vertices = {{0, 0}, {1, 1}, {0, 1}, {1, 0}};
    m.faces = {Face<2>(0, 1), Face<2>(2, 3)};
    m.source_index = {0, 1, 2, 3};
    CHECK(mesh_quality(m).si_ratio == 1.0);
    CHECK(mesh_quality(m).ar_mean == 0.0);

    // three segments at one vertex: a 2D non-manifold junction
    Mesh<2> tee;
    tee.vertices = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}};
    tee.faces = {Face<2>(0, 1), Face<2>(0, 2), Face<2>(0, 3)};
    tee.source_index = {0, 1, 2, 3};
    CHECK(mesh_quality(tee).nme_ratio == Catch::Approx(0.25));
    CHECK(mesh_quality(tee).si_ratio == 0.0);
}

TEST_CASE("three triangles on one edge are non-manifold", "[metrics]") {
    Mesh<3> m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, 1, 0}, {0.5, -1, 0}, {0.5, 0, 1}};
    m.faces = {Face<3>(0, 1, 2), Face<3>(0, 1, 3), Face<3>(0, 1, 4)};
    m.source_index = {0, 1, 2, 3, 4};
    const auto q = mesh_quality(m);
    CHECK(q.nme_ratio == Catch::Approx(1.0 / 7.0));  // 7 distinct edges
    CHECK(q.si_ratio == 0.0);
}

TEST_CASE("disconnected fan marks a non-manifold vertex", "[metrics]") {
    // two triangles touching only at vertex 0
    Mesh<3> m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {-1, 0, 0}, {-1, -1, 0}};
    m.faces = {Face<3>(0, 1, 2), Face<3>(0, 3, 4)};
    m.source_index = {0, 1, 2, 3, 4};
    CHECK(mesh_quality(m).nmv_ratio == Catch::Approx(1.0 / 5.0));
}

TEST_CASE("extracted meshes have no self-intersections", "[metrics][property]") {
    Rng rng(2025);
    for (int trial = 0; trial < 25; ++trial) {
        PointSet<2> ps2 = testutil::random_pointset<2>(40, rng);
        const KdTree<2> i2(ps2.positions);
        CHECK(mesh_quality(extract_mesh(ps2, 0.5, i2)).si_ratio == 0.0);

        PointSet<3> ps3 = testutil::random_pointset<3>(40, rng);
        const KdTree<3> i3(ps3.positions);
        CHECK(mesh_quality(extract_mesh(ps3, 0.5, i3)).si_ratio == 0.0);
    }
    const auto sphere = sphere_mesh();
    CHECK(mesh_quality(sphere).si_ratio == 0.0);
}

TEST_CASE("full report carries every field", "[metrics]") {
    const auto circle = polyline_circle(64);
    const auto report = evaluate(circle, polyline_circle(128), 2000, 0.005, 9);
    CHECK(report.cd >= 0.0);
    CHECK(report.cd < 1e-4);
    CHECK(report.f1 > 0.9);
    CHECK(report.nc > 0.95);
    CHECK(report.n_verts == 64);
    CHECK(report.n_faces == 64);
    CHECK(report.si_ratio == 0.0);
    CHECK(report.runtime_seconds >= 0.0);
}
