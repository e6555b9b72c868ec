#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "fraclap/mesh.hpp"

using namespace fraclap;

namespace {

Mesh two_triangle_square() {
    std::vector<Vertex> v = {{0, 0, false}, {1, 0, false}, {1, 1, false}, {0, 1, false}};
    // refinement edge = longest edge = diagonal (0,2) for both
    std::vector<Triangle> t = {{{0, 2, 1}, 0}, {{2, 0, 3}, 0}};
    return Mesh(Domain::square, std::move(v), std::move(t));
}

double gamma_shape(const Mesh& m) {
    double g = 0.0;
    for (int t = 0; t < m.n_triangles(); ++t) {
        const auto c = m.corners(t);
        double diam = std::max({distance(c[0], c[1]), distance(c[1], c[2]), distance(c[2], c[0])});
        g = std::max(g, diam / std::sqrt(m.area(t)));
    }
    return g;
}

// independent adjacency scan: patch = all triangles sharing at least a vertex
std::set<int> brute_force_patch(const Mesh& m, int t) {
    std::set<int> out{t};
    for (int o = 0; o < m.n_triangles(); ++o)
        if (m.shared_vertex_count(t, o) > 0) out.insert(o);
    return out;
}

int locate(const Mesh& m, Point x) {
    for (int t = 0; t < m.n_triangles(); ++t) {
        const auto c = m.corners(t);
        if (point_in_triangle(x, c[0], c[1], c[2], 1e-12)) return t;
    }
    return -1;
}

}  // namespace

TEST_CASE("area: unit right triangle and degenerate input") {
    std::vector<Vertex> v = {{0, 0, false}, {1, 0, false}, {0, 1, false}};
    Mesh m(Domain::square, v, {{{0, 1, 2}, 0}});
    CHECK(m.area(0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.mesh_size(0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));

    std::vector<Vertex> bad = {{0, 0, false}, {1, 1, false}, {2, 2, false}};
    CHECK_THROWS_AS(Mesh(Domain::square, bad, {{{0, 1, 2}, 0}}), MeshError);
}

TEST_CASE("bisection halves straight-edged areas exactly") {
    Mesh m = two_triangle_square();
    const double a_parent = m.area(0);
    auto ref = nvb_refine(m, {0});
    ref.mesh.validate();
    int children = 0;
    for (size_t t = 0; t < ref.parent.size(); ++t) {
        if (ref.parent[t] == 0) {
            ++children;
            CHECK(ref.mesh.area(static_cast<int>(t)) ==
                  doctest::Approx(a_parent / 2.0).epsilon(1e-14));
            CHECK(ref.mesh.triangle(static_cast<int>(t)).generation == 1);
            // h scales by 1/sqrt(2)
            CHECK(ref.mesh.mesh_size(static_cast<int>(t)) ==
                  doctest::Approx(m.mesh_size(0) / std::sqrt(2.0)).epsilon(1e-13));
        }
    }
    CHECK(children == 2);
}

TEST_CASE("mesh_size basics") {
    std::vector<Vertex> v = {{0, 0, false}, {2, 0, false}, {0, 1, false}};
    Mesh m(Domain::square, v, {{{0, 1, 2}, 0}});
    CHECK(m.area(0) == doctest::Approx(1.0));
    CHECK(m.mesh_size(0) == doctest::Approx(1.0));
}

TEST_CASE("skeleton_distance: incenter, edge, contract") {
    std::vector<Vertex> v = {{0, 0, false}, {1, 0, false}, {0, 1, false}};
    Mesh m(Domain::square, v, {{{0, 1, 2}, 0}});
    // incenter of right triangle with legs 1: r = (a+b-c)/2
    const double r = (1.0 + 1.0 - std::sqrt(2.0)) / 2.0;
    const Point inc{r, r};
    CHECK(m.skeleton_distance(inc, 0) == doctest::Approx(r).epsilon(1e-13));
    CHECK(m.skeleton_distance({0.5, 0.0}, 0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(m.skeleton_distance({2.0, 2.0}, 0), MeshError);
}

TEST_CASE("skeleton_distance is 1-Lipschitz within an element") {
    Mesh m = Mesh::make_circle(8);
    const int t = 0;
    const auto c = m.corners(t);
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> uni(0.05, 0.9);
    for (int k = 0; k < 200; ++k) {
        double a = uni(rng), b = uni(rng) * (1.0 - a);
        double a2 = uni(rng), b2 = uni(rng) * (1.0 - a2);
        const Point x = a * c[0] + b * c[1] + (1 - a - b) * c[2];
        const Point y = a2 * c[0] + b2 * c[1] + (1 - a2 - b2) * c[2];
        CHECK(std::abs(m.skeleton_distance(x, t) - m.skeleton_distance(y, t)) <=
              distance(x, y) + 1e-14);
    }
}

TEST_CASE("skeleton distance decreases under bisection") {
    Mesh m = two_triangle_square();
    const Point x{0.55, 0.3};
    const int t = locate(m, x);
    REQUIRE(t >= 0);
    const double w_parent = m.skeleton_distance(x, t);
    auto ref = nvb_refine(m, {t});
    const int tc = locate(ref.mesh, x);
    REQUIRE(tc >= 0);
    CHECK(ref.mesh.skeleton_distance(x, tc) <= w_parent + 1e-14);
}

TEST_CASE("nvb_refine: no marks is a no-op") {
    Mesh m = Mesh::make_circle(8);
    auto ref = nvb_refine(m, {});
    CHECK(ref.mesh.n_triangles() == m.n_triangles());
    CHECK(ref.mesh.n_vertices() == m.n_vertices());
}

TEST_CASE("nvb_refine: single mark on criss-cross square stays conforming") {
    Mesh m = Mesh::make_square();
    auto ref = nvb_refine(m, {1});
    ref.mesh.validate();
    // the marked element was bisected
    int children = 0;
    for (int p : ref.parent)
        if (p == 1) ++children;
    CHECK(children >= 2);
    CHECK(ref.mesh.n_triangles() > m.n_triangles());
}

TEST_CASE("nvb_refine: mark all strictly grows the mesh and conforms") {
    Mesh m = Mesh::make_circle(8);
    std::vector<int> all(m.n_triangles());
    for (int i = 0; i < m.n_triangles(); ++i) all[i] = i;
    auto ref = nvb_refine(m, all);
    ref.mesh.validate();
    CHECK(ref.mesh.n_triangles() > m.n_triangles());
    auto uni = uniform_refine(m);
    CHECK(uni.mesh.n_triangles() == ref.mesh.n_triangles());
}

TEST_CASE("uniform_refine: 2-triangle square -> 4 -> 8") {
    Mesh m = two_triangle_square();
    auto r1 = uniform_refine(m);
    r1.mesh.validate();
    CHECK(r1.mesh.n_triangles() == 4);
    auto r2 = uniform_refine(r1.mesh);
    r2.mesh.validate();
    CHECK(r2.mesh.n_triangles() == 8);
    // partition of the square: area preserved
    double total = 0.0;
    for (int t = 0; t < r2.mesh.n_triangles(); ++t) total += r2.mesh.area(t);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("shape regularity stays bounded over uniform sweeps") {
    for (Mesh m : {two_triangle_square(), Mesh::make_circle(16), Mesh::make_lshape()}) {
        const double g0 = gamma_shape(m);
        double gmax = g0;
        for (int sweep = 0; sweep < 6; ++sweep) {
            m = uniform_refine(m).mesh;
            gmax = std::max(gmax, gamma_shape(m));
        }
        CHECK(gmax <= 2.0 * g0);
    }
}

TEST_CASE("nestedness: child vertices lie in the parent closure") {
    Mesh m = Mesh::make_lshape();
    for (int sweep = 0; sweep < 2; ++sweep) {
        auto ref = uniform_refine(m);
        for (int t = 0; t < ref.mesh.n_triangles(); ++t) {
            const auto cp = m.corners(ref.parent[t]);
            for (int k = 0; k < 3; ++k) {
                const Point p = ref.mesh.vertex_point(ref.mesh.triangle(t).v[k]);
                CHECK(point_in_triangle(p, cp[0], cp[1], cp[2], 1e-12));
            }
        }
        m = ref.mesh;
    }
}

TEST_CASE("circle refinement snaps boundary midpoints onto the unit circle") {
    Mesh m = Mesh::make_circle(8);
    for (int sweep = 0; sweep < 4; ++sweep) m = uniform_refine(m).mesh;
    int boundary_verts = 0;
    for (int v = 0; v < m.n_vertices(); ++v) {
        if (m.vertex(v).on_boundary) {
            ++boundary_verts;
            CHECK(norm(m.vertex_point(v)) == doctest::Approx(1.0).epsilon(1e-13));
        }
    }
    CHECK(boundary_verts > 8);
}

TEST_CASE("patch: brute-force agreement and structured-grid count") {
    // structured diagonal grid on [0,4]^2 (same-direction diagonals)
    const int n = 4;
    std::vector<Vertex> verts;
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) verts.push_back({double(i), double(j), false});
    auto vid = [&](int i, int j) { return j * (n + 1) + i; };
    std::vector<Triangle> tris;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            tris.push_back({{vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)}, 0});
            tris.push_back({{vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)}, 0});
        }
    Mesh m(Domain::square, verts, tris);

    for (int t = 0; t < m.n_triangles(); ++t) {
        const auto expect = brute_force_patch(m, t);
        const auto got = m.patch(t, 1);
        CHECK(std::set<int>(got.begin(), got.end()) == expect);
    }
    // an interior element of the structured grid has a 13-element patch
    int interior = -1;
    for (int t = 0; t < m.n_triangles(); ++t) {
        bool all_interior = true;
        for (int v : m.triangle(t).v)
            if (m.vertex(v).on_boundary) all_interior = false;
        if (all_interior) interior = t;
    }
    REQUIRE(interior >= 0);
    CHECK(brute_force_patch(m, interior).size() == 13);
    CHECK(m.patch(interior, 1).size() == 13);
}

TEST_CASE("patch: contains the element and is monotone in the order") {
    Mesh m = Mesh::make_lshape();
    for (int t = 0; t < m.n_triangles(); ++t) {
        auto p1 = m.patch(t, 1);
        CHECK(std::find(p1.begin(), p1.end(), t) != p1.end());
        auto p2 = m.patch(t, 2);
        CHECK(p2.size() >= p1.size());
        for (int e : p1) CHECK(std::find(p2.begin(), p2.end(), e) != p2.end());
    }
    // corner element's patch is contained in a neighbor's 2nd-order patch
    const auto p1 = m.patch(0, 1);
    int neighbor = -1;
    for (int o = 0; o < m.n_triangles(); ++o)
        if (o != 0 && m.shared_vertex_count(0, o) == 2) neighbor = o;
    REQUIRE(neighbor >= 0);
    const auto p2 = m.patch(neighbor, 2);
    for (int e : p1) CHECK(std::find(p2.begin(), p2.end(), e) != p2.end());
}

TEST_CASE("initial meshes are valid and as specified") {
    Mesh c = Mesh::make_circle(16);
    c.validate();
    CHECK(c.n_triangles() == 16);
    CHECK(c.n_vertices() == 17);
    CHECK(c.n_dofs() == 1);  // only the center is interior

    Mesh l = Mesh::make_lshape();
    l.validate();
    CHECK(l.n_triangles() == 12);
    double area = 0.0;
    for (int t = 0; t < l.n_triangles(); ++t) area += l.area(t);
    CHECK(area == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(l.n_dofs() == 3);  // the three square centers

    Mesh s = Mesh::make_square();
    s.validate();
    CHECK(s.n_dofs() == 1);
}

TEST_CASE("conformity audit after repeated adaptive refinement") {
    Mesh m = Mesh::make_lshape();
    std::mt19937 rng(7);
    for (int round = 0; round < 5; ++round) {
        std::vector<int> marked;
        for (int t = 0; t < m.n_triangles(); ++t)
            if (rng() % 3 == 0) marked.push_back(t);
        auto ref = nvb_refine(m, marked);
        ref.mesh.validate();
        for (int t : marked) {
            // marked triangles must have been bisected: no child equals parent
            bool gone = true;
            for (size_t c = 0; c < ref.parent.size(); ++c)
                if (ref.parent[c] == t &&
                    ref.mesh.triangle(static_cast<int>(c)).generation == m.triangle(t).generation)
                    gone = false;
            CHECK(gone);
        }
        m = ref.mesh;
    }
}
