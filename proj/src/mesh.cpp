#include "fraclap/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <unordered_map>

namespace fraclap {

namespace {

using EdgeKey = std::uint64_t;

EdgeKey edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

std::string domain_name(Domain d) {
    switch (d) {
        case Domain::circle: return "circle";
        case Domain::lshape: return "lshape";
        case Domain::square: return "square";
    }
    return "circle";
}

Domain domain_from_name(const std::string& name) {
    if (name == "circle") return Domain::circle;
    if (name == "lshape") return Domain::lshape;
    if (name == "square") return Domain::square;
    throw MeshError("unknown domain tag: " + name);
}

Mesh::Mesh(Domain domain, std::vector<Vertex> vertices, std::vector<Triangle> triangles)
    : domain_(domain), vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
    finalize();
}

void Mesh::finalize() {
    const int nv = n_vertices();
    for (auto& t : triangles_) {
        for (int v : t.v)
            if (v < 0 || v >= nv) throw MeshError("triangle vertex index out of range");
        if (t.v[0] == t.v[1] || t.v[1] == t.v[2] || t.v[0] == t.v[2])
            throw MeshError("triangle with repeated vertex");
        const double a = signed_area(vertex_point(t.v[0]), vertex_point(t.v[1]), vertex_point(t.v[2]));
        if (a == 0.0) throw MeshError("degenerate (zero-area) triangle");
        // Swapping v0,v1 keeps the refinement edge {v0,v1} and restores CCW.
        if (a < 0.0) std::swap(t.v[0], t.v[1]);
    }

    vertex_tris_.assign(nv, {});
    for (int t = 0; t < n_triangles(); ++t)
        for (int v : triangles_[t].v) vertex_tris_[v].push_back(t);

    std::unordered_map<EdgeKey, int> edge_count;
    std::unordered_map<EdgeKey, std::pair<std::array<int, 2>, int>> edge_dir;  // oriented edge + tri
    edge_count.reserve(3 * triangles_.size());
    for (int t = 0; t < n_triangles(); ++t) {
        const auto& v = triangles_[t].v;
        for (int e = 0; e < 3; ++e) {
            const int a = v[e], b = v[(e + 1) % 3];
            auto [it, fresh] = edge_count.try_emplace(edge_key(a, b), 0);
            ++it->second;
            if (fresh) edge_dir[edge_key(a, b)] = {{a, b}, t};
        }
    }

    boundary_edges_.clear();
    for (auto& [key, cnt] : edge_count) {
        if (cnt == 1) {
            const auto& [ab, t] = edge_dir[key];
            boundary_edges_.push_back({ab[0], ab[1], t});
        } else if (cnt != 2) {
            throw MeshError("non-conforming mesh: edge shared by more than two triangles");
        }
    }
    std::sort(boundary_edges_.begin(), boundary_edges_.end(),
              [](const BoundaryEdge& l, const BoundaryEdge& r) {
                  return std::tie(l.a, l.b) < std::tie(r.a, r.b);
              });

    for (auto& v : vertices_) v.on_boundary = false;
    for (const auto& e : boundary_edges_) {
        vertices_[e.a].on_boundary = true;
        vertices_[e.b].on_boundary = true;
    }

    interior_vertices_.clear();
    dof_of_vertex_.assign(nv, -1);
    for (int v = 0; v < nv; ++v) {
        if (!vertices_[v].on_boundary) {
            dof_of_vertex_[v] = static_cast<int>(interior_vertices_.size());
            interior_vertices_.push_back(v);
        }
    }
}

std::array<Point, 3> Mesh::corners(int t) const {
    const auto& v = triangles_[t].v;
    return {vertex_point(v[0]), vertex_point(v[1]), vertex_point(v[2])};
}

Point Mesh::barycenter(int t) const {
    const auto c = corners(t);
    return {(c[0].x + c[1].x + c[2].x) / 3.0, (c[0].y + c[1].y + c[2].y) / 3.0};
}

double Mesh::area(int t) const {
    const auto c = corners(t);
    const double a = signed_area(c[0], c[1], c[2]);
    if (a <= 0.0) throw MeshError("degenerate triangle in area()");
    return a;
}

double Mesh::mesh_size(int t) const { return std::sqrt(area(t)); }

double Mesh::skeleton_distance(Point x, int t) const {
    const auto c = corners(t);
    if (!point_in_triangle(x, c[0], c[1], c[2], 1e-9))
        throw MeshError("skeleton_distance: point outside element");
    double d = segment_distance(x, c[0], c[1]);
    d = std::min(d, segment_distance(x, c[1], c[2]));
    d = std::min(d, segment_distance(x, c[2], c[0]));
    return d;
}

std::vector<int> Mesh::patch(int t, int k) const {
    if (k < 1) throw MeshError("patch order must be >= 1");
    std::set<int> current{t};
    for (int iter = 0; iter < k; ++iter) {
        std::set<int> verts;
        for (int tt : current)
            for (int v : triangles_[tt].v) verts.insert(v);
        std::set<int> next = current;
        for (int v : verts)
            for (int tt : vertex_tris_[v]) next.insert(tt);
        current = std::move(next);
    }
    return {current.begin(), current.end()};
}

int Mesh::shared_vertex_count(int t1, int t2) const {
    int n = 0;
    for (int a : triangles_[t1].v)
        for (int b : triangles_[t2].v)
            if (a == b) ++n;
    return n;
}

double Mesh::diameter() const {
    // All farthest pairs lie on the boundary.
    std::vector<int> bv;
    for (int v = 0; v < n_vertices(); ++v)
        if (vertices_[v].on_boundary) bv.push_back(v);
    double d = 0.0;
    for (size_t i = 0; i < bv.size(); ++i)
        for (size_t j = i + 1; j < bv.size(); ++j)
            d = std::max(d, distance(vertex_point(bv[i]), vertex_point(bv[j])));
    return d;
}

void Mesh::validate() const {
    std::unordered_map<EdgeKey, int> edge_count;
    for (const auto& t : triangles_) {
        const double a =
            signed_area(vertex_point(t.v[0]), vertex_point(t.v[1]), vertex_point(t.v[2]));
        if (a <= 0.0) throw MeshError("validate: non-positive triangle area");
        for (int e = 0; e < 3; ++e)
            ++edge_count[edge_key(t.v[e], t.v[(e + 1) % 3])];
    }
    std::vector<bool> on_bdry(n_vertices(), false);
    for (const auto& t : triangles_) {
        for (int e = 0; e < 3; ++e) {
            const int a = t.v[e], b = t.v[(e + 1) % 3];
            const int cnt = edge_count[edge_key(a, b)];
            if (cnt != 1 && cnt != 2) throw MeshError("validate: hanging node (bad edge count)");
            if (cnt == 1) on_bdry[a] = on_bdry[b] = true;
        }
    }
    for (int v = 0; v < n_vertices(); ++v)
        if (vertices_[v].on_boundary != on_bdry[v])
            throw MeshError("validate: inconsistent boundary flag");
}

namespace {

// Rotate each triangle so its longest edge (ties: smallest sorted vertex pair)
// lands on (v0,v1). Used only for initial meshes; refined meshes inherit
// refinement edges from the bisection rule.
void label_longest_edges(const std::vector<Vertex>& vertices, std::vector<Triangle>& tris) {
    for (auto& t : tris) {
        // ensure CCW first so that cyclic rotation preserves orientation
        const Point p0{vertices[t.v[0]].x, vertices[t.v[0]].y};
        const Point p1{vertices[t.v[1]].x, vertices[t.v[1]].y};
        const Point p2{vertices[t.v[2]].x, vertices[t.v[2]].y};
        if (signed_area(p0, p1, p2) < 0.0) std::swap(t.v[1], t.v[2]);
        int best = 0;
        double best_len = -1.0;
        std::pair<int, int> best_pair{0, 0};
        for (int e = 0; e < 3; ++e) {
            const int a = t.v[e], b = t.v[(e + 1) % 3];
            const Point pa{vertices[a].x, vertices[a].y};
            const Point pb{vertices[b].x, vertices[b].y};
            const double len = distance(pa, pb);
            std::pair<int, int> key{std::min(a, b), std::max(a, b)};
            if (len > best_len + 1e-14 * (1.0 + len) ||
                (std::abs(len - best_len) <= 1e-14 * (1.0 + len) && key < best_pair)) {
                best = e;
                best_len = len;
                best_pair = key;
            }
        }
        std::rotate(t.v.begin(), t.v.begin() + best, t.v.end());
    }
}

}  // namespace

Mesh Mesh::make_circle(int boundary_vertices) {
    if (boundary_vertices < 3) throw MeshError("circle mesh needs at least 3 boundary vertices");
    std::vector<Vertex> verts;
    verts.push_back({0.0, 0.0, false});
    for (int k = 0; k < boundary_vertices; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / boundary_vertices;
        verts.push_back({std::cos(phi), std::sin(phi), true});
    }
    std::vector<Triangle> tris;
    for (int k = 0; k < boundary_vertices; ++k) {
        const int a = 1 + k;
        const int b = 1 + (k + 1) % boundary_vertices;
        tris.push_back({{0, a, b}, 0});
    }
    label_longest_edges(verts, tris);
    return Mesh(Domain::circle, std::move(verts), std::move(tris));
}

Mesh Mesh::make_lshape() {
    // (-1,1)^2 \ [0,1)^2 as three unit squares, each split criss-cross.
    std::vector<Vertex> verts;
    std::vector<Triangle> tris;
    std::map<std::pair<long long, long long>, int> index;
    auto vid = [&](double x, double y) {
        auto key = std::make_pair(std::llround(x * 4), std::llround(y * 4));
        auto it = index.find(key);
        if (it != index.end()) return it->second;
        const int id = static_cast<int>(verts.size());
        verts.push_back({x, y, false});
        index[key] = id;
        return id;
    };
    auto add_square = [&](double x0, double y0) {
        const int c00 = vid(x0, y0), c10 = vid(x0 + 1, y0);
        const int c11 = vid(x0 + 1, y0 + 1), c01 = vid(x0, y0 + 1);
        const int cc = vid(x0 + 0.5, y0 + 0.5);
        tris.push_back({{c00, c10, cc}, 0});
        tris.push_back({{c10, c11, cc}, 0});
        tris.push_back({{c11, c01, cc}, 0});
        tris.push_back({{c01, c00, cc}, 0});
    };
    add_square(-1.0, -1.0);
    add_square(0.0, -1.0);
    add_square(-1.0, 0.0);
    label_longest_edges(verts, tris);
    return Mesh(Domain::lshape, std::move(verts), std::move(tris));
}

Mesh Mesh::make_square() {
    std::vector<Vertex> verts = {
        {0, 0, false}, {1, 0, false}, {1, 1, false}, {0, 1, false}, {0.5, 0.5, false}};
    std::vector<Triangle> tris = {
        {{0, 1, 4}, 0}, {{1, 2, 4}, 0}, {{2, 3, 4}, 0}, {{3, 0, 4}, 0}};
    label_longest_edges(verts, tris);
    return Mesh(Domain::square, std::move(verts), std::move(tris));
}

RefineResult nvb_refine(const Mesh& mesh, const std::vector<int>& marked) {
    for (int t : marked)
        if (t < 0 || t >= mesh.n_triangles()) throw MeshError("nvb_refine: marked index out of range");

    // Step 1: mark the refinement edge of every marked triangle.
    std::set<EdgeKey> marked_edges;
    for (int t : marked) {
        const auto& v = mesh.triangle(t).v;
        marked_edges.insert(edge_key(v[0], v[1]));
    }

    // Step 2: closure. Any triangle with a marked edge must also have its
    // refinement edge marked; iterate to a fixpoint (monotone, terminates).
    bool changed = !marked_edges.empty();
    while (changed) {
        changed = false;
        for (const auto& t : mesh.triangles()) {
            const EdgeKey ref = edge_key(t.v[0], t.v[1]);
            if (marked_edges.count(ref)) continue;
            if (marked_edges.count(edge_key(t.v[1], t.v[2])) ||
                marked_edges.count(edge_key(t.v[2], t.v[0]))) {
                marked_edges.insert(ref);
                changed = true;
            }
        }
    }

    std::set<EdgeKey> boundary;
    for (const auto& e : mesh.boundary_edges()) boundary.insert(edge_key(e.a, e.b));

    // Step 3: create midpoint vertices. Midpoints of circle boundary edges are
    // snapped radially onto the unit circle; interior vertices never move.
    std::vector<Vertex> new_verts(mesh.vertices());
    std::vector<std::array<int, 2>> vertex_parents(new_verts.size());
    for (int v = 0; v < mesh.n_vertices(); ++v) vertex_parents[v] = {v, -1};
    std::unordered_map<EdgeKey, int> midpoint;
    for (EdgeKey key : marked_edges) {
        const int a = static_cast<int>(key >> 32);
        const int b = static_cast<int>(key & 0xffffffffu);
        Point m = 0.5 * (mesh.vertex_point(a) + mesh.vertex_point(b));
        if (mesh.domain() == Domain::circle && boundary.count(key)) {
            const double r = norm(m);
            if (r > 0.0) m = (1.0 / r) * m;
        }
        midpoint[key] = static_cast<int>(new_verts.size());
        new_verts.push_back({m.x, m.y, false});
        vertex_parents.push_back({a, b});
    }

    // Step 4: bisect. Children of (a,b,c) with refinement edge (a,b) and
    // midpoint m are (c,a,m) and (b,c,m); recurse while a child's refinement
    // edge is marked (at most two extra levels).
    std::vector<Triangle> new_tris;
    std::vector<int> parent;
    auto emit = [&](auto&& self, Triangle tri, int parent_idx) -> void {
        const auto it = midpoint.find(edge_key(tri.v[0], tri.v[1]));
        if (it == midpoint.end()) {
            new_tris.push_back(tri);
            parent.push_back(parent_idx);
            return;
        }
        const int m = it->second;
        self(self, Triangle{{tri.v[2], tri.v[0], m}, tri.generation + 1}, parent_idx);
        self(self, Triangle{{tri.v[1], tri.v[2], m}, tri.generation + 1}, parent_idx);
    };
    for (int t = 0; t < mesh.n_triangles(); ++t) emit(emit, mesh.triangle(t), t);

    RefineResult out{Mesh(mesh.domain(), std::move(new_verts), std::move(new_tris)),
                     std::move(parent), std::move(vertex_parents)};
    return out;
}

RefineResult uniform_refine(const Mesh& mesh) {
    std::vector<int> all(mesh.n_triangles());
    for (int t = 0; t < mesh.n_triangles(); ++t) all[t] = t;
    return nvb_refine(mesh, all);
}

}  // namespace fraclap
