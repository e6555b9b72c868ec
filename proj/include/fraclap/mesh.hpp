#ifndef FRACLAP_MESH_HPP
#define FRACLAP_MESH_HPP

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "fraclap/geometry.hpp"

namespace fraclap {

enum class Domain { circle, lshape, square };

std::string domain_name(Domain d);
Domain domain_from_name(const std::string& name);

struct Vertex {
    double x = 0.0;
    double y = 0.0;
    bool on_boundary = false;
};

// Vertex order convention: the refinement edge is (v[0], v[1]) and the newest
// vertex sits at v[2]. Orientation is counter-clockwise.
struct Triangle {
    std::array<int, 3> v{};
    int generation = 0;
};

struct MeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Mesh {
public:
    Mesh() = default;
    // Takes raw vertex/triangle data; orients triangles CCW, builds adjacency,
    // recomputes boundary flags and the interior dof numbering.
    Mesh(Domain domain, std::vector<Vertex> vertices, std::vector<Triangle> triangles);

    static Mesh make_circle(int boundary_vertices = 16);
    static Mesh make_lshape();
    static Mesh make_square();  // criss-cross unit square, one interior vertex

    Domain domain() const { return domain_; }
    int n_vertices() const { return static_cast<int>(vertices_.size()); }
    int n_triangles() const { return static_cast<int>(triangles_.size()); }
    const Vertex& vertex(int i) const { return vertices_[i]; }
    const Triangle& triangle(int t) const { return triangles_[t]; }
    const std::vector<Vertex>& vertices() const { return vertices_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }

    Point vertex_point(int i) const { return {vertices_[i].x, vertices_[i].y}; }
    std::array<Point, 3> corners(int t) const;
    Point barycenter(int t) const;

    double area(int t) const;
    double mesh_size(int t) const;  // h = |T|^{1/2}

    // Distance from x to the boundary of element t. Element interiors are
    // disjoint, so for x inside t no other element boundary can be closer and
    // this value equals the global skeleton distance at x.
    double skeleton_distance(Point x, int t) const;

    // k-th order patch: t plus all elements whose closure touches the closure
    // of the (k-1)-st patch. Indices sorted ascending.
    std::vector<int> patch(int t, int k = 1) const;

    // Interior (dof-carrying) vertices and their numbering.
    const std::vector<int>& interior_vertices() const { return interior_vertices_; }
    int n_dofs() const { return static_cast<int>(interior_vertices_.size()); }
    int dof_of_vertex(int v) const { return dof_of_vertex_[v]; }  // -1 on boundary

    // Adjacency queries.
    const std::vector<int>& triangles_of_vertex(int v) const { return vertex_tris_[v]; }
    int shared_vertex_count(int t1, int t2) const;
    // Boundary edges as vertex index pairs, ordered CCW along the boundary of
    // each triangle they belong to (outward normal on the right).
    struct BoundaryEdge {
        int a, b;      // vertex indices; (a,b) oriented so that the domain is on the left
        int tri;       // owning triangle
    };
    const std::vector<BoundaryEdge>& boundary_edges() const { return boundary_edges_; }

    double diameter() const;  // diameter of the vertex set

    // Full conformity audit: every edge has one or two incident triangles,
    // areas positive, boundary flags consistent. Throws MeshError on failure.
    void validate() const;

private:
    void finalize();

    Domain domain_ = Domain::circle;
    std::vector<Vertex> vertices_;
    std::vector<Triangle> triangles_;

    std::vector<std::vector<int>> vertex_tris_;
    std::vector<int> interior_vertices_;
    std::vector<int> dof_of_vertex_;
    std::vector<BoundaryEdge> boundary_edges_;

    friend struct MeshBuilder;
};

struct RefineResult {
    Mesh mesh;
    // parent[t] = index of the level-parent triangle in the input mesh.
    std::vector<int> parent;
    // vertex_parents[v] = {a,b}: v is the midpoint of input vertices a,b
    // (possibly snapped); for carried-over vertices {v,-1}.
    std::vector<std::array<int, 2>> vertex_parents;
};

// Newest-vertex bisection of all marked triangles plus conforming closure.
// On circle domains, new boundary-edge midpoints are snapped radially to the
// unit circle.
RefineResult nvb_refine(const Mesh& mesh, const std::vector<int>& marked);

// One NVB sweep with every triangle marked.
RefineResult uniform_refine(const Mesh& mesh);

}  // namespace fraclap

#endif
