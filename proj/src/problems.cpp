#include "fraclap/problems.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fraclap {

Mesh ProblemSpec::make_initial_mesh() const {
    switch (domain) {
        case Domain::circle: return Mesh::make_circle(initial_boundary_vertices);
        case Domain::lshape: return Mesh::make_lshape();
        case Domain::square: return Mesh::make_square();
    }
    throw MeshError("unknown domain");
}

ProblemSpec example1(double s) {
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("example1: s must be in (0,1)");
    ProblemSpec p;
    p.name = "circle-const";
    p.domain = Domain::circle;
    const double g = std::tgamma(1.0 + s);
    p.f = {Rhs::Kind::constant, std::pow(2.0, 2.0 * s) * g * g};
    p.exact_energy = p.f.value * 2.0 * std::numbers::pi / (2.0 * s + 2.0);
    return p;
}

ProblemSpec example2() {
    ProblemSpec p;
    p.name = "lshape";
    p.domain = Domain::lshape;
    p.f = {Rhs::Kind::constant, 1.0};
    return p;
}

ProblemSpec example3() {
    ProblemSpec p;
    p.name = "circle-disc";
    p.domain = Domain::circle;
    p.f = {Rhs::Kind::halfplane_indicator, 1.0};
    p.discontinuities.push_back({{0.0, 0.0}, {1.0, 0.0}});
    return p;
}

ProblemSpec problem_by_name(const std::string& name, double s) {
    if (name == "circle-const") return example1(s);
    if (name == "lshape") return example2();
    if (name == "circle-disc") return example3();
    throw std::invalid_argument("unknown problem: " + name);
}

}  // namespace fraclap
