#ifndef FRACLAP_PROBLEMS_HPP
#define FRACLAP_PROBLEMS_HPP

#include <optional>
#include <string>
#include <vector>

#include "fraclap/mesh.hpp"

namespace fraclap {

struct Rhs {
    enum class Kind { constant, halfplane_indicator };
    Kind kind = Kind::constant;
    double value = 1.0;  // constant value; for the indicator, the value on {x > 0}

    double operator()(Point p) const {
        return kind == Kind::constant ? value : (p.x > 0.0 ? value : 0.0);
    }
};

// f jumps across the line {n . (p - point) = 0}; elements straddling it are
// clipped during integration.
struct DiscontinuityLine {
    Point point;
    Point normal;
};

struct ProblemSpec {
    std::string name;
    Domain domain = Domain::circle;
    Rhs f;
    std::optional<double> exact_energy;  // present iff analytically known
    std::vector<DiscontinuityLine> discontinuities;
    int initial_boundary_vertices = 16;

    Mesh make_initial_mesh() const;
};

// Unit circle, f = 2^{2s} Gamma(1+s)^2, exact solution (1-|x|^2)_+^s with
// energy 2^{2s} Gamma(1+s)^2 * 2 pi / (2s+2).
ProblemSpec example1(double s);

// L-shape (-1,1)^2 \ [0,1)^2 with f = 1; reference energy extrapolated.
ProblemSpec example2();

// Unit circle with f = chi_{x>0}; reference energy extrapolated.
ProblemSpec example3();

// CLI names: circle-const | lshape | circle-disc.
ProblemSpec problem_by_name(const std::string& name, double s);

}  // namespace fraclap

#endif
