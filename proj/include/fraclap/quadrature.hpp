#ifndef FRACLAP_QUADRATURE_HPP
#define FRACLAP_QUADRATURE_HPP

#include <array>
#include <stdexcept>
#include <vector>

#include "fraclap/geometry.hpp"

namespace fraclap {

struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// 1D rule on [0,1]; weights sum to the interval length.
struct Rule1D {
    std::vector<double> nodes;
    std::vector<double> weights;
    int size() const { return static_cast<int>(nodes.size()); }
};

// Gauss-Legendre on [0,1], exact for polynomials of degree <= 2n-1.
Rule1D gauss_legendre(int n);

// Composite rule on [0,1]^2 whose per-coordinate subintervals shrink
// geometrically towards both endpoints. The cells touching an endpoint use a
// power-law substitution sized for integrands that blow up like
// dist^{singular_exponent} at the endpoints; the other cells place Gauss
// points in logarithmic coordinates.
struct GradedRuleSquare {
    int layers = 1;
    double ratio = 0.5;
    int order = 4;
    double singular_exponent = -0.5;
    Rule1D line;  // per-coordinate composite rule, layers*order points
    std::vector<double> x, y, w;  // tensor nodes/weights on [0,1]^2
    int size() const { return static_cast<int>(w.size()); }
};

GradedRuleSquare graded_square_rule(int layers, double ratio, int order,
                                    double singular_exponent = -0.5);

// Rule on the reference triangle in barycentric coordinates; weights are
// positive and sum to one (the physical integral is |T| * sum w_i f(x_i)).
struct RuleTriangle {
    std::vector<std::array<double, 3>> bary;
    std::vector<double> weights;
    int size() const { return static_cast<int>(weights.size()); }

    Point map(int i, const std::array<Point, 3>& c) const {
        return {bary[i][0] * c[0].x + bary[i][1] * c[1].x + bary[i][2] * c[2].x,
                bary[i][0] * c[0].y + bary[i][1] * c[1].y + bary[i][2] * c[2].y};
    }

    template <class F>
    double integrate(const F& f, const std::array<Point, 3>& c) const {
        const double area = std::abs(signed_area(c[0], c[1], c[2]));
        double acc = 0.0;
        for (int i = 0; i < size(); ++i) acc += weights[i] * f(map(i, c));
        return area * acc;
    }
};

// Duffy collapse of a graded square rule onto the triangle; the square's four
// graded edges cover the triangle's three edges plus the collapsed vertex.
RuleTriangle duffy_to_triangle(const GradedRuleSquare& rule, const std::array<Point, 3>& tri);

// Plain tensor-Gauss triangle rule via the Duffy map (n^2 interior nodes).
RuleTriangle plain_triangle_rule(int n);

// Regularized 4D rules for the singular double integrals over pairs of
// elements. Nodes are pairs of barycentric coordinates with respect to vertex
// orders in which shared vertices come first in both triangles; the physical
// integral is 4*|T1|*|T2| * sum w_i f(x_i, y_i).
enum class PairKind { identical, edge, vertex, disjoint };

struct PairRule {
    PairKind kind = PairKind::disjoint;
    // (a1, a2) barycentric weights of vertices 1,2 in the first triangle
    // (a0 = 1-a1-a2), then (b1, b2) for the second.
    std::vector<std::array<double, 4>> nodes;
    std::vector<double> weights;
    int size() const { return static_cast<int>(weights.size()); }
};

// Rule for a pair with the given adjacency; `s` is the fractional order and
// controls the strength of the radial power substitutions that remove the
// |x-y|^{-2-2s} singularity for the touching kinds.
PairRule pair_rule(PairKind kind, int order, double s);

// Process-wide cache keyed by (kind, order, s).
const PairRule& cached_pair_rule(PairKind kind, int order, double s);

// 1D rule on [0,1] for edge integrands with a near-singularity of width
// d_rel (relative to the edge length) around parameter t0: geometric cells
// refined towards t0 on both sides, Gauss of the given order per cell.
Rule1D near_peak_line_rule(double t0, double d_rel, int order, int max_layers = 24);

}  // namespace fraclap

#endif
