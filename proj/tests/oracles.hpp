#ifndef FRACLAP_TEST_ORACLES_HPP
#define FRACLAP_TEST_ORACLES_HPP

// Independent brute-force integrators used as ground truth in tests. These
// deliberately avoid the production quadrature machinery.

#include <array>
#include <functional>

#include "fraclap/geometry.hpp"

namespace fraclap::oracles {

// Adaptive integration over a triangle by recursive 4-way uniform subdivision
// with Richardson stopping. Handles integrands that are singular along the
// triangle boundary (integrable singularities).
double integrate_triangle_adaptive(const std::function<double(Point)>& f,
                                   const std::array<Point, 3>& tri, double rel_tol,
                                   int max_depth = 18);

// Integral of H(x - y) over T1 x T2 for a pure-difference integrand, computed
// from the geometric cross-correlation area(T1 cap (T2 + z)) in polar
// coordinates with adaptive radial/angular refinement.
double pair_integral_correlation(const std::function<double(Point)>& H,
                                 const std::array<Point, 3>& t1,
                                 const std::array<Point, 3>& t2, double rel_tol);

// Same integral by uniform subdivision of both triangles with tensor Gauss on
// every sub-pair and Richardson extrapolation in the subdivision level, with
// convergence rate h^{2-2s} of the near-diagonal error.
double pair_integral_subdivision(const std::function<double(Point, Point)>& f,
                                 const std::array<Point, 3>& t1,
                                 const std::array<Point, 3>& t2, double s, int max_level = 5);

}  // namespace fraclap::oracles

#endif
