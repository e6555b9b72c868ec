#ifndef FRACLAP_ASSEMBLY_HPP
#define FRACLAP_ASSEMBLY_HPP

#include <Eigen/Dense>
#include <stdexcept>

#include "fraclap/mesh.hpp"
#include "fraclap/problems.hpp"
#include "fraclap/quadrature.hpp"

namespace fraclap {

struct AssemblyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AssemblyConfig {
    int pair_order = 5;       // touching pairs, per coordinate direction
    int identical_order = 6;  // identical pairs
    // Disjoint pairs use tensor Gauss with the order picked per pair from the
    // distance/size ratio; `disjoint_order` caps the near tier.
    int disjoint_order = 5;
    // Complement term quadrature.
    int kappa_layers = 5;
    double kappa_ratio = 0.3;
    int kappa_order = 4;
    int boundary_edge_order = 6;  // kappa boundary-integral order per edge
    // Truncation radius R = radius_factor * diam(domain). Retained from the
    // truncated-complement formulation for interface compatibility; the
    // complement weight itself is evaluated in exact boundary-integral form.
    double radius_factor = 4.0;
    bool include_complement = true;  // disabled only by diagnostic tests
    int threads = 1;

    double order_scale = 1.0;  // scales all orders/layers, for convergence audits
};

struct StiffnessMatrix {
    Eigen::MatrixXd A;  // interior-dof by interior-dof, symmetric positive definite
    double s = 0.5;
    double cds = 0.0;  // normalization constant C(d,s)
};

// C(d,s) = -2^{2s} Gamma(s+d/2) / (pi^{d/2} Gamma(-s)); positive for
// 0 < s < 1. d=2 in production, d=1 supported for cross-checks.
double normalization_constant(int d, double s);

// kappa(x) = int_{Omega^c} |x-y|^{-2-2s} dy for x strictly inside Omega,
// evaluated exactly as the boundary integral
//   (1/2s) \oint_{dOmega} (y-x).n_y / |y-x|^{2+2s} dl(y)
// (divergence theorem applied to the decaying field (y-x)|y-x|^{-2-2s}).
// R must satisfy R >= 2 diam(Omega) as in the truncated formulation.
double complement_weight(Point x, const Mesh& mesh, double s, double R);

StiffnessMatrix assemble_stiffness(const Mesh& mesh, double s,
                                   const AssemblyConfig& cfg = {});

// Load vector over interior dofs; elements straddling a registered
// discontinuity line are clipped into sub-polygons and integrated piecewise.
Eigen::VectorXd assemble_load(const Mesh& mesh, const Rhs& f,
                              const std::vector<DiscontinuityLine>& lines = {});

}  // namespace fraclap

#endif
