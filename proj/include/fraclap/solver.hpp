#ifndef FRACLAP_SOLVER_HPP
#define FRACLAP_SOLVER_HPP

#include <Eigen/Dense>
#include <stdexcept>

#include "fraclap/assembly.hpp"
#include "fraclap/mesh.hpp"

namespace fraclap {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Piecewise-linear function on a mesh level: one coefficient per interior
// vertex, zero on boundary vertices by convention.
struct P1Function {
    int level = 0;
    Eigen::VectorXd coeffs;

    double vertex_value(const Mesh& mesh, int vertex) const {
        const int dof = mesh.dof_of_vertex(vertex);
        return dof < 0 ? 0.0 : coeffs(dof);
    }

    // value at barycentric coordinates inside element t
    double value(const Mesh& mesh, int t, const std::array<double, 3>& bary) const {
        const auto& v = mesh.triangle(t).v;
        return bary[0] * vertex_value(mesh, v[0]) + bary[1] * vertex_value(mesh, v[1]) +
               bary[2] * vertex_value(mesh, v[2]);
    }

    Point gradient(const Mesh& mesh, int t) const;
};

// Direct dense Cholesky solve; throws with the failing pivot if A is not SPD.
P1Function solve(const StiffnessMatrix& A, const Eigen::VectorXd& F);

// <f, u_l> = F . U = a(u_l, u_l) by the Galerkin identity.
double discrete_energy(const Eigen::VectorXd& F, const P1Function& u);

// sqrt(exact_energy - F.U); tiny negative differences are clipped, genuine
// ones signal an inconsistent reference energy.
double energy_error(double exact_energy, const Eigen::VectorXd& F, const P1Function& u);

// Coarse-to-fine P1 interpolation matrix for a refinement step (used by the
// Galerkin-orthogonality tests).
Eigen::MatrixXd prolongation(const Mesh& coarse, const Mesh& fine, const RefineResult& step);

}  // namespace fraclap

#endif
