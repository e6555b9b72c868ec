#include "fraclap/solver.hpp"

#include <cmath>
#include <string>

namespace fraclap {

Point P1Function::gradient(const Mesh& mesh, int t) const {
    const auto c = mesh.corners(t);
    const auto& v = mesh.triangle(t).v;
    const double a2 = 2.0 * mesh.area(t);
    // grad of barycentric l_i is the rotated opposite edge over 2|T|
    Point g{0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
        const Point e = c[(i + 2) % 3] - c[(i + 1) % 3];
        const double u = vertex_value(mesh, v[i]);
        g.x += u * (-e.y) / a2;
        g.y += u * e.x / a2;
    }
    return g;
}

P1Function solve(const StiffnessMatrix& A, const Eigen::VectorXd& F) {
    if (A.A.rows() != F.size()) throw SolverError("solve: dimension mismatch");
    P1Function u;
    if (F.size() == 0) {
        u.coeffs = Eigen::VectorXd();
        return u;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(A.A);
    if (llt.info() != Eigen::Success) {
        double min_pivot = 1e300;
        // report smallest diagonal pivot of the partial factorization
        const Eigen::MatrixXd& L = llt.matrixLLT();
        for (int i = 0; i < L.rows(); ++i) min_pivot = std::min(min_pivot, L(i, i));
        throw SolverError("solve: matrix not SPD (smallest Cholesky pivot " +
                          std::to_string(min_pivot) + ")");
    }
    u.coeffs = llt.solve(F);
    const double fn = F.norm();
    if (fn > 0.0) {
        const double res = (A.A * u.coeffs - F).norm() / fn;
        if (res > 1e-10) {
            u.coeffs = llt.solve(F - A.A * u.coeffs) + u.coeffs;  // one refinement step
            if ((A.A * u.coeffs - F).norm() / fn > 1e-10)
                throw SolverError("solve: direct solve residual above tolerance");
        }
    }
    return u;
}

double discrete_energy(const Eigen::VectorXd& F, const P1Function& u) {
    if (F.size() != u.coeffs.size()) throw SolverError("discrete_energy: dimension mismatch");
    return F.dot(u.coeffs);
}

double energy_error(double exact_energy, const Eigen::VectorXd& F, const P1Function& u) {
    const double diff = exact_energy - discrete_energy(F, u);
    const double slack = 1e-12 * std::max(1.0, std::abs(exact_energy));
    if (diff < -slack)
        throw SolverError("energy_error: discrete energy exceeds the reference energy");
    return std::sqrt(std::max(0.0, diff));
}

Eigen::MatrixXd prolongation(const Mesh& coarse, const Mesh& fine, const RefineResult& step) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(fine.n_dofs(), coarse.n_dofs());
    for (int v = 0; v < fine.n_vertices(); ++v) {
        const int row = fine.dof_of_vertex(v);
        if (row < 0) continue;
        const auto& par = step.vertex_parents[v];
        if (par[1] < 0) {
            const int dof = coarse.dof_of_vertex(par[0]);
            if (dof >= 0) P(row, dof) = 1.0;
        } else {
            for (int k = 0; k < 2; ++k) {
                const int dof = coarse.dof_of_vertex(par[k]);
                if (dof >= 0) P(row, dof) += 0.5;
            }
        }
    }
    return P;
}

}  // namespace fraclap
