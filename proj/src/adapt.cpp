#include "fraclap/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace fraclap {

MarkingResult doerfler_mark(const IndicatorSet& ind, double theta) {
    if (ind.eta_sq.empty()) throw AdaptError("doerfler_mark: empty indicator set");
    if (!(theta > 0.0 && theta <= 1.0)) throw AdaptError("doerfler_mark: theta must be in (0,1]");
    const int n = static_cast<int>(ind.eta_sq.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (ind.eta_sq[a] != ind.eta_sq[b]) return ind.eta_sq[a] > ind.eta_sq[b];
        return a < b;
    });
    const double total = ind.total_sq();
    MarkingResult out;
    if (total == 0.0) return out;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
        if (acc >= theta * total && !out.marked.empty()) break;
        if (ind.eta_sq[order[k]] == 0.0) break;  // theta = 1: everything positive
        out.marked.push_back(order[k]);
        acc += ind.eta_sq[order[k]];
        if (acc >= theta * total) break;
    }
    out.achieved_fraction = acc / total;
    std::sort(out.marked.begin(), out.marked.end());
    return out;
}

AdaptiveRun adaptive_loop(const ProblemSpec& problem, double s, double theta, StopRule stop,
                          const AssemblyConfig& acfg, const EstimatorConfig& ecfg,
                          const std::function<void(const AdaptRecord&)>& on_level) {
    if (!(theta > 0.0 && theta <= 1.0)) throw AdaptError("adaptive_loop: theta must be in (0,1]");
    using clock = std::chrono::steady_clock;
    auto seconds = [](clock::time_point a, clock::time_point b) {
        return std::chrono::duration<double>(b - a).count();
    };

    AdaptiveRun run;
    Mesh mesh = problem.make_initial_mesh();
    for (int level = 0; level < stop.max_levels; ++level) {
        const auto t0 = clock::now();
        const StiffnessMatrix A = assemble_stiffness(mesh, s, acfg);
        const Eigen::VectorXd F = assemble_load(mesh, problem.f, problem.discontinuities);
        const P1Function u = solve(A, F);
        const auto t1 = clock::now();
        const IndicatorSet ind = estimate(mesh, u, problem.f, s, ecfg, problem.discontinuities);
        const auto t2 = clock::now();

        AdaptRecord rec;
        rec.level = level;
        rec.n_elements = mesh.n_triangles();
        rec.n_dofs = mesh.n_dofs();
        rec.eta = ind.total();
        rec.energy = discrete_energy(F, u);
        if (problem.exact_energy)
            rec.error = energy_error(*problem.exact_energy, F, u);
        rec.t_solve = seconds(t0, t1);
        rec.t_estimate = seconds(t1, t2);
        run.records.push_back(rec);
        if (on_level) on_level(rec);

        const bool last = level + 1 >= stop.max_levels || mesh.n_dofs() >= stop.max_dofs;
        if (last) {
            run.final_mesh = mesh;
            run.final_u = u;
            run.final_indicators = ind;
            break;
        }
        const MarkingResult marking = doerfler_mark(ind, theta);
        if (marking.marked.empty()) {
            run.final_mesh = mesh;
            run.final_u = u;
            run.final_indicators = ind;
            break;
        }
        mesh = nvb_refine(mesh, marking.marked).mesh;
    }
    return run;
}

double fit_rate(const std::vector<AdaptRecord>& records, RateField field, int window) {
    if (window < 3) throw AdaptError("fit_rate: window must cover at least 3 levels");
    if (static_cast<int>(records.size()) < window)
        throw AdaptError("fit_rate: not enough levels");
    std::vector<double> xs, ys;
    for (size_t k = records.size() - window; k < records.size(); ++k) {
        const double v = field == RateField::eta ? records[k].eta : records[k].error;
        if (!(v > 0.0) || records[k].n_dofs <= 0)
            throw AdaptError("fit_rate: nonpositive value in window");
        xs.push_back(std::log(static_cast<double>(records[k].n_dofs)));
        ys.push_back(std::log(v));
    }
    const int n = static_cast<int>(xs.size());
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0) throw AdaptError("fit_rate: degenerate dof sequence");
    return sxy / sxx;
}

double extrapolate_energy(const std::vector<AdaptRecord>& records) {
    if (records.size() < 4) throw AdaptError("extrapolate_energy: need at least 4 levels");
    const size_t window = std::min<size_t>(5, records.size());
    std::vector<double> N, E;
    for (size_t k = records.size() - window; k < records.size(); ++k) {
        N.push_back(static_cast<double>(records[k].n_dofs));
        E.push_back(records[k].energy);
    }
    for (size_t k = 1; k < E.size(); ++k)
        if (!(E[k] >= E[k - 1] - 1e-12 * std::abs(E[k])))
            throw AdaptError("extrapolate_energy: energies not monotone");

    // separable fit: for fixed alpha, (E_inf, c) solve a 2x2 linear LS in
    // E = E_inf - c N^{-alpha}; golden-section search on alpha
    auto sse = [&](double alpha, double* e_inf_out) {
        double s1 = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
        const int n = static_cast<int>(N.size());
        for (int i = 0; i < n; ++i) {
            const double x = std::pow(N[i], -alpha);
            s1 += 1.0;
            sx += x;
            sy += E[i];
            sxx += x * x;
            sxy += x * E[i];
        }
        const double det = s1 * sxx - sx * sx;
        const double e_inf = (sxx * sy - sx * sxy) / det;
        const double c = (s1 * sxy - sx * sy) / det * -1.0;
        if (e_inf_out) *e_inf_out = e_inf;
        double acc = 0;
        for (int i = 0; i < n; ++i) {
            const double r = E[i] - (e_inf - c * std::pow(N[i], -alpha));
            acc += r * r;
        }
        return acc;
    };

    double lo = 0.05, hi = 2.5;
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
    double fa = sse(a, nullptr), fb = sse(b, nullptr);
    for (int it = 0; it < 200; ++it) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - gr * (hi - lo);
            fa = sse(a, nullptr);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + gr * (hi - lo);
            fb = sse(b, nullptr);
        }
        if (hi - lo < 1e-10) break;
    }
    double e_inf = 0.0;
    sse(0.5 * (lo + hi), &e_inf);
    return e_inf;
}

}  // namespace fraclap
