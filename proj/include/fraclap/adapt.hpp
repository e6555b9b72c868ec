#ifndef FRACLAP_ADAPT_HPP
#define FRACLAP_ADAPT_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fraclap/assembly.hpp"
#include "fraclap/estimator.hpp"
#include "fraclap/mesh.hpp"
#include "fraclap/problems.hpp"
#include "fraclap/solver.hpp"

namespace fraclap {

struct AdaptError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One row per adaptive level (the quantities of the convergence plots).
struct AdaptRecord {
    int level = 0;
    int n_elements = 0;
    int n_dofs = 0;
    double eta = 0.0;
    double error = std::numeric_limits<double>::quiet_NaN();  // if reference known
    double energy = 0.0;
    double t_solve = 0.0;     // assembly + factorization, seconds
    double t_estimate = 0.0;  // estimator, seconds
};

struct MarkingResult {
    std::vector<int> marked;    // minimal-cardinality set, deterministic order
    double achieved_fraction = 0.0;
};

// Bulk criterion: smallest set with sum of marked eta^2 >= theta * total.
// Ties between equal indicators are broken by element index.
MarkingResult doerfler_mark(const IndicatorSet& ind, double theta);

struct StopRule {
    int max_dofs = 10000;
    int max_levels = 25;
};

struct AdaptiveRun {
    std::vector<AdaptRecord> records;
    Mesh final_mesh;
    P1Function final_u;
    IndicatorSet final_indicators;
};

// SOLVE -- ESTIMATE -- MARK -- REFINE.  theta = 1 marks every element with a
// positive indicator (uniform refinement).
AdaptiveRun adaptive_loop(const ProblemSpec& problem, double s, double theta, StopRule stop,
                          const AssemblyConfig& acfg = {}, const EstimatorConfig& ecfg = {},
                          const std::function<void(const AdaptRecord&)>& on_level = {});

// Least-squares slope of log(field) against log(N) over the last `window`
// levels; field values must be positive.
enum class RateField { eta, error };
double fit_rate(const std::vector<AdaptRecord>& records, RateField field, int window);

// Fit E_l = E_inf - c N^{-alpha} over the last five levels (alpha free) and
// return E_inf. Requires at least 4 levels with increasing energies.
double extrapolate_energy(const std::vector<AdaptRecord>& records);

}  // namespace fraclap

#endif
