#ifndef FRACLAP_CLI_HPP
#define FRACLAP_CLI_HPP

#include <string>
#include <vector>

namespace fraclap {

// Full configuration of one adaptive run; serializes round-trip stable to
// JSON for the run manifest.
struct RunConfig {
    std::string problem = "circle-const";
    double s = 0.5;
    double theta = 0.5;
    int max_dofs = 10000;
    int max_levels = 25;
    double radius_factor = 4.0;  // truncation radius R = factor * diam(domain)
    int quad_order = 4;          // estimator quadrature order
    int quad_layers = 8;         // estimator grading layers
    double quad_ratio = 0.3;     // estimator grading ratio
    int threads = 0;             // 0 = hardware parallelism
    std::string out_dir;         // empty: FRACLAP_OUT or "."
    bool plot = false;

    void validate() const;  // throws std::invalid_argument on bad ranges
    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
};

struct VerifyCheck {
    std::string name;
    double s = 0.0;
    bool pass = false;
    double value = 0.0;
    double tolerance = 0.0;
};

// The oracle/invariant suite behind `verify`: PV cancellation, boundary
// formula vs oracle, SPD/symmetry, marking minimality, indicator reduction,
// blow-up exponent.
std::vector<VerifyCheck> run_verification(bool full, int threads);

std::string verify_report_json(const std::vector<VerifyCheck>& checks);
std::vector<VerifyCheck> verify_report_from_json(const std::string& text);

// Entry point behind main(): returns the process exit code
// (0 ok, 1 numerical failure, 2 usage error).
int run_cli(int argc, const char* const* argv);

}  // namespace fraclap

#endif
