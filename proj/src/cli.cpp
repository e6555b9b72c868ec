#include "fraclap/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "json.hpp"

#include "fraclap/adapt.hpp"
#include "fraclap/io.hpp"
#include "fraclap/parallel.hpp"

namespace fraclap {

void RunConfig::validate() const {
    if (problem != "circle-const" && problem != "lshape" && problem != "circle-disc")
        throw std::invalid_argument("unknown problem: " + problem);
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("s must be in (0,1)");
    if (!(theta > 0.0 && theta <= 1.0)) throw std::invalid_argument("theta must be in (0,1]");
    if (max_dofs < 1 || max_levels < 1) throw std::invalid_argument("stopping budget must be positive");
    if (radius_factor < 2.0) throw std::invalid_argument("radius factor must be >= 2");
    if (quad_order < 1 || quad_layers < 1) throw std::invalid_argument("quadrature orders must be positive");
    if (!(quad_ratio > 0.0 && quad_ratio < 1.0))
        throw std::invalid_argument("quadrature grading ratio must be in (0,1)");
    if (threads < 0) throw std::invalid_argument("threads must be >= 0");
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["problem"] = problem;
    j["s"] = s;
    j["theta"] = theta;
    j["max_dofs"] = max_dofs;
    j["max_levels"] = max_levels;
    j["radius_factor"] = radius_factor;
    j["quad_order"] = quad_order;
    j["quad_layers"] = quad_layers;
    j["quad_ratio"] = quad_ratio;
    j["threads"] = threads;
    j["out_dir"] = out_dir;
    j["plot"] = plot;
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    RunConfig c;
    c.problem = j.at("problem").get<std::string>();
    c.s = j.at("s").get<double>();
    c.theta = j.at("theta").get<double>();
    c.max_dofs = j.at("max_dofs").get<int>();
    c.max_levels = j.at("max_levels").get<int>();
    c.radius_factor = j.at("radius_factor").get<double>();
    c.quad_order = j.at("quad_order").get<int>();
    c.quad_layers = j.at("quad_layers").get<int>();
    c.quad_ratio = j.at("quad_ratio").get<double>();
    c.threads = j.at("threads").get<int>();
    c.out_dir = j.at("out_dir").get<std::string>();
    c.plot = j.at("plot").get<bool>();
    return c;
}

namespace {

namespace fs = std::filesystem;

std::string resolve_out_dir(const RunConfig& cfg) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    if (const char* env = std::getenv("FRACLAP_OUT")) return env;
    return ".";
}

AssemblyConfig assembly_config(const RunConfig& cfg) {
    AssemblyConfig a;
    a.threads = resolve_threads(cfg.threads);
    a.radius_factor = cfg.radius_factor;
    return a;
}

EstimatorConfig estimator_config(const RunConfig& cfg) {
    EstimatorConfig e;
    e.layers = cfg.quad_layers;
    e.order = cfg.quad_order;
    e.ratio = cfg.quad_ratio;
    e.threads = resolve_threads(cfg.threads);
    return e;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << content;
}

struct RunArtifacts {
    AdaptiveRun run;
    std::optional<double> reference_energy;
};

RunArtifacts execute_run(const RunConfig& cfg, const std::string& tag, const fs::path& dir,
                         bool quiet = false) {
    const ProblemSpec problem = problem_by_name(cfg.problem, cfg.s);
    const AssemblyConfig acfg = assembly_config(cfg);
    const EstimatorConfig ecfg = estimator_config(cfg);

    const Mesh initial = problem.make_initial_mesh();
    nlohmann::json manifest = nlohmann::json::parse(cfg.to_json());
    manifest["resolved_threads"] = resolve_threads(cfg.threads);
    manifest["initial_mesh_sha1"] = sha1_hex(mesh_to_json(initial));

    RunArtifacts out;
    out.run = adaptive_loop(problem, cfg.s, cfg.theta, {cfg.max_dofs, cfg.max_levels}, acfg,
                            ecfg, [&](const AdaptRecord& r) {
                                if (quiet) return;
                                std::cout << tag << " level " << r.level << ": dofs=" << r.n_dofs
                                          << " eta=" << r.eta;
                                if (!std::isnan(r.error)) std::cout << " err=" << r.error;
                                std::cout << "\n";
                            });

    // reference energy: closed form when known, else extrapolated from this run
    out.reference_energy = problem.exact_energy;
    if (!out.reference_energy && out.run.records.size() >= 4) {
        try {
            out.reference_energy = extrapolate_energy(out.run.records);
        } catch (const AdaptError&) {
        }
    }
    if (!problem.exact_energy && out.reference_energy) {
        for (auto& r : out.run.records)
            r.error = std::sqrt(std::max(0.0, *out.reference_energy - r.energy));
        manifest["extrapolated_energy"] = *out.reference_energy;
    }

    fs::create_directories(dir);
    write_file(dir / ("manifest" + tag + ".json"), manifest.dump(2));
    {
        std::ofstream os(dir / ("levels" + tag + ".csv"), std::ios::binary);
        records_to_csv(os, out.run.records);
    }
    write_file(dir / ("mesh_final" + tag + ".json"), mesh_to_json(out.run.final_mesh));

    if (cfg.plot) {
        PlotSeries se{"eta", "#1f77b4", false, {}, {}};
        PlotSeries er{"error", "#d62728", true, {}, {}};
        for (const auto& r : out.run.records) {
            se.x.push_back(r.n_dofs);
            se.y.push_back(r.eta);
            if (!std::isnan(r.error) && r.error > 0.0) {
                er.x.push_back(r.n_dofs);
                er.y.push_back(r.error);
            }
        }
        write_file(dir / ("plot" + tag + ".svg"),
                   loglog_svg({se, er}, {-0.25, -0.5},
                              cfg.problem + " s=" + std::to_string(cfg.s) +
                                  " theta=" + std::to_string(cfg.theta)));
    }
    return out;
}

int cmd_adapt(const RunConfig& cfg) {
    const fs::path dir = resolve_out_dir(cfg);
    execute_run(cfg, "", dir);
    return 0;
}

int cmd_study(const RunConfig& cfg, std::vector<double> thetas) {
    if (thetas.empty()) thetas = {0.3, 0.5, 0.7, 1.0};
    const fs::path dir = resolve_out_dir(cfg);
    fs::create_directories(dir);

    std::vector<PlotSeries> series;
    const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
    std::ofstream rates(dir / "study_rates.csv", std::ios::binary);
    rates << "theta,rate_eta,rate_error\n";
    char buf[128];
    for (size_t k = 0; k < thetas.size(); ++k) {
        RunConfig sub = cfg;
        sub.theta = thetas[k];
        std::snprintf(buf, sizeof(buf), "_theta%g", thetas[k]);
        const RunArtifacts art = execute_run(sub, buf, dir);
        const int window = std::min<int>(4, static_cast<int>(art.run.records.size()));
        double reta = 0.0, rerr = 0.0;
        try {
            reta = fit_rate(art.run.records, RateField::eta, window);
            rerr = fit_rate(art.run.records, RateField::error, window);
        } catch (const AdaptError&) {
        }
        std::snprintf(buf, sizeof(buf), "%g,%.6f,%.6f\n", thetas[k], reta, rerr);
        rates << buf;

        PlotSeries pe{"eta theta=" + std::to_string(thetas[k]), colors[k % 6], true, {}, {}};
        PlotSeries pr{"err theta=" + std::to_string(thetas[k]), colors[k % 6], false, {}, {}};
        for (const auto& r : art.run.records) {
            pe.x.push_back(r.n_dofs);
            pe.y.push_back(r.eta);
            if (!std::isnan(r.error) && r.error > 0.0) {
                pr.x.push_back(r.n_dofs);
                pr.y.push_back(r.error);
            }
        }
        series.push_back(pe);
        series.push_back(pr);
    }
    write_file(dir / "study_plot.svg",
               loglog_svg(series, {-0.25, -0.5}, cfg.problem + " theta sweep, s=" +
                                                     std::to_string(cfg.s)));
    return 0;
}

}  // namespace

std::string verify_report_json(const std::vector<VerifyCheck>& checks) {
    nlohmann::json j;
    j["checks"] = nlohmann::json::array();
    bool all = true;
    for (const auto& c : checks) {
        j["checks"].push_back({{"name", c.name},
                               {"s", c.s},
                               {"pass", c.pass},
                               {"value", c.value},
                               {"tolerance", c.tolerance}});
        all = all && c.pass;
    }
    j["all_passed"] = all;
    return j.dump(2);
}

std::vector<VerifyCheck> verify_report_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    std::vector<VerifyCheck> out;
    for (const auto& c : j.at("checks"))
        out.push_back({c.at("name").get<std::string>(), c.at("s").get<double>(),
                       c.at("pass").get<bool>(), c.at("value").get<double>(),
                       c.at("tolerance").get<double>()});
    return out;
}

std::vector<VerifyCheck> run_verification(bool full, int threads) {
    std::vector<VerifyCheck> checks;
    const std::vector<double> svals = full ? std::vector<double>{0.25, 0.5, 0.75}
                                           : std::vector<double>{0.5};

    // two-level circle mesh shared by the checks
    Mesh mesh = Mesh::make_circle(16);
    mesh = uniform_refine(mesh).mesh;
    mesh = uniform_refine(mesh).mesh;

    AssemblyConfig acfg;
    acfg.threads = threads;
    EstimatorConfig ecfg;
    ecfg.threads = threads;

    std::mt19937 rng(20240810);

    for (double s : svals) {
        const StiffnessMatrix A = assemble_stiffness(mesh, s, acfg);
        // symmetry
        {
            const double denom = A.A.cwiseAbs().maxCoeff();
            const double asym = (A.A - A.A.transpose()).cwiseAbs().maxCoeff() / denom;
            checks.push_back({"stiffness_symmetry", s, asym <= 1e-12, asym, 1e-12});
        }
        // SPD via Cholesky
        {
            Eigen::LLT<Eigen::MatrixXd> llt(A.A);
            checks.push_back({"stiffness_spd", s, llt.info() == Eigen::Success,
                              llt.info() == Eigen::Success ? 1.0 : 0.0, 1.0});
        }
        const ProblemSpec prob = s == 0.5 ? example1(0.5) : example1(s);
        const Eigen::VectorXd F = assemble_load(mesh, prob.f, {});
        const P1Function u = solve(A, F);
        const FracLapEvaluator eval(mesh, u, s, ecfg);

        // PV-ball cancellation
        {
            double worst = 0.0;
            for (int t = 0; t < mesh.n_triangles(); t += 7) {
                const Point x = mesh.barycenter(t);
                worst = std::max(worst, std::abs(eval.pv_ball_part(x, t)));
            }
            checks.push_back({"pv_cancellation", s, worst <= 1e-10, worst, 1e-10});
        }
        // boundary formula vs oracle at random interior points
        {
            std::uniform_int_distribution<int> pick(0, mesh.n_triangles() - 1);
            double worst = 0.0;
            const int n_pts = full ? 8 : 4;
            for (int k = 0; k < n_pts; ++k) {
                const int t = pick(rng);
                const Point x = mesh.barycenter(t);
                const double a = eval.evaluate(x, t);
                const double b = eval_fraclap_oracle(mesh, u, x, t, s, 1e-7);
                worst = std::max(worst, std::abs(a - b) / std::max(1e-12, std::abs(b)));
            }
            checks.push_back({"formula_vs_oracle", s, worst <= 1e-4, worst, 1e-4});
        }
        // fixed-function indicator reduction under bisection
        {
            const double beta = s <= 0.5 ? 0.0 : s - 0.5;
            const double target = std::pow(2.0, -(s - beta) / 2.0);
            // weights-only comparison of h^{2s} (and omega powers) on a parent
            // and its children with the residual frozen to 1
            Mesh parent = Mesh::make_square();
            auto ref = nvb_refine(parent, {0});
            const RuleTriangle rule = plain_triangle_rule(8);
            auto weight_int = [&](const Mesh& m, int t) {
                const auto c = m.corners(t);
                const double h = m.mesh_size(t);
                return rule.integrate(
                    [&](Point p) {
                        const double w = beta == 0.0
                                             ? 1.0
                                             : std::pow(m.skeleton_distance(p, t), 2.0 * beta);
                        return std::pow(h, 2.0 * (s - beta)) * w;
                    },
                    c);
            };
            double children = 0.0;
            for (size_t t = 0; t < ref.parent.size(); ++t)
                if (ref.parent[t] == 0) children += weight_int(ref.mesh, static_cast<int>(t));
            const double ratio = std::sqrt(children / weight_int(parent, 0));
            checks.push_back(
                {"indicator_reduction", s, ratio <= target * (1.0 + 1e-8), ratio, target});
        }
        // blow-up exponent along a transect (s > 1/2 branch); run once at s=0.75
        if (s == 0.75 || (!full && s == svals.back())) {
            const double s_blow = 0.75;
            const StiffnessMatrix Ab =
                s == 0.75 ? A : assemble_stiffness(mesh, s_blow, acfg);
            const Eigen::VectorXd Fb =
                s == 0.75 ? F : assemble_load(mesh, example1(s_blow).f, {});
            const P1Function ub = s == 0.75 ? u : solve(Ab, Fb);
            const FracLapEvaluator evb(mesh, ub, s_blow, ecfg);
            // interior edge: walk from an interior element towards one edge
            int tsel = -1;
            for (int t = 0; t < mesh.n_triangles(); ++t) {
                bool interior = true;
                for (int v : mesh.triangle(t).v)
                    if (mesh.vertex(v).on_boundary) interior = false;
                if (interior) {
                    tsel = t;
                    break;
                }
            }
            const auto c = mesh.corners(tsel);
            const Point mid = 0.5 * (c[0] + c[1]);
            const Point inward = mesh.barycenter(tsel) - mid;
            std::vector<double> lx, ly;
            for (double f = 0.02; f > 0.0002; f *= 0.5) {
                const Point x = mid + f * inward;
                const double val = std::abs(evb.evaluate(x, tsel));
                lx.push_back(std::log(mesh.skeleton_distance(x, tsel)));
                ly.push_back(std::log(std::max(val, 1e-300)));
            }
            double mx = 0, my = 0;
            for (size_t i = 0; i < lx.size(); ++i) {
                mx += lx[i];
                my += ly[i];
            }
            mx /= lx.size();
            my /= lx.size();
            double sxx = 0, sxy = 0;
            for (size_t i = 0; i < lx.size(); ++i) {
                sxx += (lx[i] - mx) * (lx[i] - mx);
                sxy += (lx[i] - mx) * (ly[i] - my);
            }
            const double slope = sxy / sxx;
            checks.push_back({"blowup_exponent", s_blow, std::abs(slope - (-0.5)) <= 0.1,
                              slope, 0.1});
        }
    }

    // Doerfler greedy vs exhaustive minimal cardinality on random instances
    {
        std::uniform_real_distribution<double> uni(0.01, 1.0);
        bool ok = true;
        for (int inst = 0; inst < 20 && ok; ++inst) {
            IndicatorSet ind;
            ind.eta_sq.resize(12);
            for (auto& v : ind.eta_sq) v = uni(rng);
            const double theta = 0.1 + 0.8 * uni(rng);
            const auto greedy = doerfler_mark(ind, theta);
            const double total = ind.total_sq();
            int best = 13;
            for (int mask = 0; mask < (1 << 12); ++mask) {
                double acc = 0.0;
                for (int b = 0; b < 12; ++b)
                    if (mask & (1 << b)) acc += ind.eta_sq[b];
                if (acc >= theta * total) best = std::min(best, __builtin_popcount(mask));
            }
            ok = best == static_cast<int>(greedy.marked.size());
        }
        checks.push_back({"marking_minimality", 0.0, ok, ok ? 1.0 : 0.0, 1.0});
    }
    return checks;
}

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Adaptive P1 finite elements for the integral fractional Laplacian"};
    app.require_subcommand(1);

    RunConfig cfg;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--problem", cfg.problem, "circle-const | lshape | circle-disc")
            ->required();
        sub->add_option("--s", cfg.s, "fractional order in (0,1)");
        sub->add_option("--theta", cfg.theta, "Doerfler bulk parameter in (0,1]");
        sub->add_option("--max-dofs", cfg.max_dofs, "stop when this many dofs are reached");
        sub->add_option("--levels", cfg.max_levels, "maximum number of levels");
        sub->add_option("--radius-R", cfg.radius_factor,
                        "truncation radius factor (R = factor * diam); the complement term is "
                        "evaluated in exact boundary-integral form");
        sub->add_option("--quad-order", cfg.quad_order, "estimator quadrature order");
        sub->add_option("--quad-layers", cfg.quad_layers, "estimator grading layers");
        sub->add_option("--quad-ratio", cfg.quad_ratio, "estimator grading ratio");
        sub->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
        sub->add_option("--out", cfg.out_dir, "output directory (or FRACLAP_OUT)");
        sub->add_flag("--plot", cfg.plot, "emit log-log SVG plots");
    };

    CLI::App* adapt = app.add_subcommand("adapt", "run one adaptive study");
    add_common(adapt);

    std::vector<double> thetas;
    CLI::App* study = app.add_subcommand("study", "run a theta sweep and merge the results");
    add_common(study);
    study->add_option("--thetas", thetas, "theta values (default 0.3 0.5 0.7 1.0)");

    CLI::App* verify = app.add_subcommand("verify", "run the verification suite");
    std::string rigor = "quick";
    std::string verify_out;
    int verify_threads = 0;
    verify->add_option("--level", rigor, "quick | full")
        ->check(CLI::IsMember({"quick", "full"}));
    verify->add_option("--out", verify_out, "output directory");
    verify->add_option("--threads", verify_threads, "worker threads (0 = hardware)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (verify->parsed()) {
            const auto checks = run_verification(rigor == "full", resolve_threads(verify_threads));
            const std::string report = verify_report_json(checks);
            fs::path dir = verify_out.empty()
                               ? (std::getenv("FRACLAP_OUT") ? std::getenv("FRACLAP_OUT") : ".")
                               : verify_out;
            fs::create_directories(dir);
            write_file(dir / "verify_report.json", report);
            bool all = true;
            for (const auto& c : checks) {
                std::cout << (c.pass ? "[pass] " : "[FAIL] ") << c.name << " (s=" << c.s
                          << "): value " << c.value << " vs tolerance " << c.tolerance << "\n";
                all = all && c.pass;
            }
            return all ? 0 : 1;
        }
        cfg.validate();
        if (adapt->parsed()) return cmd_adapt(cfg);
        if (study->parsed()) return cmd_study(cfg, thetas);
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace fraclap
