#include "fraclap/estimator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "fraclap/assembly.hpp"
#include "fraclap/parallel.hpp"

namespace fraclap {

double IndicatorSet::total_sq() const {
    double acc = 0.0;
    for (double v : eta_sq) acc += v;
    return acc;
}

double IndicatorSet::total() const { return std::sqrt(total_sq()); }

void IndicatorSet::to_csv(std::ostream& os, const Mesh& mesh) const {
    os << "element,bary_x,bary_y,h,eta_sq\n";
    char buf[160];
    for (size_t t = 0; t < eta_sq.size(); ++t) {
        const Point b = mesh.barycenter(static_cast<int>(t));
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", t, b.x, b.y,
                      mesh.mesh_size(static_cast<int>(t)), eta_sq[t]);
        os << buf;
    }
}

namespace {

struct EdgeGeom {
    Point p;      // first endpoint
    Point tang;   // q - p
    Point n;      // outward unit normal
    double len;
    double up, uq;  // u at the endpoints
    double gn;      // grad u|_T' . n
};

struct ElemGeom {
    std::array<Point, 3> c;
    Point center;
    double h;
    double area;
    Point grad;
    double affine0;  // affine extension u|_T(x) = affine0 + grad . x
    std::array<EdgeGeom, 3> edge;
};

int scaled(int v, double f) { return std::max(1, static_cast<int>(std::lround(v * f))); }

// Shared precomputed geometry plus the boundary-formula evaluation paths.
struct Core {
    const Mesh& mesh;
    double s;
    EstimatorConfig cfg;
    double inv2s, inv4s2, cds;
    std::vector<ElemGeom> el;
    Rule1D g2, g3, g4, gfull;
    int edge_order;

    Core(const Mesh& m, const P1Function& u, double s_, const EstimatorConfig& c)
        : mesh(m), s(s_), cfg(c) {
        if (!(s > 0.0 && s < 1.0)) throw EstimatorError("estimator: s must be in (0,1)");
        inv2s = 1.0 / (2.0 * s);
        inv4s2 = inv2s * inv2s;
        cds = normalization_constant(2, s);
        edge_order = scaled(cfg.edge_order, cfg.order_scale);
        g2 = gauss_legendre(2);
        g3 = gauss_legendre(std::max(3, edge_order / 2));
        g4 = gauss_legendre(std::min(4, edge_order));
        gfull = gauss_legendre(edge_order);

        el.resize(mesh.n_triangles());
        for (int t = 0; t < mesh.n_triangles(); ++t) {
            ElemGeom& e = el[t];
            e.c = mesh.corners(t);
            e.center = mesh.barycenter(t);
            e.area = mesh.area(t);
            e.h = std::sqrt(e.area);
            e.grad = u.gradient(mesh, t);
            const double u0 = u.vertex_value(mesh, mesh.triangle(t).v[0]);
            e.affine0 = u0 - dot(e.grad, e.c[0]);
            for (int k = 0; k < 3; ++k) {
                EdgeGeom& ed = e.edge[k];
                ed.p = e.c[k];
                ed.tang = e.c[(k + 1) % 3] - e.c[k];
                ed.len = norm(ed.tang);
                ed.n = {ed.tang.y / ed.len, -ed.tang.x / ed.len};
                ed.up = u.vertex_value(mesh, mesh.triangle(t).v[k]);
                ed.uq = u.vertex_value(mesh, mesh.triangle(t).v[(k + 1) % 3]);
                ed.gn = dot(e.grad, ed.n);
            }
        }
    }

    double u_at(int t, Point x) const { return el[t].affine0 + dot(el[t].grad, x); }

    // I_rs   = int_e |x-y|^{-2s} dl
    // I_umom = int_e u(y) ((x-y).n) |x-y|^{-2-2s} dl
    // I_flux = int_e ((x-y).n) |x-y|^{-2-2s} dl   (self element only)
    // Light = relaxed distance tiers for the batched indicator path (the
    // per-node residual only needs ~1e-3 relative accuracy there).
    template <bool NeedFlux, bool Light = false>
    void edge_integrals(const EdgeGeom& e, Point x, double& I_rs, double& I_umom,
                        double& I_flux) const {
        const double d = segment_distance(x, e.p, e.p + e.tang);
        const double ratio = d / e.len;
        const Rule1D* g;
        Rule1D local;
        if (ratio >= (Light ? 1.7 : 4.0)) {
            g = &g2;
        } else if (ratio >= (Light ? 0.9 : 1.5)) {
            g = &g3;
        } else if (ratio >= (Light ? 0.45 : 0.55)) {
            g = Light ? &g4 : &gfull;
        } else {
            local = near_peak_line_rule(segment_foot(x, e.p, e.p + e.tang), std::max(ratio, 1e-14),
                                        Light ? 4 : edge_order);
            g = &local;
        }
        double a_rs = 0.0, a_um = 0.0, a_fl = 0.0;
        for (int i = 0; i < g->size(); ++i) {
            const double t = g->nodes[i];
            const Point y = e.p + t * e.tang;
            const Point dxy = x - y;
            const double r2 = norm_sq(dxy);
            const double w = g->weights[i];
            const double krs = std::pow(r2, -s);
            const double kfl = krs / r2 * dot(dxy, e.n);
            a_rs += w * krs;
            a_um += w * (e.up + t * (e.uq - e.up)) * kfl;
            if constexpr (NeedFlux) a_fl += w * kfl;
        }
        I_rs = a_rs * e.len;
        I_umom = a_um * e.len;
        if constexpr (NeedFlux) I_flux = a_fl * e.len;
    }

    // contribution of a non-self element to the formula sum (before C(d,s))
    template <bool Light = false>
    double other_element_term(int t, Point x) const {
        double acc = 0.0;
        for (const EdgeGeom& e : el[t].edge) {
            double I_rs, I_um, unused;
            edge_integrals<false, Light>(e, x, I_rs, I_um, unused);
            acc += inv4s2 * e.gn * I_rs - inv2s * I_um;
        }
        return acc;
    }

    // The boundary moments of a far element add up to -int_{T'} u(y) k(x,y) dy
    // exactly (the u(x) mass of the complement lives in the self flux term),
    // so distant elements can be integrated in domain form: 3-point midpoint
    // rule (degree 2) or centroid only.
    bool u_vanishes(int t) const {
        const EdgeGeom* e = el[t].edge.data();
        return e[0].up == 0.0 && e[1].up == 0.0 && e[2].up == 0.0 && el[t].affine0 == 0.0 &&
               el[t].grad.x == 0.0 && el[t].grad.y == 0.0;
    }

    double far_element_term(int t, Point x, bool three_point) const {
        const ElemGeom& e = el[t];
        double acc = 0.0;
        if (three_point) {
            for (int k = 0; k < 3; ++k) {
                const Point y{0.5 * (e.c[k].x + e.c[(k + 1) % 3].x),
                              0.5 * (e.c[k].y + e.c[(k + 1) % 3].y)};
                const double uy = e.affine0 + dot(e.grad, y);
                acc += uy * std::pow(norm_sq(x - y), -1.0 - s);
            }
            acc /= 3.0;
        } else {
            const double uy = e.affine0 + dot(e.grad, e.center);
            acc = uy * std::pow(norm_sq(x - e.center), -1.0 - s);
        }
        return -e.area * acc;
    }

    // self-element terms: gradient layer plus the u(x)-weighted flux of the
    // element complement
    template <bool Light = false>
    double self_term(int t, Point x) const {
        double acc = 0.0;
        double flux = 0.0;
        for (const EdgeGeom& e : el[t].edge) {
            double I_rs, I_um, I_fl;
            edge_integrals<true, Light>(e, x, I_rs, I_um, I_fl);
            acc += inv2s * e.gn * I_rs;
            flux += I_fl;
        }
        return acc - u_at(t, x) * inv2s * flux;
    }

    double evaluate_exact(Point x, int t) const {
        guard(x, t);
        double acc = self_term(t, x);
        for (int o = 0; o < mesh.n_triangles(); ++o)
            if (o != t) acc += other_element_term(o, x);
        return cds * acc;
    }

    void guard(Point x, int t) const {
        if (mesh.skeleton_distance(x, t) < 1e-12 * el[t].h)
            throw EstimatorError("evaluation point too close to the mesh skeleton");
    }
};

// Lagrange interpolation on the degree-m principal lattice of a triangle, in
// barycentric coordinates (affine invariant, so one operator serves every
// element).
struct LatticeInterp {
    int degree;
    std::vector<std::array<double, 3>> nodes;  // barycentric lattice points
    Eigen::MatrixXd inv_vand;                  // monomial -> nodal

    explicit LatticeInterp(int m) : degree(m) {
        for (int i = 0; i <= m; ++i)
            for (int j = 0; j <= m - i; ++j) {
                const double l1 = static_cast<double>(i) / m;
                const double l2 = static_cast<double>(j) / m;
                nodes.push_back({1.0 - l1 - l2, l1, l2});
            }
        const int nb = static_cast<int>(nodes.size());
        Eigen::MatrixXd V(nb, nb);
        for (int r = 0; r < nb; ++r) {
            int c = 0;
            for (int a = 0; a <= m; ++a)
                for (int b = 0; b <= m - a; ++b)
                    V(r, c++) = std::pow(nodes[r][1], a) * std::pow(nodes[r][2], b);
        }
        inv_vand = V.inverse();
    }

    int size() const { return static_cast<int>(nodes.size()); }

    // weights w with f(bary) ~= sum_k w_k f(node_k)
    Eigen::VectorXd weights_at(const std::array<double, 3>& bary) const {
        const int nb = size();
        Eigen::VectorXd mono(nb);
        int c = 0;
        for (int a = 0; a <= degree; ++a)
            for (int b = 0; b <= degree - a; ++b)
                mono(c++) = std::pow(bary[1], a) * std::pow(bary[2], b);
        return inv_vand.transpose() * mono;
    }
};

// sub-triangles on which f is smooth (clipping against discontinuity lines)
std::vector<std::array<Point, 3>> smooth_pieces(const std::array<Point, 3>& c,
                                                const std::vector<DiscontinuityLine>& lines) {
    bool straddles = false;
    for (const auto& line : lines) {
        int pos = 0, neg = 0;
        for (const auto& p : c) {
            const double v = dot(line.normal, p - line.point);
            if (v > 1e-13) ++pos;
            if (v < -1e-13) ++neg;
        }
        if (pos > 0 && neg > 0) straddles = true;
    }
    if (!straddles) return {c};
    std::vector<std::vector<Point>> pieces = {{c[0], c[1], c[2]}};
    for (const auto& line : lines) {
        std::vector<std::vector<Point>> next;
        for (auto& poly : pieces) {
            auto plus = clip_halfplane(poly, line.point, line.normal);
            auto minus = clip_halfplane(poly, line.point, {-line.normal.x, -line.normal.y});
            if (plus.size() >= 3) next.push_back(std::move(plus));
            if (minus.size() >= 3) next.push_back(std::move(minus));
        }
        pieces = std::move(next);
    }
    std::vector<std::array<Point, 3>> tris;
    for (const auto& poly : pieces)
        for (size_t k = 1; k + 1 < poly.size(); ++k) {
            if (std::abs(signed_area(poly[0], poly[k], poly[k + 1])) < 1e-28) continue;
            tris.push_back({poly[0], poly[k], poly[k + 1]});
        }
    return tris;
}

double weight_factor(const Mesh& mesh, int t, double s, double beta, Point x) {
    const double h = mesh.mesh_size(t);
    if (beta == 0.0) return std::pow(h, 2.0 * s);
    const double w = mesh.skeleton_distance(x, t);
    return std::pow(h, 2.0 * (s - beta)) * std::pow(w, 2.0 * beta);
}

// Quadrature nodes mapped essentially onto the skeleton (distance below
// 1e-9 h, reachable at the collapsed Duffy corner) carry negligible true
// residual mass but catastrophic cancellation in the evaluation formula;
// they are dropped from the indicator integrals.
bool node_too_deep(const Mesh& mesh, int t, Point x, double h) {
    return mesh.skeleton_distance(x, t) < 1e-9 * h;
}

}  // namespace

struct FracLapEvaluator::Impl {
    Core core;
    Impl(const Mesh& m, const P1Function& u, double s, const EstimatorConfig& c)
        : core(m, u, s, c) {}
};

FracLapEvaluator::FracLapEvaluator(const Mesh& mesh, const P1Function& u, double s,
                                   const EstimatorConfig& cfg)
    : impl_(std::make_unique<Impl>(mesh, u, s, cfg)) {}
FracLapEvaluator::~FracLapEvaluator() = default;
FracLapEvaluator::FracLapEvaluator(FracLapEvaluator&&) noexcept = default;

double FracLapEvaluator::evaluate(Point x, int tri) const {
    return impl_->core.evaluate_exact(x, tri);
}

double FracLapEvaluator::pv_ball_part(Point x, int tri) const {
    const Core& c = impl_->core;
    c.guard(x, tri);
    const double delta = c.mesh.skeleton_distance(x, tri);
    const Point g = c.el[tri].grad;
    // angular moment of g.nu over the circle: vanishes by symmetry
    const int n_ang = 128;
    double ang = 0.0;
    for (int k = 0; k < n_ang; ++k) {
        const double phi = 2.0 * std::numbers::pi * (k + 0.5) / n_ang;
        ang += g.x * std::cos(phi) + g.y * std::sin(phi);
    }
    ang *= 2.0 * std::numbers::pi / n_ang;
    // radial factor of the truncated principal value (eps -> 0 limit)
    const double eps = 1e-8 * delta;
    double rad;
    if (std::abs(1.0 - 2.0 * c.s) < 1e-12)
        rad = std::log(delta / eps);
    else
        rad = (std::pow(delta, 1.0 - 2.0 * c.s) - std::pow(eps, 1.0 - 2.0 * c.s)) /
              (1.0 - 2.0 * c.s);
    return -c.cds * ang * rad;
}

namespace {

struct RaySegment {
    double rin, rout;
    int elem;  // -1 for outside
};

double segment_closed_form(double ux, double utilde, double b, double r1, double r2, double s) {
    // int_{r1}^{r2} (ux - utilde - b r) r^{-1-2s} dr, r2 may be infinite
    const double p0 = std::pow(r1, -2.0 * s);
    const double p1 = std::isinf(r2) ? 0.0 : std::pow(r2, -2.0 * s);
    double acc = (ux - utilde) * (p0 - p1) / (2.0 * s);
    if (b != 0.0) {
        if (std::abs(1.0 - 2.0 * s) < 1e-12)
            acc -= b * std::log(r2 / r1);
        else
            acc -= b *
                   ((std::isinf(r2) && s > 0.5 ? 0.0 : std::pow(r2, 1.0 - 2.0 * s)) -
                    std::pow(r1, 1.0 - 2.0 * s)) /
                   (1.0 - 2.0 * s);
    }
    return acc;
}

}  // namespace

double eval_fraclap_oracle(const Mesh& mesh, const P1Function& u, Point x, int tri, double s,
                           double rel_tol) {
    const int n_tri = mesh.n_triangles();
    std::vector<std::array<Point, 3>> corners(n_tri);
    std::vector<Point> grads(n_tri);
    std::vector<double> affine0(n_tri);
    for (int t = 0; t < n_tri; ++t) {
        corners[t] = mesh.corners(t);
        grads[t] = u.gradient(mesh, t);
        affine0[t] = u.vertex_value(mesh, mesh.triangle(t).v[0]) - dot(grads[t], corners[t][0]);
    }
    const double delta = mesh.skeleton_distance(x, tri);
    if (delta <= 0.0) throw EstimatorError("oracle: point on the skeleton");
    const double ux = affine0[tri] + dot(grads[tri], x);

    auto ray_value = [&](double theta) {
        const Point nu{std::cos(theta), std::sin(theta)};
        std::vector<RaySegment> segs;
        for (int t = 0; t < n_tri; ++t) {
            // clip the ray against the three inward half-planes
            double rin = 0.0, rout = 1e300;
            for (int k = 0; k < 3 && rin < rout; ++k) {
                const Point a = corners[t][k];
                const Point e = corners[t][(k + 1) % 3] - a;
                const Point inward{-e.y, e.x};
                const double num = dot(inward, a - x);
                const double den = dot(inward, nu);
                if (std::abs(den) < 1e-15) {
                    if (dot(inward, x - a) < 0.0) rin = 1e301;  // parallel outside
                } else if (den > 0.0) {
                    rin = std::max(rin, num / den);
                } else {
                    rout = std::min(rout, num / den);
                }
            }
            if (rin < rout) segs.push_back({rin, rout, t});
        }
        std::sort(segs.begin(), segs.end(),
                  [](const RaySegment& a, const RaySegment& b) { return a.rin < b.rin; });

        double acc = 0.0;
        double rcur = delta;
        for (const auto& sg : segs) {
            if (sg.rout <= rcur) continue;
            if (sg.rin > rcur) {  // gap: outside the mesh, u = 0
                acc += segment_closed_form(ux, 0.0, 0.0, rcur, sg.rin, s);
                rcur = sg.rin;
            }
            const double lo = std::max(rcur, sg.rin);
            const double hi = sg.rout;
            if (hi > lo) {
                const double utilde = affine0[sg.elem] + dot(grads[sg.elem], x);
                acc += segment_closed_form(ux, utilde, dot(grads[sg.elem], nu), lo, hi, s);
                rcur = hi;
            }
        }
        acc += segment_closed_form(ux, 0.0, 0.0, rcur,
                                   std::numeric_limits<double>::infinity(), s);
        return acc;
    };

    // split the angular integral at every vertex direction, then refine
    std::vector<double> brk;
    for (int v = 0; v < mesh.n_vertices(); ++v) {
        const Point d = mesh.vertex_point(v) - x;
        if (norm(d) < 1e-14) continue;
        double a = std::atan2(d.y, d.x);
        if (a < 0) a += 2.0 * std::numbers::pi;
        brk.push_back(a);
    }
    brk.push_back(0.0);
    brk.push_back(2.0 * std::numbers::pi);
    std::sort(brk.begin(), brk.end());
    brk.erase(std::unique(brk.begin(), brk.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-13; }),
              brk.end());

    const Rule1D g7 = gauss_legendre(7);
    const Rule1D g10 = gauss_legendre(10);
    std::function<double(double, double, double, int)> adap = [&](double a, double b,
                                                                  double tol, int depth) {
        auto apply = [&](const Rule1D& g) {
            double acc = 0.0;
            for (int i = 0; i < g.size(); ++i) acc += g.weights[i] * ray_value(a + (b - a) * g.nodes[i]);
            return acc * (b - a);
        };
        const double c = apply(g7), f = apply(g10);
        if (depth <= 0 || std::abs(f - c) < tol) return f;
        const double m = 0.5 * (a + b);
        return adap(a, m, 0.5 * tol, depth - 1) + adap(m, b, 0.5 * tol, depth - 1);
    };

    double coarse = 0.0;
    for (size_t k = 0; k + 1 < brk.size(); ++k) {
        double c0 = 0.0;
        for (int i = 0; i < g7.size(); ++i)
            c0 += g7.weights[i] * ray_value(brk[k] + (brk[k + 1] - brk[k]) * g7.nodes[i]);
        coarse += c0 * (brk[k + 1] - brk[k]);
    }
    const double scale = std::max(std::abs(coarse), 1e-12);
    double total = 0.0;
    for (size_t k = 0; k + 1 < brk.size(); ++k)
        total += adap(brk[k], brk[k + 1],
                      rel_tol * scale * (brk[k + 1] - brk[k]) / (2.0 * std::numbers::pi), 16);
    return normalization_constant(2, s) * total;
}

namespace {

double indicator_on_element(const Core& core, const Rhs& f, int t, double beta,
                            const RuleTriangle& bary_rule, const GradedRuleSquare& graded,
                            const std::vector<DiscontinuityLine>& lines,
                            const std::function<double(Point, int)>& eval) {
    const Mesh& mesh = core.mesh;
    const auto c = core.el[t].c;
    const auto pieces = smooth_pieces(c, lines);
    double acc = 0.0;
    const double h_t = core.el[t].h;
    if (pieces.size() == 1) {
        const double area = core.el[t].area;
        for (int q = 0; q < bary_rule.size(); ++q) {
            const Point x = bary_rule.map(q, c);
            if (node_too_deep(mesh, t, x, h_t)) continue;
            const double R = f(x) - eval(x, t);
            acc += bary_rule.weights[q] * area * weight_factor(mesh, t, core.s, beta, x) * R * R;
        }
    } else {
        for (const auto& sub : pieces) {
            const RuleTriangle rule = duffy_to_triangle(graded, sub);
            const double area = std::abs(signed_area(sub[0], sub[1], sub[2]));
            for (int q = 0; q < rule.size(); ++q) {
                const Point x = rule.map(q, sub);
                if (node_too_deep(mesh, t, x, h_t)) continue;
                const double R = f(x) - eval(x, t);
                acc += rule.weights[q] * area * weight_factor(mesh, t, core.s, beta, x) * R * R;
            }
        }
    }
    return acc;
}

}  // namespace

double local_indicator(const Mesh& mesh, const P1Function& u, const Rhs& f, int tri, double s,
                       const EstimatorConfig& cfg, const std::vector<DiscontinuityLine>& lines) {
    Core core(mesh, u, s, cfg);
    const double beta = s <= 0.5 ? 0.0 : s - 0.5;
    const GradedRuleSquare graded =
        graded_square_rule(std::max(2, scaled(cfg.layers, cfg.order_scale)), cfg.ratio,
                           scaled(cfg.order, cfg.order_scale), std::min(0.0, 1.0 - 2.0 * s));
    const RuleTriangle bary_rule = duffy_to_triangle(graded, core.el[tri].c);
    return indicator_on_element(core, f, tri, beta, bary_rule, graded, lines,
                                [&](Point x, int t) { return core.evaluate_exact(x, t); });
}

IndicatorSet estimate(const Mesh& mesh, const P1Function& u, const Rhs& f, double s,
                      const EstimatorConfig& cfg, const std::vector<DiscontinuityLine>& lines) {
    Core core(mesh, u, s, cfg);
    const int n_tri = mesh.n_triangles();
    const double beta = s <= 0.5 ? 0.0 : s - 0.5;

    const GradedRuleSquare graded =
        graded_square_rule(std::max(2, scaled(cfg.layers, cfg.order_scale)), cfg.ratio,
                           scaled(cfg.order, cfg.order_scale), std::min(0.0, 1.0 - 2.0 * s));
    // one barycentric rule serves every unclipped element
    const RuleTriangle bary_rule =
        duffy_to_triangle(graded, {{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}});

    // topological near zone: elements beyond the 3rd-order patch form the
    // smooth far field
    std::vector<std::vector<int>> near(n_tri);
    for (int t = 0; t < n_tri; ++t) near[t] = mesh.patch(t, 3);

    const LatticeInterp interp(cfg.interp_degree);
    // interpolation weights from lattice values to the indicator nodes
    Eigen::MatrixXd to_nodes(bary_rule.size(), interp.size());
    for (int q = 0; q < bary_rule.size(); ++q)
        to_nodes.row(q) = interp.weights_at(bary_rule.bary[q]).transpose();

    IndicatorSet out;
    out.s = s;
    out.beta = beta;
    out.eta_sq.assign(n_tri, 0.0);

    const int threads = resolve_threads(cfg.threads);
    parallel_blocks(n_tri, threads, [&](int, long long lo, long long hi) {
        std::vector<char> is_near(n_tri, 0);
        for (long long t = lo; t < hi; ++t) {
            for (int o : near[t]) is_near[o] = 1;

            auto near_eval = [&](Point x) {
                double acc = core.self_term<true>(static_cast<int>(t), x);
                for (int o : near[t])
                    if (o != t && !core.u_vanishes(o)) acc += core.other_element_term<true>(o, x);
                return acc;
            };

            double eta = 0.0;
            if (cfg.exact_far) {
                eta = indicator_on_element(
                    core, f, static_cast<int>(t), beta, bary_rule, graded, lines,
                    [&](Point x, int tt) { return core.evaluate_exact(x, tt); });
            } else {
                // far field at the interpolation lattice; elements carrying no
                // degrees of freedom contribute nothing
                Eigen::VectorXd far_lat(interp.size());
                for (int k = 0; k < interp.size(); ++k) {
                    const auto& b = interp.nodes[k];
                    const Point x{b[0] * core.el[t].c[0].x + b[1] * core.el[t].c[1].x +
                                      b[2] * core.el[t].c[2].x,
                                  b[0] * core.el[t].c[0].y + b[1] * core.el[t].c[1].y +
                                      b[2] * core.el[t].c[2].y};
                    double acc = 0.0;
                    for (int o = 0; o < n_tri; ++o) {
                        if (is_near[o] || core.u_vanishes(o)) continue;
                        const double d2 = norm_sq(x - core.el[o].center);
                        const double h2 = core.el[o].h * core.el[o].h;
                        if (d2 >= 256.0 * h2)
                            acc += core.far_element_term(o, x, false);
                        else if (d2 >= 16.0 * h2)
                            acc += core.far_element_term(o, x, true);
                        else
                            acc += core.other_element_term<true>(o, x);
                    }
                    far_lat(k) = acc;
                }

                const auto pieces = smooth_pieces(core.el[t].c, lines);
                if (pieces.size() == 1) {
                    const Eigen::VectorXd far_nodes = to_nodes * far_lat;
                    const double area = core.el[t].area;
                    for (int q = 0; q < bary_rule.size(); ++q) {
                        const Point x = bary_rule.map(q, core.el[t].c);
                        if (node_too_deep(mesh, static_cast<int>(t), x, core.el[t].h)) continue;
                        const double val = core.cds * (near_eval(x) + far_nodes(q));
                        const double R = f(x) - val;
                        eta += bary_rule.weights[q] * area *
                               weight_factor(mesh, static_cast<int>(t), s, beta, x) * R * R;
                    }
                } else {
                    for (const auto& sub : pieces) {
                        const RuleTriangle rule = duffy_to_triangle(graded, sub);
                        const double area = std::abs(signed_area(sub[0], sub[1], sub[2]));
                        for (int q = 0; q < rule.size(); ++q) {
                            const Point x = rule.map(q, sub);
                            if (node_too_deep(mesh, static_cast<int>(t), x, core.el[t].h))
                                continue;
                            const auto b = barycentric(x, core.el[t].c[0], core.el[t].c[1],
                                                       core.el[t].c[2]);
                            const double far = interp.weights_at(b).dot(far_lat);
                            const double val = core.cds * (near_eval(x) + far);
                            const double R = f(x) - val;
                            eta += rule.weights[q] * area *
                                   weight_factor(mesh, static_cast<int>(t), s, beta, x) * R * R;
                        }
                    }
                }
            }
            out.eta_sq[t] = eta;
            for (int o : near[t]) is_near[o] = 0;
        }
    });
    return out;
}

}  // namespace fraclap
