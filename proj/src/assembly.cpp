#include "fraclap/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fraclap/parallel.hpp"

namespace fraclap {

double normalization_constant(int d, double s) {
    if (d != 1 && d != 2)
        throw AssemblyError("normalization_constant: only d=1,2 supported");
    if (!(s > 0.0 && s < 1.0))
        throw AssemblyError("normalization_constant: s must be in (0,1)");
    // C(d,s) = 2^{2s} s Gamma(s+d/2) / (pi^{d/2} Gamma(1-s)), the
    // positive form of -2^{2s} Gamma(s+d/2) / (pi^{d/2} Gamma(-s)).
    return std::pow(2.0, 2.0 * s) * s * std::tgamma(s + 0.5 * d) /
           (std::pow(std::numbers::pi, 0.5 * d) * std::tgamma(1.0 - s));
}

namespace {

struct BoundarySegment {
    Point a, b;
    Point n;  // outward unit normal
    double len;
};

std::vector<BoundarySegment> boundary_segments(const Mesh& mesh) {
    std::vector<BoundarySegment> segs;
    segs.reserve(mesh.boundary_edges().size());
    for (const auto& e : mesh.boundary_edges()) {
        const Point a = mesh.vertex_point(e.a);
        const Point b = mesh.vertex_point(e.b);
        const Point t = b - a;
        const double len = norm(t);
        segs.push_back({a, b, {t.y / len, -t.x / len}, len});
    }
    return segs;
}

// kappa(x) over precomputed boundary segments; edge integrals use plain Gauss
// away from x and a peak-refined rule on nearby edges.
class KappaEvaluator {
public:
    KappaEvaluator(const Mesh& mesh, double s, int edge_order)
        : segs_(boundary_segments(mesh)), s_(s), order_(edge_order) {
        g2_ = gauss_legendre(2);
        g4_ = gauss_legendre(std::max(3, edge_order / 2));
        gfull_ = gauss_legendre(edge_order);
    }

    double operator()(Point x) const {
        double acc = 0.0;
        for (const auto& seg : segs_) {
            const double d = segment_distance(x, seg.a, seg.b);
            if (d < 1e-12 * seg.len)
                throw AssemblyError("complement weight evaluated on the boundary");
            const double ratio = d / seg.len;
            if (ratio > 1.0) {
                acc += edge_integral(seg, x, ratio > 6.0 ? g2_ : g4_);
            } else if (ratio > 0.35) {
                acc += edge_integral(seg, x, gfull_);
            } else {
                const Rule1D rule =
                    near_peak_line_rule(segment_foot(x, seg.a, seg.b), ratio, order_);
                acc += edge_integral(seg, x, rule);
            }
        }
        return acc / (2.0 * s_);
    }

private:
    double edge_integral(const BoundarySegment& seg, Point x, const Rule1D& g) const {
        double acc = 0.0;
        for (int i = 0; i < g.size(); ++i) {
            const Point y = seg.a + g.nodes[i] * (seg.b - seg.a);
            const Point d = y - x;
            const double r2 = norm_sq(d);
            acc += g.weights[i] * dot(d, seg.n) * std::pow(r2, -1.0 - s_);
        }
        return acc * seg.len;
    }

    std::vector<BoundarySegment> segs_;
    double s_;
    int order_;
    Rule1D g2_, g4_, gfull_;
};

struct PairSetup {
    std::array<int, 3> pa{0, 1, 2};
    std::array<int, 3> pb{0, 1, 2};
    int shared = 0;
};

PairSetup classify_pair(const Triangle& ta, const Triangle& tb) {
    PairSetup s;
    bool used_b[3] = {false, false, false};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (!used_b[j] && ta.v[i] == tb.v[j]) {
                s.pa[s.shared] = i;
                s.pb[s.shared] = j;
                used_b[j] = true;
                ++s.shared;
                break;
            }
    int ka = s.shared;
    for (int i = 0; i < 3 && ka < 3; ++i)
        if (std::find(s.pa.begin(), s.pa.begin() + s.shared, i) == s.pa.begin() + s.shared)
            s.pa[ka++] = i;
    int kb = s.shared;
    for (int j = 0; j < 3 && kb < 3; ++j)
        if (!used_b[j]) s.pb[kb++] = j;
    return s;
}

struct ElementData {
    std::array<Point, 3> c;
    Point center;
    double radius;
    double area;
    double h;
    bool touches_boundary;
};

int scaled_order(int order, double scale) {
    return std::max(1, static_cast<int>(std::lround(order * scale)));
}

}  // namespace

double complement_weight(Point x, const Mesh& mesh, double s, double R) {
    if (!(s > 0.0 && s < 1.0)) throw AssemblyError("complement_weight: s must be in (0,1)");
    if (!(R >= 2.0 * mesh.diameter()))
        throw AssemblyError("complement_weight: R must be at least 2 diam(Omega)");
    KappaEvaluator kappa(mesh, s, 8);
    return kappa(x);
}

StiffnessMatrix assemble_stiffness(const Mesh& mesh, double s, const AssemblyConfig& cfg) {
    if (!(s > 0.0 && s < 1.0)) throw AssemblyError("assemble_stiffness: s must be in (0,1)");
    if (cfg.radius_factor < 2.0)
        throw AssemblyError("assemble_stiffness: truncation radius factor must be >= 2");
    const int n_tri = mesh.n_triangles();
    const int n_dof = mesh.n_dofs();
    const double cds = normalization_constant(2, s);

    std::vector<ElementData> el(n_tri);
    for (int t = 0; t < n_tri; ++t) {
        ElementData& e = el[t];
        e.c = mesh.corners(t);
        e.center = mesh.barycenter(t);
        e.radius = std::max({distance(e.c[0], e.center), distance(e.c[1], e.center),
                             distance(e.c[2], e.center)});
        e.area = mesh.area(t);
        e.h = std::sqrt(e.area);
        e.touches_boundary = false;
        for (int v : mesh.triangle(t).v)
            if (mesh.vertex(v).on_boundary) e.touches_boundary = true;
    }

    // pair rules (cached across calls)
    const int ord_pair = scaled_order(cfg.pair_order, cfg.order_scale);
    const int ord_id = scaled_order(cfg.identical_order, cfg.order_scale);
    const int ord_dis = scaled_order(cfg.disjoint_order, cfg.order_scale);
    const PairRule& rule_id = cached_pair_rule(PairKind::identical, ord_id, s);
    const PairRule& rule_edge = cached_pair_rule(PairKind::edge, ord_pair, s);
    const PairRule& rule_vtx = cached_pair_rule(PairKind::vertex, ord_pair, s);
    std::array<const PairRule*, 4> rule_dis{};  // tiers by distance ratio
    const std::array<int, 4> tier_order = {ord_dis, std::max(2, ord_dis - 1),
                                           std::max(2, ord_dis - 2), 2};
    for (int k = 0; k < 4; ++k)
        rule_dis[k] = &cached_pair_rule(PairKind::disjoint, tier_order[k], s);

    const int threads = resolve_threads(cfg.threads);
    std::vector<Eigen::MatrixXd> partial(threads);

    parallel_blocks(n_tri, threads, [&](int w, long long lo, long long hi) {
        Eigen::MatrixXd& A = partial[w];
        A = Eigen::MatrixXd::Zero(n_dof, n_dof);
        double local[6][6];
        int dofs[6];

        for (long long a = lo; a < hi; ++a) {
            for (int b = static_cast<int>(a); b < n_tri; ++b) {
                const PairSetup setup = classify_pair(mesh.triangle(a), mesh.triangle(b));
                const PairRule* rule = nullptr;
                if (b == static_cast<int>(a)) {
                    rule = &rule_id;
                } else if (setup.shared == 2) {
                    rule = &rule_edge;
                } else if (setup.shared == 1) {
                    rule = &rule_vtx;
                } else {
                    const double gap = std::max(
                        0.0, distance(el[a].center, el[b].center) - el[a].radius - el[b].radius);
                    const double tau = gap / std::max(el[a].h, el[b].h);
                    rule = rule_dis[tau < 2.0 ? 0 : (tau < 4.0 ? 1 : (tau < 8.0 ? 2 : 3))];
                }

                const int nu = 6 - setup.shared - (b == static_cast<int>(a) ? 3 : 0);
                for (int i = 0; i < nu; ++i)
                    for (int j = 0; j < nu; ++j) local[i][j] = 0.0;

                const auto& ca = el[a].c;
                const auto& cb = el[b].c;
                const auto& pa = setup.pa;
                const auto& pb = setup.pb;
                const int n_nodes = rule->size();
                for (int q = 0; q < n_nodes; ++q) {
                    const auto& nd = rule->nodes[q];
                    const double la0 = 1.0 - nd[0] - nd[1];
                    const double lb0 = 1.0 - nd[2] - nd[3];
                    const Point x{la0 * ca[pa[0]].x + nd[0] * ca[pa[1]].x + nd[1] * ca[pa[2]].x,
                                  la0 * ca[pa[0]].y + nd[0] * ca[pa[1]].y + nd[1] * ca[pa[2]].y};
                    const Point y{lb0 * cb[pb[0]].x + nd[2] * cb[pb[1]].x + nd[3] * cb[pb[2]].x,
                                  lb0 * cb[pb[0]].y + nd[2] * cb[pb[1]].y + nd[3] * cb[pb[2]].y};
                    const double r2 = norm_sq(x - y);
                    // extreme corner nodes of the substituted rules can hit
                    // catastrophic cancellation; their true contribution is
                    // below 1e-16 relative
                    if (r2 < 1e-280) continue;
                    const double kw = rule->weights[q] * std::pow(r2, -1.0 - s);

                    // d[k] = phi_k(x) - phi_k(y) over the union vertex list
                    double d[6];
                    if (b == static_cast<int>(a)) {
                        d[0] = la0 - lb0;
                        d[1] = nd[0] - nd[2];
                        d[2] = nd[1] - nd[3];
                    } else {
                        const double la[3] = {la0, nd[0], nd[1]};
                        const double lb[3] = {lb0, nd[2], nd[3]};
                        for (int i = 0; i < nu; ++i) d[i] = 0.0;
                        for (int i = 0; i < 3; ++i) d[i] += la[i];
                        for (int j = 0; j < 3; ++j) {
                            const int idx = j < setup.shared ? j : 3 + (j - setup.shared);
                            d[idx] -= lb[j];
                        }
                    }
                    for (int i = 0; i < nu; ++i) {
                        const double dik = kw * d[i];
                        for (int j = i; j < nu; ++j) local[i][j] += dik * d[j];
                    }
                }

                const double scale =
                    4.0 * el[a].area * el[b].area * (b == static_cast<int>(a) ? 1.0 : 2.0);

                // union global dofs: permuted vertices of a, then non-shared of b
                if (b == static_cast<int>(a)) {
                    for (int i = 0; i < 3; ++i)
                        dofs[i] = mesh.dof_of_vertex(mesh.triangle(a).v[pa[i]]);
                } else {
                    for (int i = 0; i < 3; ++i)
                        dofs[i] = mesh.dof_of_vertex(mesh.triangle(a).v[pa[i]]);
                    for (int j = setup.shared; j < 3; ++j)
                        dofs[3 + (j - setup.shared)] =
                            mesh.dof_of_vertex(mesh.triangle(b).v[pb[j]]);
                }
                for (int i = 0; i < nu; ++i) {
                    if (dofs[i] < 0) continue;
                    for (int j = i; j < nu; ++j) {
                        if (dofs[j] < 0) continue;
                        const double v = scale * local[i][j];
                        A(dofs[i], dofs[j]) += v;
                        if (i != j) A(dofs[j], dofs[i]) += v;
                    }
                }
            }
        }
    });

    StiffnessMatrix out;
    out.s = s;
    out.cds = cds;
    out.A = Eigen::MatrixXd::Zero(n_dof, n_dof);
    for (const auto& p : partial) out.A += p;
    out.A *= 0.5 * cds;

    if (cfg.include_complement) {
        // 2 * (C/2) * int phi_i phi_j kappa
        const KappaEvaluator kappa(mesh, s, scaled_order(cfg.boundary_edge_order, cfg.order_scale));
        const int klayers = std::clamp(static_cast<int>(std::lround(cfg.kappa_layers * cfg.order_scale)), 2, 10);
        const int korder = scaled_order(cfg.kappa_order, cfg.order_scale);
        const GradedRuleSquare graded =
            graded_square_rule(klayers, cfg.kappa_ratio, korder, 0.0);
        const RuleTriangle plain_far = plain_triangle_rule(std::max(2, korder - 1));
        const RuleTriangle plain_near = plain_triangle_rule(korder + 1);
        const auto segs = boundary_segments(mesh);

        std::vector<Eigen::MatrixXd> kpartial(threads);
        parallel_blocks(n_tri, threads, [&](int w, long long lo, long long hi) {
            Eigen::MatrixXd& K = kpartial[w];
            K = Eigen::MatrixXd::Zero(n_dof, n_dof);
            for (long long t = lo; t < hi; ++t) {
                double bdist = 1e300;
                for (const auto& seg : segs)
                    bdist = std::min(bdist, segment_distance(el[t].center, seg.a, seg.b));
                const RuleTriangle* rule = &plain_far;
                RuleTriangle graded_rule;
                if (el[t].touches_boundary) {
                    graded_rule = duffy_to_triangle(graded, el[t].c);
                    rule = &graded_rule;
                } else if (bdist < 2.0 * el[t].h) {
                    rule = &plain_near;
                }
                double loc[3][3] = {};
                for (int q = 0; q < rule->size(); ++q) {
                    const auto& l = rule->bary[q];
                    // nodes collapsed onto the element boundary (possible at
                    // the Duffy corner) carry negligible mass and would hit
                    // the boundary blow-up guard
                    if (std::min({l[0], l[1], l[2]}) < 1e-9) continue;
                    const Point x = rule->map(q, el[t].c);
                    const double kv = rule->weights[q] * kappa(x);
                    for (int i = 0; i < 3; ++i)
                        for (int j = i; j < 3; ++j) loc[i][j] += kv * l[i] * l[j];
                }
                for (int i = 0; i < 3; ++i) {
                    const int di = mesh.dof_of_vertex(mesh.triangle(t).v[i]);
                    if (di < 0) continue;
                    for (int j = i; j < 3; ++j) {
                        const int dj = mesh.dof_of_vertex(mesh.triangle(t).v[j]);
                        if (dj < 0) continue;
                        const double v = cds * el[t].area * loc[i][j];
                        K(di, dj) += v;
                        if (i != j) K(dj, di) += v;
                    }
                }
            }
        });
        for (const auto& p : kpartial) out.A += p;
    }
    return out;
}

Eigen::VectorXd assemble_load(const Mesh& mesh, const Rhs& f,
                              const std::vector<DiscontinuityLine>& lines) {
    Eigen::VectorXd F = Eigen::VectorXd::Zero(mesh.n_dofs());
    const RuleTriangle rule = plain_triangle_rule(4);

    for (int t = 0; t < mesh.n_triangles(); ++t) {
        const auto c = mesh.corners(t);
        const double area = mesh.area(t);

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

        double loc[3] = {0.0, 0.0, 0.0};
        if (!straddles) {
            for (int q = 0; q < rule.size(); ++q) {
                const Point x = rule.map(q, c);
                const double fv = rule.weights[q] * f(x);
                for (int i = 0; i < 3; ++i) loc[i] += fv * rule.bary[q][i];
            }
            for (int i = 0; i < 3; ++i) loc[i] *= area;
        } else {
            // clip into sub-polygons on which f is smooth (constant), then
            // integrate hat functions exactly on a fan triangulation
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
            for (const auto& poly : pieces) {
                for (size_t k = 1; k + 1 < poly.size(); ++k) {
                    const std::array<Point, 3> sub = {poly[0], poly[k], poly[k + 1]};
                    const double sub_area = std::abs(signed_area(sub[0], sub[1], sub[2]));
                    if (sub_area < 1e-30) continue;
                    const Point mid{(sub[0].x + sub[1].x + sub[2].x) / 3.0,
                                    (sub[0].y + sub[1].y + sub[2].y) / 3.0};
                    const double fv = f(mid);  // constant on the piece
                    if (fv == 0.0) continue;
                    // exact integral of each (affine) hat over the sub-triangle
                    for (int i = 0; i < 3; ++i) {
                        double mean = 0.0;
                        for (const auto& p : sub) mean += barycentric(p, c[0], c[1], c[2])[i];
                        loc[i] += fv * sub_area * mean / 3.0;
                    }
                }
            }
        }
        for (int i = 0; i < 3; ++i) {
            const int di = mesh.dof_of_vertex(mesh.triangle(t).v[i]);
            if (di >= 0) F(di) += loc[i];
        }
    }
    return F;
}

}  // namespace fraclap
