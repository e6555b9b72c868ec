#include "fraclap/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

namespace fraclap {

Rule1D gauss_legendre(int n) {
    if (n < 1) throw QuadratureError("gauss_legendre: order must be >= 1");
    Rule1D rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    // Newton iteration on P_n over [-1,1], then map to [0,1].
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            if (n == 1) p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        rule.nodes[i] = 0.5 * (1.0 - x);  // descending x -> ascending node
        rule.nodes[n - 1 - i] = 0.5 * (1.0 + x);
        rule.weights[i] = 0.5 * w;
        rule.weights[n - 1 - i] = 0.5 * w;
    }
    return rule;
}

namespace {

// Appends cells covering [0, half] graded towards 0 (K cells); with mirror,
// covers [1-half, 1] graded towards 1 instead.
void append_graded_half(double half, int K, double sigma, const Rule1D& g, double p, bool mirror,
                        Rule1D& out) {
    std::vector<double> breaks(K + 1);
    breaks[0] = 0.0;
    for (int j = 1; j <= K; ++j) breaks[j] = half * std::pow(sigma, K - j);
    auto push = [&](double x, double w) {
        out.nodes.push_back(mirror ? 1.0 - x : x);
        out.weights.push_back(w);
    };
    // innermost cell: power substitution x = b0 * xi^p
    {
        const double b0 = breaks[1];
        for (int i = 0; i < g.size(); ++i) {
            const double xi = g.nodes[i];
            push(b0 * std::pow(xi, p), b0 * p * std::pow(xi, p - 1.0) * g.weights[i]);
        }
    }
    // remaining cells: Gauss in logarithmic coordinates
    for (int j = 1; j < K; ++j) {
        const double a = breaks[j], b = breaks[j + 1];
        const double L = std::log(b / a);
        for (int i = 0; i < g.size(); ++i) {
            const double x = a * std::exp(g.nodes[i] * L);
            push(x, L * x * g.weights[i]);
        }
    }
}

}  // namespace

GradedRuleSquare graded_square_rule(int layers, double ratio, int order, double singular_exponent) {
    if (layers < 1) throw QuadratureError("graded_square_rule: layers must be >= 1");
    if (!(ratio > 0.0 && ratio < 1.0))
        throw QuadratureError("graded_square_rule: ratio must be in (0,1)");
    if (order < 1) throw QuadratureError("graded_square_rule: order must be >= 1");
    if (singular_exponent <= -1.0)
        throw QuadratureError("graded_square_rule: singular exponent must be > -1");

    GradedRuleSquare rule;
    rule.layers = layers;
    rule.ratio = ratio;
    rule.order = order;
    rule.singular_exponent = singular_exponent;

    const Rule1D g = gauss_legendre(order);
    // p capped so nodes stay far from the subnormal range even when the
    // integrand multiplies several node coordinates
    auto endpoint_power = [](double gamma) {
        return std::clamp(2.0 / (1.0 + gamma), 2.0, 64.0);
    };
    auto build_line = [&](double gamma0, double gamma1) {
        Rule1D line;
        if (layers == 1) {
            line = g;
        } else {
            const int kl = (layers + 1) / 2;
            const int kr = layers - kl;
            append_graded_half(0.5, kl, ratio, g, endpoint_power(gamma0), false, line);
            append_graded_half(0.5, kr, ratio, g, endpoint_power(gamma1), true, line);
            // exact partition of unity
            double wsum = 0.0;
            for (double w : line.weights) wsum += w;
            for (double& w : line.weights) w /= wsum;
        }
        return line;
    };
    rule.line = build_line(singular_exponent, singular_exponent);
    // Under the Duffy collapse the first coordinate picks up the Jacobian u,
    // which softens the singular exponent at u = 0 by one; matching the
    // substitution strength avoids wrecking the regular cofactor there.
    const Rule1D line_x =
        layers == 1 ? rule.line : build_line(singular_exponent + 1.0, singular_exponent);

    const int m = rule.line.size();
    rule.x.reserve(m * m);
    rule.y.reserve(m * m);
    rule.w.reserve(m * m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            rule.x.push_back(line_x.nodes[i]);
            rule.y.push_back(rule.line.nodes[j]);
            rule.w.push_back(line_x.weights[i] * rule.line.weights[j]);
        }
    return rule;
}

RuleTriangle duffy_to_triangle(const GradedRuleSquare& rule, const std::array<Point, 3>& tri) {
    if (std::abs(signed_area(tri[0], tri[1], tri[2])) == 0.0)
        throw QuadratureError("duffy_to_triangle: degenerate triangle");
    RuleTriangle out;
    out.bary.reserve(rule.size());
    out.weights.reserve(rule.size());
    for (int i = 0; i < rule.size(); ++i) {
        const double u = rule.x[i], v = rule.y[i];
        out.bary.push_back({1.0 - u, u * (1.0 - v), u * v});
        out.weights.push_back(2.0 * u * rule.w[i]);
    }
    return out;
}

RuleTriangle plain_triangle_rule(int n) {
    const Rule1D g = gauss_legendre(n);
    RuleTriangle out;
    out.bary.reserve(n * n);
    out.weights.reserve(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double u = g.nodes[i], v = g.nodes[j];
            out.bary.push_back({1.0 - u, u * (1.0 - v), u * v});
            out.weights.push_back(2.0 * u * g.weights[i] * g.weights[j]);
        }
    return out;
}

namespace {

// x -> x^q reparametrization of a rule on [0,1]; q=1 is the identity.
Rule1D power_transformed(const Rule1D& g, int q) {
    if (q <= 1) return g;
    Rule1D r;
    r.nodes.resize(g.size());
    r.weights.resize(g.size());
    for (int i = 0; i < g.size(); ++i) {
        const double t = g.nodes[i];
        r.nodes[i] = std::pow(t, q);
        r.weights[i] = g.weights[i] * q * std::pow(t, q - 1.0);
    }
    return r;
}

// Substitution power q for an integrand behaving like t^mu: the transformed
// exponent q(1+mu)-1 must be at least 2.4, and q(1+mu) is made integer when
// possible (Gauss then integrates the leading power exactly; for the s-grid
// of quarters and halves this always succeeds).
int q_for_exponent(double mu) {
    const double target = 2.4;
    auto near_int = [](double v) { return std::abs(v - std::round(v)) < 1e-9; };
    if (mu >= target && near_int(mu)) return 1;
    int fallback = 0;
    for (int q = 1; q <= 12; ++q) {
        const double e = q * (1.0 + mu) - 1.0;
        if (e < target - 1e-12) continue;
        if (!fallback) fallback = q;
        if (near_int(q * (1.0 + mu))) return q;
    }
    return fallback ? fallback : 12;
}

struct HatPair {
    double a1, a2, b1, b2;  // hat coordinates (0 <= x2 <= x1 <= 1) per triangle
};

void push_node(PairRule& rule, const HatPair& h, double w) {
    // hat -> barycentric: (l1, l2) = (x1 - x2, x2)
    rule.nodes.push_back({h.a1 - h.a2, h.a2, h.b1 - h.b2, h.b2});
    rule.weights.push_back(w);
}

PairRule build_identical(int order, double s) {
    const Rule1D g = gauss_legendre(order);
    const Rule1D gx = power_transformed(g, q_for_exponent(3.0 - 2.0 * s));
    const Rule1D g1 = power_transformed(g, q_for_exponent(2.0 - 2.0 * s));
    const Rule1D g2 = power_transformed(g, q_for_exponent(1.0 - 2.0 * s));

    PairRule rule;
    rule.kind = PairKind::identical;
    rule.nodes.reserve(6 * order * order * order * order);
    rule.weights.reserve(rule.nodes.capacity());
    for (int ix = 0; ix < order; ++ix)
        for (int i1 = 0; i1 < order; ++i1)
            for (int i2 = 0; i2 < order; ++i2)
                for (int i3 = 0; i3 < order; ++i3) {
                    const double xi = gx.nodes[ix], e1 = g1.nodes[i1];
                    const double e2 = g2.nodes[i2], e3 = g.nodes[i3];
                    const double w = gx.weights[ix] * g1.weights[i1] * g2.weights[i2] *
                                     g.weights[i3] * xi * xi * xi * e1 * e1 * e2;
                    push_node(rule, {xi, xi * (1 - e1 + e1 * e2), xi * (1 - e1 * e2 * e3), xi * (1 - e1)}, w);
                    push_node(rule, {xi * (1 - e1 * e2 * e3), xi * (1 - e1), xi, xi * (1 - e1 + e1 * e2)}, w);
                    push_node(rule, {xi, xi * e1 * (1 - e2 + e2 * e3), xi * (1 - e1 * e2), xi * e1 * (1 - e2)}, w);
                    push_node(rule, {xi * (1 - e1 * e2), xi * e1 * (1 - e2), xi, xi * e1 * (1 - e2 + e2 * e3)}, w);
                    push_node(rule, {xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), xi, xi * e1 * (1 - e2)}, w);
                    push_node(rule, {xi, xi * e1 * (1 - e2), xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)}, w);
                }
    return rule;
}

PairRule build_edge(int order, double s) {
    const Rule1D g = gauss_legendre(order);
    const Rule1D gx = power_transformed(g, q_for_exponent(3.0 - 2.0 * s));
    const Rule1D g1 = power_transformed(g, q_for_exponent(2.0 - 2.0 * s));

    // The physical distance factors as |x-y| = xi*eta1*|G(eta2,eta3)| with G
    // bounded below (the triangles lie on opposite sides of the shared edge),
    // so only the xi and eta1 directions carry fractional powers. |G|^{-2-2s}
    // has complex zeros moderately close to the (eta2,eta3) square; splitting
    // that square into quadrants doubles the pole distance relative to the
    // cell and squares the geometric convergence rate.
    PairRule rule;
    rule.kind = PairKind::edge;
    rule.nodes.reserve(20 * order * order * order * order);
    rule.weights.reserve(rule.nodes.capacity());
    for (int qa = 0; qa < 2; ++qa)
        for (int qb = 0; qb < 2; ++qb)
            for (int ix = 0; ix < order; ++ix)
                for (int i1 = 0; i1 < order; ++i1)
                    for (int i2 = 0; i2 < order; ++i2)
                        for (int i3 = 0; i3 < order; ++i3) {
                            const double xi = gx.nodes[ix], e1 = g1.nodes[i1];
                            const double e2 = 0.5 * (qa + g.nodes[i2]);
                            const double e3 = 0.5 * (qb + g.nodes[i3]);
                            const double wb = 0.25 * gx.weights[ix] * g1.weights[i1] *
                                              g.weights[i2] * g.weights[i3] * xi * xi * xi * e1 *
                                              e1;
                            const double w = wb * e2;
                            push_node(rule, {xi, xi * e1 * e3, xi * (1 - e1 * e2), xi * e1 * (1 - e2)}, wb);
                            push_node(rule, {xi, xi * e1, xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)}, w);
                            push_node(rule, {xi * (1 - e1 * e2), xi * e1 * (1 - e2), xi, xi * e1 * e2 * e3}, w);
                            push_node(rule, {xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3), xi, xi * e1}, w);
                            push_node(rule, {xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3), xi, xi * e1 * e2}, w);
                        }
    return rule;
}

PairRule build_vertex(int order, double s) {
    const Rule1D g = gauss_legendre(order);
    const Rule1D gx = power_transformed(g, q_for_exponent(3.0 - 2.0 * s));

    PairRule rule;
    rule.kind = PairKind::vertex;
    rule.nodes.reserve(2 * order * order * order * order);
    rule.weights.reserve(rule.nodes.capacity());
    for (int ix = 0; ix < order; ++ix)
        for (int i1 = 0; i1 < order; ++i1)
            for (int i2 = 0; i2 < order; ++i2)
                for (int i3 = 0; i3 < order; ++i3) {
                    const double xi = gx.nodes[ix], e1 = g.nodes[i1];
                    const double e2 = g.nodes[i2], e3 = g.nodes[i3];
                    const double w = gx.weights[ix] * g.weights[i1] * g.weights[i2] *
                                     g.weights[i3] * xi * xi * xi * e2;
                    push_node(rule, {xi, xi * e1, xi * e2, xi * e2 * e3}, w);
                    push_node(rule, {xi * e2, xi * e2 * e3, xi, xi * e1}, w);
                }
    return rule;
}

PairRule build_disjoint(int order) {
    const Rule1D g = gauss_legendre(order);
    PairRule rule;
    rule.kind = PairKind::disjoint;
    rule.nodes.reserve(order * order * order * order);
    rule.weights.reserve(rule.nodes.capacity());
    for (int ix = 0; ix < order; ++ix)
        for (int i1 = 0; i1 < order; ++i1)
            for (int i2 = 0; i2 < order; ++i2)
                for (int i3 = 0; i3 < order; ++i3) {
                    const double xi = g.nodes[ix], e1 = g.nodes[i1];
                    const double e2 = g.nodes[i2], e3 = g.nodes[i3];
                    const double w =
                        g.weights[ix] * g.weights[i1] * g.weights[i2] * g.weights[i3] * xi * e2;
                    push_node(rule, {xi, xi * e1, e2, e2 * e3}, w);
                }
    return rule;
}

}  // namespace

PairRule pair_rule(PairKind kind, int order, double s) {
    if (order < 1) throw QuadratureError("pair_rule: order must be >= 1");
    if (!(s > 0.0 && s < 1.0)) throw QuadratureError("pair_rule: s must be in (0,1)");
    switch (kind) {
        case PairKind::identical: return build_identical(order, s);
        case PairKind::edge: return build_edge(order, s);
        case PairKind::vertex: return build_vertex(order, s);
        case PairKind::disjoint: return build_disjoint(order);
    }
    throw QuadratureError("pair_rule: unknown kind");
}

const PairRule& cached_pair_rule(PairKind kind, int order, double s) {
    static std::mutex mtx;
    static std::map<std::tuple<int, int, long long>, PairRule> cache;
    const auto key = std::make_tuple(static_cast<int>(kind), order, std::llround(s * 1e12));
    std::scoped_lock lock(mtx);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, pair_rule(kind, order, s)).first;
    return it->second;
}

Rule1D near_peak_line_rule(double t0, double d_rel, int order, int max_layers) {
    const Rule1D g = gauss_legendre(order);
    const double d = std::max(d_rel, 1e-14);
    Rule1D out;
    auto add_side = [&](double from, double to) {
        // cells growing geometrically away from `from` towards `to`
        const double len = std::abs(to - from);
        if (len < 1e-15) return;
        const double dir = to > from ? 1.0 : -1.0;
        double lo = 0.0;
        double width = std::min(d, len);
        for (int layer = 0; lo < len && layer < max_layers; ++layer) {
            double hi = std::min(len, lo + width);
            if (layer == max_layers - 1) hi = len;
            for (int i = 0; i < g.size(); ++i) {
                out.nodes.push_back(from + dir * (lo + g.nodes[i] * (hi - lo)));
                out.weights.push_back(g.weights[i] * (hi - lo));
            }
            lo = hi;
            width *= 4.0;
        }
    };
    add_side(t0, 0.0);
    add_side(t0, 1.0);
    return out;
}

}  // namespace fraclap
