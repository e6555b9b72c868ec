#ifndef FRACLAP_GEOMETRY_HPP
#define FRACLAP_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <vector>

namespace fraclap {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double norm_sq(Point a) { return a.x * a.x + a.y * a.y; }
inline double distance(Point a, Point b) { return norm(a - b); }

// Signed area of triangle (a,b,c); positive for counter-clockwise order.
inline double signed_area(Point a, Point b, Point c) {
    return 0.5 * cross(b - a, c - a);
}

// Distance from p to the closed segment [a,b].
inline double segment_distance(Point p, Point a, Point b) {
    const Point ab = b - a;
    const double len2 = norm_sq(ab);
    if (len2 == 0.0) return distance(p, a);
    double t = dot(p - a, ab) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return distance(p, a + t * ab);
}

// Parameter of the point on segment [a,b] closest to p, clamped to [0,1].
inline double segment_foot(Point p, Point a, Point b) {
    const Point ab = b - a;
    const double len2 = norm_sq(ab);
    if (len2 == 0.0) return 0.0;
    return std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
}

// Barycentric coordinates of p with respect to (c0,c1,c2).
inline std::array<double, 3> barycentric(Point p, Point c0, Point c1, Point c2) {
    const double a = signed_area(c0, c1, c2);
    const double l0 = signed_area(p, c1, c2) / a;
    const double l1 = signed_area(c0, p, c2) / a;
    return {l0, l1, 1.0 - l0 - l1};
}

inline bool point_in_triangle(Point p, Point c0, Point c1, Point c2, double tol = 1e-12) {
    const auto l = barycentric(p, c0, c1, c2);
    return l[0] >= -tol && l[1] >= -tol && l[2] >= -tol;
}

// Clip a convex polygon against the halfplane {n.(p - q) >= 0}.
inline std::vector<Point> clip_halfplane(const std::vector<Point>& poly, Point q, Point n) {
    std::vector<Point> out;
    const int m = static_cast<int>(poly.size());
    for (int i = 0; i < m; ++i) {
        const Point a = poly[i];
        const Point b = poly[(i + 1) % m];
        const double da = dot(n, a - q);
        const double db = dot(n, b - q);
        if (da >= 0.0) out.push_back(a);
        if ((da > 0.0 && db < 0.0) || (da < 0.0 && db > 0.0)) {
            const double t = da / (da - db);
            out.push_back(a + t * (b - a));
        }
    }
    return out;
}

inline double polygon_area(const std::vector<Point>& poly) {
    double a = 0.0;
    const int m = static_cast<int>(poly.size());
    for (int i = 0; i < m; ++i) a += cross(poly[i], poly[(i + 1) % m]);
    return 0.5 * a;
}

}  // namespace fraclap

#endif
