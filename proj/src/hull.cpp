#include "bstable/hull.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace bstable {

namespace {

double cross(const ShapePoint& o, const ShapePoint& a, const ShapePoint& b) {
    return (a.p - o.p) * (b.q - o.q) - (a.q - o.q) * (b.p - o.p);
}

bool on_segment(const ShapePoint& a, const ShapePoint& b, const ShapePoint& pt, double eps) {
    const double len = std::hypot(b.p - a.p, b.q - a.q);
    if (std::abs(cross(a, b, pt)) > eps * std::max(1.0, len)) return false;
    return pt.p >= std::min(a.p, b.p) - eps && pt.p <= std::max(a.p, b.p) + eps &&
           pt.q >= std::min(a.q, b.q) - eps && pt.q <= std::max(a.q, b.q) + eps;
}

}  // namespace

std::vector<ShapePoint> convex_hull(std::vector<ShapePoint> pts) {
    std::sort(pts.begin(), pts.end(), [](const ShapePoint& a, const ShapePoint& b) {
        return a.p < b.p || (a.p == b.p && a.q < b.q);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const ShapePoint& a, const ShapePoint& b) {
                              return a.p == b.p && a.q == b.q;
                          }),
              pts.end());
    if (pts.size() < 3) return pts;

    // Andrew's monotone chain.
    std::vector<ShapePoint> h(2 * pts.size());
    std::size_t k = 0;
    for (const auto& pt : pts) {
        while (k >= 2 && cross(h[k - 2], h[k - 1], pt) <= 0.0) --k;
        h[k++] = pt;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
        h[k++] = pts[i];
    }
    h.resize(k - 1);
    return h;
}

bool hull_contains(std::span<const ShapePoint> hull, ShapePoint pt, double eps) {
    if (hull.empty()) return false;
    if (hull.size() == 1) {
        return std::abs(hull[0].p - pt.p) <= eps && std::abs(hull[0].q - pt.q) <= eps;
    }
    if (hull.size() == 2) return on_segment(hull[0], hull[1], pt, eps);
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const ShapePoint& a = hull[i];
        const ShapePoint& b = hull[(i + 1) % hull.size()];
        const double len = std::hypot(b.p - a.p, b.q - a.q);
        if (cross(a, b, pt) < -eps * std::max(1.0, len)) return false;
    }
    return true;
}

bool upper_closure_contains(std::span<const ShapePoint> points, ShapePoint pt, double eps) {
    if (points.empty()) return false;
    std::vector<ShapePoint> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const ShapePoint& a, const ShapePoint& b) {
        return a.p < b.p || (a.p == b.p && a.q < b.q);
    });
    if (pts.front().p > pt.p + eps) return false;

    // Lower hull g(p); the closure contains pt iff min_{p' <= pt.p} g(p') <= pt.q,
    // and g is convex so vertices plus the end point suffice.
    std::vector<ShapePoint> lower;
    for (const auto& v : pts) {
        if (!lower.empty() && lower.back().p == v.p) continue;  // sorted by q within equal p
        while (lower.size() >= 2 && cross(lower[lower.size() - 2], lower.back(), v) <= 0.0) {
            lower.pop_back();
        }
        lower.push_back(v);
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < lower.size(); ++i) {
        const ShapePoint& v = lower[i];
        if (v.p <= pt.p) {
            best = std::min(best, v.q);
        } else {
            if (i > 0) {
                const ShapePoint& u = lower[i - 1];
                const double s = (pt.p - u.p) / (v.p - u.p);
                best = std::min(best, u.q + s * (v.q - u.q));
            }
            break;
        }
    }
    return best <= pt.q + eps;
}

}  // namespace bstable
