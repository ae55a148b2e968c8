#pragma once

#include <span>
#include <vector>

#include "bstable/analytic.hpp"

namespace bstable {

/// Convex hull in counter-clockwise order, collinear points dropped.
/// Degenerate inputs give one or two vertices.
std::vector<ShapePoint> convex_hull(std::vector<ShapePoint> points);

/// Closed membership test (boundary counts as inside). `hull` must come from convex_hull.
bool hull_contains(std::span<const ShapePoint> hull, ShapePoint pt, double eps = 1e-12);

/// Membership in conv(points) + [0, inf)^2, i.e. some convex combination of the points
/// is componentwise <= pt. Used when the unobserved atoms extend the hull up and right.
bool upper_closure_contains(std::span<const ShapePoint> points, ShapePoint pt, double eps = 1e-12);

}  // namespace bstable
