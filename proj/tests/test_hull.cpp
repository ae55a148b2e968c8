#include <doctest.h>

#include <random>

#include "bstable/hull.hpp"

using namespace bstable;

TEST_CASE("convex hull of a square with interior and collinear points") {
    const auto h = convex_hull({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}, {0.5, 0}, {0, 0}});
    REQUIRE(h.size() == 4);
    CHECK(hull_contains(h, {0.5, 0.5}));
    CHECK(hull_contains(h, {1.0, 0.5}));
    CHECK(hull_contains(h, {0.0, 0.0}));
    CHECK_FALSE(hull_contains(h, {1.01, 0.5}));
    CHECK_FALSE(hull_contains(h, {-0.1, -0.1}));
}

TEST_CASE("degenerate hulls") {
    const auto one = convex_hull({{0, 0}});
    REQUIRE(one.size() == 1);
    CHECK(hull_contains(one, {0, 0}));
    CHECK_FALSE(hull_contains(one, {0.1, 0}));
    const auto seg = convex_hull({{0, 0}, {1, 1}, {0.5, 0.5}});
    REQUIRE(seg.size() == 2);
    CHECK(hull_contains(seg, {0.25, 0.25}));
    CHECK_FALSE(hull_contains(seg, {0.25, 0.3}));
    CHECK(convex_hull({}).empty());
}

TEST_CASE("upper closure membership") {
    const std::vector<ShapePoint> root{{0, 0}};
    CHECK(upper_closure_contains(root, {1.0, 0.2}));
    CHECK(upper_closure_contains(root, {0.0, 0.0}));
    const std::vector<ShapePoint> pts{{0.2, 1.0}, {1.0, 0.2}};
    CHECK(upper_closure_contains(pts, {0.6, 0.6}));
    CHECK_FALSE(upper_closure_contains(pts, {0.6, 0.55}));
    CHECK(upper_closure_contains(pts, {2.0, 0.2}));
    CHECK_FALSE(upper_closure_contains(pts, {0.1, 5.0}));
    CHECK_FALSE(upper_closure_contains({}, {1.0, 1.0}));
}

TEST_CASE("upper closure agrees with a brute-force pairwise test") {
    // In 2D a point dominates a convex combination iff it dominates a combination of
    // at most two points.
    std::mt19937_64 g(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<ShapePoint> pts;
        for (int i = 0; i < 1 + trial % 9; ++i) pts.push_back({u(g), u(g)});
        const ShapePoint probe{u(g), u(g)};
        bool brute = false;
        for (const auto& a : pts) {
            if (a.p <= probe.p && a.q <= probe.q) brute = true;
            for (const auto& b : pts) {
                for (int k = 0; k <= 2000 && !brute; ++k) {
                    const double l = k / 2000.0;
                    if (l * a.p + (1 - l) * b.p <= probe.p && l * a.q + (1 - l) * b.q <= probe.q) brute = true;
                }
            }
        }
        const bool fast = upper_closure_contains(pts, probe);
        // The grid over lambda can only miss thin slivers, never invent membership.
        if (brute) CHECK(fast);
    }
}
