#include <doctest.h>

#include <cmath>
#include <sstream>

#include "bstable/analytic.hpp"
#include "bstable/harness.hpp"

using namespace bstable;

namespace {

const NormalizedLambda unit = unit_atom_model(Alpha(1));

}  // namespace

TEST_CASE("verdict aggregation") {
    ExperimentReport r;
    CHECK(r.verdict() == Verdict::pass);
    r.checks.push_back({"soft", 0, 0, 0, "x", Verdict::fail, false});
    CHECK(r.verdict() == Verdict::pass);
    r.checks.push_back({"maybe", 0, 0, 0, "x", Verdict::inconclusive, true});
    CHECK(r.verdict() == Verdict::inconclusive);
    r.checks.push_back({"hard", 0, 0, 0, "x", Verdict::fail, true});
    CHECK(r.verdict() == Verdict::fail);
    CHECK(r.check("hard").name == "hard");
    CHECK_THROWS(r.check("missing"));
}

TEST_CASE("mean and KS checks embed their rules") {
    const Check c = mean_check("m", Estimate{1.05, 0.02, 100, 1}, 1.0, 0.0);
    CHECK(c.verdict == Verdict::pass);
    CHECK(c.rule.find("3") != std::string::npos);
    CHECK(mean_check("m", Estimate{1.1, 0.02, 100, 1}, 1.0).verdict == Verdict::fail);
    CHECK(mean_check("m", Estimate{1.1, 0.02, 100, 1}, 1.0, 0.05).verdict == Verdict::pass);
    CHECK(ks_check("k", KsResult{0.1, 0.02, 100}).verdict == Verdict::pass);
    CHECK(ks_check("k", KsResult{0.1, 0.005, 100}).verdict == Verdict::fail);
}

TEST_CASE("parallel_map is schedule invariant") {
    std::function<double(std::uint64_t)> fn = [](std::uint64_t i) { return std::sqrt(static_cast<double>(i)); };
    const auto a = parallel_map<double>(1000, 1, fn);
    const auto b = parallel_map<double>(1000, 7, fn);
    CHECK(a == b);
    std::function<int(std::uint64_t)> bad = [](std::uint64_t i) -> int {
        if (i == 17) throw std::runtime_error("boom");
        return 0;
    };
    CHECK_THROWS_AS(parallel_map<int>(100, 3, bad), std::runtime_error);
}

TEST_CASE("reports are deterministic apart from the runtime") {
    RunOptions one, four;
    four.threads = 4;
    const auto a = verify_mean_cdf(unit, 1.0, 1.0, 2000, 42, one);
    const auto b = verify_mean_cdf(unit, 1.0, 1.0, 2000, 42, four);
    CHECK(to_json(a, false).dump() == to_json(b, false).dump());
    std::ostringstream ca, cb;
    write_replica_csv(ca, a);
    write_replica_csv(cb, b);
    CHECK(ca.str() == cb.str());
    const auto c = verify_mean_cdf(unit, 1.0, 1.0, 2000, 43, one);
    CHECK(to_json(a, false).dump() != to_json(c, false).dump());
    CHECK(to_json(a, true).contains("runtime_seconds"));
    CHECK_FALSE(to_json(a, false).contains("runtime_seconds"));
}

TEST_CASE("verify_mean_cdf references") {
    const auto r = verify_mean_cdf(unit, 1.0, 1.0, 20000, 7);
    CHECK(r.checks.front().reference == doctest::Approx(2.2795853023).epsilon(1e-10));
    CHECK(r.verdict() == Verdict::pass);
    const auto tiny = verify_mean_cdf(unit, 1.0, 1e-12, 100, 7);
    CHECK(tiny.checks.front().reference == doctest::Approx(1.0));
    CHECK(tiny.checks.front().statistic == 1.0);
    CHECK(tiny.verdict() == Verdict::pass);
    const auto two = verify_mean_cdf(unit_atom_model(Alpha(2)), 1.0, 1.0, 5000, 7);
    CHECK(two.checks.front().reference == doctest::Approx(wright_phi(2, 1, 1).value));
}

TEST_CASE("infeasible runs are refused before simulating") {
    RunOptions opts;
    opts.max_atoms = 1000;
    try {
        verify_mean_cdf(unit, 1.0, 30.0, 10, 1, opts);
        FAIL("expected refusal");
    } catch (const InfeasibleRun& e) {
        CHECK(e.expected_count > 1000);
    }
}

TEST_CASE("small experiments pass") {
    CHECK(verify_intensity(unit, {1, 2}, 1.0, 1.0, 5000, 3).verdict() == Verdict::pass);
    CHECK(verify_first_atom(unit, 1.0, 3000, 3).verdict() == Verdict::pass);
    CHECK(verify_martingale(unit, {1.0, 2.0}, 1.0, 3000, 3).verdict() == Verdict::pass);
    CHECK(scaling_invariance(unit, {0.5, 2.0}, 1.0, 1.0, 2000, 3).verdict() == Verdict::pass);
    CHECK(verify_many_to_one(unit, {1, 2}, 3000, 3000, 3).verdict() == Verdict::pass);
    CHECK(truncation_exactness(unit, 1.0, 1.0, 2000, 3).verdict() == Verdict::pass);
}

TEST_CASE("first atom with a vanishing time is censored") {
    const auto r = verify_first_atom(unit, 1e-9, 200, 5, 1.0);
    const auto& rows = r.replica_rows;
    std::size_t censored = 0;
    for (const auto& row : rows) censored += std::isinf(row[0]) ? 1 : 0;
    CHECK(censored == rows.size());
}

TEST_CASE("martingale at large theta is the root term") {
    const auto r = verify_martingale(unit, {50.0}, 1.0, 100, 5);
    // Only children very close to 0 contribute at theta = 50, so most replicas see the root alone.
    int root_only = 0;
    for (const auto& row : r.replica_rows) {
        CHECK(row[0] >= std::exp(-1.0 / 50.0) * (1 - 1e-12));
        root_only += row[0] == doctest::Approx(std::exp(-1.0 / 50.0)).epsilon(1e-9) ? 1 : 0;
    }
    CHECK(root_only >= 50);
}

TEST_CASE("T2 exact finite-t means at t=8, a=6") {
    const auto r = verify_T2_window(unit, {8.0}, 6.0, 10, 1);
    const auto& per_t = r.diagnostics["per_t"][0];
    CHECK(per_t["exact_window_mean"].get<double>() == doctest::Approx(1.0076245742).epsilon(1e-9));
    CHECK(per_t["exact_full_mean"].get<double>() == doctest::Approx(0.2843817371).epsilon(1e-9));
    CHECK(r.diagnostics["limit_window"].get<double>() == doctest::Approx(0.9975212478).epsilon(1e-9));
    CHECK(r.diagnostics["limit_full"].get<double>() == doctest::Approx(0.2820947918).epsilon(1e-9));
}

TEST_CASE("T2 at a tiny time is inconclusive") {
    const auto r = verify_T2_window(unit, {0.1}, 6.0, 50, 1);
    CHECK(r.verdict() == Verdict::inconclusive);
}

TEST_CASE("min position refuses heavy censoring") {
    CHECK_THROWS_AS(min_position_experiment(unit, {8}, 50, 10.0, 1), InfeasibleRun);
    const auto r = min_position_experiment(unit, {2, 3}, 300, 12.0, 1);
    CHECK(r.diagnostics["per_n"][0].contains("exact_median"));
    CHECK(r.diagnostics["c_alpha"].get<double>() == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("convex hull experiment") {
    const auto root = convex_hull_experiment(unit, 0, 0.5 * c_alpha_const(Alpha(1)), 5, 1);
    // The closed-upward hull of the root alone is the whole quadrant.
    CHECK(root.checks[0].statistic == 1.0);
    CHECK(root.checks[1].statistic == 1.0);
    CHECK(root.check("probe (1, c_alpha+eta) region").verdict == Verdict::pass);
    CHECK(root.check("probe (1, c_alpha-eta) region").verdict == Verdict::pass);
    const auto small = convex_hull_experiment(unit, 6, 0.5 * c_alpha_const(Alpha(1)), 100, 1);
    CHECK(small.parameters["sampler"] == "reduced_tree");
    const double lower = small.diagnostics["single_atom_domination_probability"].get<double>();
    CHECK(small.checks[0].statistic >= lower - 0.15);
    const NormalizedLambda pair = normalize_lambda(LambdaSpec({{1.0, Config({1.0, 2.0})}}), Alpha(1));
    const auto full = convex_hull_experiment(pair, 3, 0.5 * c_alpha_const(Alpha(1)), 50, 1);
    CHECK(full.parameters["sampler"] == "full_population");
    CHECK(largest_feasible_hull_n(unit, 0.068, 200, 1e8) >= 25);
    CHECK(largest_feasible_hull_n(pair, 0.068, 200, 1e8) < 25);
}

TEST_CASE("experiment names") {
    CHECK(experiment_names().size() == 10);
}
