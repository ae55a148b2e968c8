#include <doctest.h>

#include <cmath>

#include <boost/math/special_functions/expint.hpp>

#include "bstable/analytic.hpp"
#include "bstable/reduced_tree.hpp"
#include "bstable/simulator.hpp"
#include "bstable/stats.hpp"

using namespace bstable;

TEST_CASE("generation 1 and 2 closed forms") {
    const GenerationVoidTable t(Alpha(1), 3, 50.0);
    for (double z : {1e-6, 0.3, 2.0, 20.0, 50.0}) {
        CHECK(t.log_void(1, z) == doctest::Approx(z).epsilon(1e-12));
        // I_2(z) = z - Ein(z), Ein(z) = E_1(z) + log z + gamma.
        const double ein = boost::math::expint(1, z) + std::log(z) + 0.57721566490153286;
        const double exact = z < 1e-3 ? z * z / 4.0 : z - ein;
        CHECK(t.log_void(2, z) == doctest::Approx(exact).epsilon(1e-7));
    }
    CHECK(t.void_probability(1, 2.0) == doctest::Approx(std::exp(-2.0)));
    CHECK(t.hit_probability(0, 1.0) == 1.0);
    CHECK(std::isinf(t.log_void(0, 1.0)));
    CHECK_THROWS_AS(t.log_void(4, 1.0), std::out_of_range);
    CHECK_THROWS_AS(t.log_void(2, 100.0), std::out_of_range);
}

TEST_CASE("small windows follow the first moment") {
    for (double a : {0.5, 2.0}) {
        const GenerationVoidTable t(Alpha(a), 5, 10.0, 1024);
        for (int n = 1; n <= 5; ++n) {
            const double z = 1e-4;
            const double mean = std::pow(z, n) / (std::tgamma(n + 1.0) * std::tgamma(a * n + 1.0));
            CHECK(t.log_void(n, z) == doctest::Approx(mean).epsilon(1e-3));
        }
    }
}

TEST_CASE("void probabilities match the full simulation") {
    for (double a : {0.5, 1.0, 2.0}) {
        const NormalizedLambda m = unit_atom_model(Alpha(a));
        const double X = 2.0;
        const double z = std::pow(X, a);
        const GenerationVoidTable t(Alpha(a), 3, z, 1024);
        const int reps = 4000;
        for (std::uint32_t n = 1; n <= 3; ++n) {
            double empty = 0;
            for (int r = 0; r < reps; ++r) {
                SimulationCaps caps;
                caps.max_generation = n;
                const Population pop = simulate_population(m, Window(1.0, X), derive_seed(40 + n, r), caps);
                if (generation_count(pop, n, 1.0, X) == 0) empty += 1;
            }
            const double p = t.void_probability(static_cast<int>(n), z);
            const double se = std::sqrt(p * (1 - p) / reps);
            CHECK(std::abs(empty / reps - p) <= 4.0 * se);
        }
    }
}

TEST_CASE("reduced sampler reproduces the mean count and the count law") {
    const double a = 1.0;
    const NormalizedLambda m = unit_atom_model(Alpha(a));
    const int n = 4;
    const double T = 1.0, X = 6.0;
    const GenerationVoidTable t(Alpha(a), n, T * X);
    std::vector<double> reduced, full;
    for (int r = 0; r < 3000; ++r) {
        SplitMix64 rng(derive_seed(70, r));
        const auto atoms = sample_generation_window(t, n, T, X, rng);
        for (const auto& at : atoms) {
            CHECK(at.birth_time <= T);
            CHECK(at.position <= X);
        }
        reduced.push_back(static_cast<double>(atoms.size()));
        SimulationCaps caps;
        caps.max_generation = n;
        const Population pop = simulate_population(m, Window(T, X), derive_seed(71, r), caps);
        full.push_back(static_cast<double>(generation_count(pop, n, T, X)));
    }
    const Estimate e = summarize(reduced);
    const double mean = intensity_mu_n(Alpha(a), n, T, X).cumulative;
    CHECK(std::abs(e.mean - mean) <= 3.0 * e.std_error);
    CHECK(ks_two_sample(reduced, full).p_value > 0.01);
}

TEST_CASE("reduced sampler minimum position matches the full simulation") {
    const double a = 2.0;
    const NormalizedLambda m = unit_atom_model(Alpha(a));
    const int n = 3;
    const double X = 3.0;
    const GenerationVoidTable t(Alpha(a), n, std::pow(X, a), 1024);
    std::vector<double> reduced, full;
    for (int r = 0; r < 3000; ++r) {
        SplitMix64 rng(derive_seed(80, r));
        double best = std::numeric_limits<double>::infinity();
        for (const auto& at : sample_generation_window(t, n, 1.0, X, rng)) best = std::min(best, at.position);
        reduced.push_back(best);
        SimulationCaps caps;
        caps.max_generation = n;
        const Population pop = simulate_population(m, Window(1.0, X), derive_seed(81, r), caps);
        full.push_back(min_position_generation_n(pop, n).value_or(std::numeric_limits<double>::infinity()));
    }
    CHECK(ks_two_sample(reduced, full).p_value > 0.01);
}

TEST_CASE("single-offset detection") {
    CHECK(single_offset_model(unit_atom_model(Alpha(1))));
    CHECK(single_offset_model(normalize_lambda(
        LambdaSpec({{1.0, Config({1.0})}, {2.0, Config({0.5})}}), Alpha(1.5))));
    CHECK_FALSE(single_offset_model(normalize_lambda(LambdaSpec({{1.0, Config({1.0, 2.0})}}), Alpha(1))));
}

TEST_CASE("sampler is deterministic and validates its arguments") {
    const GenerationVoidTable t(Alpha(1), 5, 40.0);
    SplitMix64 r1(9), r2(9);
    const auto a = sample_generation_window(t, 5, 2.0, 20.0, r1);
    const auto b = sample_generation_window(t, 5, 2.0, 20.0, r2);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].position == b[i].position);
    SplitMix64 rng(1);
    CHECK_THROWS_AS(sample_generation_window(t, 6, 1.0, 1.0, rng), std::out_of_range);
    CHECK_THROWS_AS(sample_generation_window(t, 2, 2.0, 30.0, rng), std::out_of_range);
    CHECK_THROWS_AS(sample_generation_window(t, 2, 0.0, 1.0, rng), std::invalid_argument);
}
