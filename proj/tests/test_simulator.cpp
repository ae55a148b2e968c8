#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "bstable/analytic.hpp"
#include "bstable/simulator.hpp"
#include "bstable/stats.hpp"

using namespace bstable;

namespace {

NormalizedLambda two_atoms(double alpha) {
    return normalize_lambda(LambdaSpec({{1.0, Config({1.0, 3.0})}}), Alpha(alpha));
}

std::vector<double> counts(const NormalizedLambda& m, const Window& w, double t, double x,
                           int replicas, std::uint64_t seed) {
    std::vector<double> out;
    for (int r = 0; r < replicas; ++r) {
        out.push_back(static_cast<double>(count_cdf(simulate_population(m, w, derive_seed(seed, r)), t, x)));
    }
    return out;
}

}  // namespace

TEST_CASE("reproduction rate examples") {
    const ReproductionSampler s(unit_atom_model(Alpha(1)));
    CHECK(s.rate(1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.rate(0.0) == 0.0);
    CHECK(s.rate(-1.0) == 0.0);
    SplitMix64 rng(1);
    CHECK_FALSE(sample_reproduction_event(unit_atom_model(Alpha(1)), 0.0, rng).has_value());
    const auto ev = sample_reproduction_event(unit_atom_model(Alpha(1)), 1.0, rng);
    REQUIRE(ev.has_value());
    CHECK(ev->rate == doctest::Approx(1.0));
    CHECK(ev->dilation_y > 0.0);
    // Normalized unit atom for alpha=2 sits at Gamma(2)^{1/2} = 1, so r = 1 and R = b^2/2.
    CHECK(ReproductionSampler(unit_atom_model(Alpha(2))).rate(2.0) == doctest::Approx(2.0));
}

TEST_CASE("nearest child always fits the budget") {
    const NormalizedLambda m = two_atoms(1.0);
    const ReproductionSampler s(m);
    SplitMix64 rng(5);
    const double first = m.spec().entries()[0].config.first();
    for (int i = 0; i < 10000; ++i) {
        const double budget = 0.1 + 0.001 * i;
        const ReproductionEvent ev = s.sample(budget, rng);
        CHECK(ev.dilation_y * first <= budget);
    }
}

TEST_CASE("event y has the power law on (0, Y]") {
    const NormalizedLambda m = unit_atom_model(Alpha(0.5));
    const ReproductionSampler s(m);
    SplitMix64 rng(11);
    const double budget = 2.0;
    const double cap = budget / m.spec().entries()[0].config.first();
    std::vector<double> ys;
    for (int i = 0; i < 20000; ++i) ys.push_back(s.sample(budget, rng).dilation_y);
    const auto ks = ks_test(ys, [&](double y) { return y <= 0 ? 0.0 : std::min(1.0, std::sqrt(y / cap)); });
    CHECK(ks.p_value > 0.001);
}

TEST_CASE("threshold rule keeps 0.9 and discards 2.7 for offsets (1,3) with room 2") {
    // Siblings share parent and birth time; the second sits at 3x the first offset,
    // and a lone child means the second offset overflowed the budget.
    const NormalizedLambda m(LambdaSpec({{0.75, Config({1.0, 3.0})}}), Alpha(1), 1.0);
    const Window w(3.0, 2.0);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const Population pop = simulate_population(m, w, seed);
        std::map<std::pair<AtomId, double>, std::vector<double>> families;
        for (const auto& a : pop.atoms()) {
            if (a.parent != kNoParent) families[{a.parent, a.birth_time}].push_back(a.position);
        }
        for (const auto& [key, pos] : families) {
            const double p = pop.atom(key.first).position;
            const double budget = w.x_max - p;
            const double off = pos.front() - p;
            if (pos.size() == 2) {
                CHECK(pos[1] - p == doctest::Approx(3.0 * off).epsilon(1e-9));
                CHECK(3.0 * off <= budget + 1e-12);
            } else {
                REQUIRE(pos.size() == 1);
                CHECK(3.0 * off > budget);
            }
        }
    }
}

TEST_CASE("tiny window gives the root alone") {
    const Population pop = simulate_population(unit_atom_model(Alpha(1)), Window(1.0, 1e-300), 3);
    CHECK(pop.size() == 1);
    CHECK(count_cdf(pop, 1.0, 1e-300) == 1);
    CHECK_FALSE(pop.validate().has_value());
    const auto lin = lineage(pop, 0);
    REQUIRE(lin.size() == 1);
    CHECK(lin[0].birth_time == 0.0);
    CHECK(lin[0].position == 0.0);
}

TEST_CASE("structural invariants on random models") {
    std::mt19937_64 gen(2024);
    std::uniform_real_distribution<double> off(0.1, 3.0), al(0.3, 2.5);
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<LambdaEntry> entries;
        for (int j = 0; j < 1 + trial % 3; ++j) {
            std::vector<double> xs;
            for (int k = 0; k < 1 + (trial + j) % 4; ++k) xs.push_back(off(gen));
            entries.push_back({0.5 + j, Config(xs)});
        }
        const NormalizedLambda m = normalize_lambda(LambdaSpec(entries), Alpha(al(gen)));
        const Population pop = simulate_population(m, Window(1.0, 2.0), trial);
        CHECK_FALSE(pop.validate().has_value());
        CHECK(count_cdf(pop, 1.0, 0.0) == 1);
        CHECK(count_cdf(pop, 0.5, 1.0) <= count_cdf(pop, 1.0, 1.0));
        CHECK(count_cdf(pop, 1.0, 1.0) <= count_cdf(pop, 1.0, 2.0));
        for (const auto& a : pop.atoms()) {
            const auto lin = lineage(pop, a.id);
            REQUIRE(lin.size() == a.generation + 1);
            for (std::size_t i = 1; i < lin.size(); ++i) {
                CHECK(lin[i].birth_time > lin[i - 1].birth_time);
                CHECK(lin[i].position > lin[i - 1].position);
            }
        }
    }
}

TEST_CASE("count_cdf refuses points outside the window") {
    const Population pop = simulate_population(unit_atom_model(Alpha(1)), Window(1.0, 1.0), 1);
    CHECK_THROWS_AS(count_cdf(pop, 1.5, 0.5), std::out_of_range);
    CHECK_THROWS_AS(count_cdf(pop, 0.5, 1.5), std::out_of_range);
    CHECK_THROWS_AS(lineage(pop, static_cast<AtomId>(pop.size())), std::out_of_range);
}

TEST_CASE("simulation is deterministic in the seed") {
    const NormalizedLambda m = two_atoms(1.0);
    const Population a = simulate_population(m, Window(1.0, 3.0), 77);
    const Population b = simulate_population(m, Window(1.0, 3.0), 77);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.atoms()[i].birth_time == b.atoms()[i].birth_time);
        CHECK(a.atoms()[i].position == b.atoms()[i].position);
        CHECK(a.atoms()[i].parent == b.atoms()[i].parent);
    }
}

TEST_CASE("atom cap flags the population and statistics refuse it") {
    SimulationCaps caps;
    caps.max_atoms = 5;
    const Population pop = simulate_population(unit_atom_model(Alpha(1)), Window(1.0, 20.0), 1, caps);
    CHECK(pop.truncated());
    CHECK(pop.size() == 5);
    CHECK_THROWS_AS(pop.require_complete(), PopulationError);
    CHECK_THROWS_AS(martingale_W(pop, 1.0, 1.0), PopulationError);
}

TEST_CASE("mean of S_1([0,1]) matches phi(1,1,1)") {
    const auto c = counts(unit_atom_model(Alpha(1)), Window(1.0, 1.0), 1.0, 1.0, 20000, 99);
    const Estimate e = summarize(c);
    CHECK(std::abs(e.mean - 2.2795853023360673) <= 3.0 * e.std_error);
}

TEST_CASE("generation-1 strip count has mean 1 at alpha=1") {
    std::vector<double> g1;
    for (int r = 0; r < 20000; ++r) {
        const Population pop = simulate_population(unit_atom_model(Alpha(1)), Window(1.0, 1.0), derive_seed(5, r));
        g1.push_back(static_cast<double>(generation_count(pop, 1, 1.0, 1.0)));
    }
    const Estimate e = summarize(g1);
    CHECK(std::abs(e.mean - 1.0) <= 3.0 * e.std_error);
}

TEST_CASE("martingale tail bias bound") {
    const double b = martingale_tail_bias_bound(Alpha(1), 1.0, 1.0, 20.0);
    CHECK(b == doctest::Approx(2.029117e-7).epsilon(1e-5));
    CHECK(b < 1e-6);
    CHECK(martingale_tail_bias_bound(Alpha(1), 1.0, 1.0, 40.0) < b);
    const Population pop = simulate_population(unit_atom_model(Alpha(1)), Window(1.0, 20.0), 4);
    const MartingaleValue w = martingale_W(pop, 1.0, 1.0);
    CHECK(w.value >= std::exp(-1.0));
    CHECK(w.tail_bias_bound == doctest::Approx(b));
}

TEST_CASE("dilation maps (0.5, 1) to (0.25, 2) for c=2, alpha=1") {
    const NormalizedLambda m = unit_atom_model(Alpha(1));
    std::vector<AtomRecord> atoms{{0, kNoParent, 0, 0.0, 0.0}, {1, 0, 1, 0.5, 1.0}};
    const Population pop(atoms, Window(1.0, 2.0), 0, m);
    const Population d = dilate_population(pop, 2.0);
    CHECK(d.atoms()[1].birth_time == doctest::Approx(0.25));
    CHECK(d.atoms()[1].position == doctest::Approx(2.0));
    CHECK(d.window().t_max == doctest::Approx(0.5));
    CHECK(d.window().x_max == doctest::Approx(4.0));
    const Population same = dilate_population(pop, 1.0);
    CHECK(same.atoms()[1].birth_time == 0.5);
    CHECK(same.atoms()[1].position == 1.0);
}

TEST_CASE("minimal position of generation n") {
    const NormalizedLambda m = unit_atom_model(Alpha(1));
    const Population pop = simulate_population(m, Window(1.0, 5.0), 8);
    CHECK(min_position_generation_n(pop, 0) == 0.0);
    const Population root = simulate_population(m, Window(1.0, 1e-300), 8);
    CHECK_FALSE(min_position_generation_n(root, 1).has_value());
    const Population short_window = simulate_population(m, Window(0.5, 5.0), 8);
    CHECK_THROWS_AS(min_position_generation_n(short_window, 1), std::out_of_range);
}

TEST_CASE("first atom law") {
    // P(no non-root atom in (0, a] by t=1) = exp(-a) for the unit atom at alpha=1.
    std::vector<double> first;
    for (int r = 0; r < 5000; ++r) {
        const Population pop = simulate_population(unit_atom_model(Alpha(1)), Window(1.0, 15.0), derive_seed(21, r));
        double best = std::numeric_limits<double>::infinity();
        for (const auto& a : pop.atoms()) {
            if (a.parent != kNoParent) best = std::min(best, a.position);
        }
        first.push_back(best);
    }
    const auto ks = ks_test_censored(first, [](double a) { return 1.0 - std::exp(-a); }, 15.0);
    CHECK(ks.p_value > 0.001);
}

TEST_CASE("truncation does not change the law of counts inside the window") {
    const NormalizedLambda m = two_atoms(1.0);
    const auto a = counts(m, Window(1.0, 1.5), 1.0, 1.5, 3000, 1);
    const auto b = counts(m, Window(1.0, 3.0), 1.0, 1.5, 3000, 2);
    CHECK(ks_two_sample(a, b).p_value > 0.001);
}

TEST_CASE("atom csv round trip reproduces count_cdf") {
    const NormalizedLambda m = two_atoms(0.7);
    const Population pop = simulate_population(m, Window(1.0, 2.5), 31);
    std::stringstream ss;
    write_atom_csv_header(ss);
    write_atom_csv(ss, pop, 4);
    const auto parsed = read_atom_csv(ss);
    REQUIRE(parsed.count(4) == 1);
    const Population back(parsed.at(4), pop.window(), pop.seed(), m);
    REQUIRE(back.size() == pop.size());
    CHECK_FALSE(back.validate().has_value());
    for (double t : {0.2, 0.5, 1.0}) {
        for (double x : {0.3, 1.0, 2.5}) CHECK(count_cdf(back, t, x) == count_cdf(pop, t, x));
    }
    std::stringstream bad("nope\n");
    CHECK_THROWS(read_atom_csv(bad));
}
