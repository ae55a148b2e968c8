#include "bstable/spine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace bstable {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt_num(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}
}  // namespace

SpinePath sample_spine(Alpha alpha, std::size_t n, SplitMix64& rng) {
    if (n < 1) throw std::invalid_argument("spine length must be >= 1");
    std::gamma_distribution<double> step(alpha.value(), 1.0);
    SpinePath path;
    path.ages.reserve(n);
    path.positions.reserve(n);
    double age = 1.0;
    double pos = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        age *= uniform_open01(rng);
        pos += step(rng);
        path.ages.push_back(age);
        path.positions.push_back(pos);
    }
    return path;
}

Functional::Functional(std::string name, Fn fn, Support support)
    : name_(std::move(name)), fn_(std::move(fn)), support_(std::move(support)) {}

Functional position_at_most(std::size_t i, double a) {
    if (i < 1) throw std::invalid_argument("lineage indices are 1-based");
    return Functional(
        "1{x_" + std::to_string(i) + "<=" + fmt_num(a) + "}",
        [i, a](std::span<const LineageStep> s) { return s[i - 1].position <= a ? 1.0 : 0.0; },
        [i, a](std::size_t n) { return i == n ? a : kInf; });
}

Functional last_position_at_most(double a) {
    return Functional(
        "1{x_n<=" + fmt_num(a) + "}",
        [a](std::span<const LineageStep> s) { return s.back().position <= a ? 1.0 : 0.0; },
        [a](std::size_t) { return a; });
}

Functional age_at_most(std::size_t i, double b) {
    if (i < 1) throw std::invalid_argument("lineage indices are 1-based");
    return Functional(
        "1{a_" + std::to_string(i) + "<=" + fmt_num(b) + "}",
        [i, b](std::span<const LineageStep> s) { return s[i - 1].age <= b ? 1.0 : 0.0; },
        [](std::size_t) { return kInf; });
}

Functional age_of(std::size_t i) {
    if (i < 1) throw std::invalid_argument("lineage indices are 1-based");
    return Functional(
        "a_" + std::to_string(i),
        [i](std::span<const LineageStep> s) { return s[i - 1].age; },
        [](std::size_t) { return kInf; });
}

Functional constant(double c) {
    return Functional(
        fmt_num(c), [c](std::span<const LineageStep>) { return c; },
        [c](std::size_t) { return c == 0.0 ? 0.0 : kInf; });
}

Functional operator*(const Functional& f, const Functional& g) {
    return Functional(
        f.name() + "*" + g.name(),
        [f, g](std::span<const LineageStep> s) {
            const double a = f(s);
            return a == 0.0 ? 0.0 : a * g(s);
        },
        [f, g](std::size_t n) { return std::min(f.position_support(n), g.position_support(n)); });
}

std::vector<Functional> builtin_functionals(std::size_t n) {
    std::vector<Functional> lib;
    lib.push_back(last_position_at_most(1.0));
    lib.push_back(last_position_at_most(1.0) * age_of(1));
    lib.push_back(last_position_at_most(1.0) * age_at_most(n, 0.5));
    lib.push_back(last_position_at_most(1.0) * position_at_most(1, 0.5));
    if (n >= 2) lib.push_back(last_position_at_most(1.0) * age_of(1) * age_of(n));
    return lib;
}

SpineEstimate many_to_one_rhs(Alpha alpha, std::size_t n, const Functional& f,
                              std::uint64_t replicas, std::uint64_t seed) {
    if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
    if (!std::isfinite(f.position_support(n))) {
        throw std::invalid_argument("functional " + f.name() +
                                    " does not vanish for large x_n; its mean is infinite");
    }
    std::vector<double> weights;
    weights.reserve(replicas);
    std::vector<LineageStep> steps(n);
    for (std::uint64_t r = 0; r < replicas; ++r) {
        SplitMix64 rng(derive_seed(seed, r));
        const SpinePath path = sample_spine(alpha, n, rng);
        for (std::size_t i = 0; i < n; ++i) steps[i] = {path.ages[i], path.positions[i]};
        double w = f(steps);
        if (w != 0.0) {
            double age_product = 1.0;
            for (std::size_t i = 0; i + 1 < n; ++i) age_product *= path.ages[i];
            w *= std::exp(path.positions.back()) * age_product;
        }
        if (!std::isfinite(w)) throw std::runtime_error("non-finite spine weight");
        weights.push_back(w);
    }
    SpineEstimate out{};
    if (weights.size() >= 2) {
        out.estimate = summarize(weights, seed);
    } else {
        out.estimate = {weights.front(), std::numeric_limits<double>::quiet_NaN(), 1, seed};
    }
    double s1 = 0.0;
    double s2 = 0.0;
    for (double w : weights) {
        s1 += w;
        s2 += w * w;
    }
    out.effective_sample_size = s2 > 0.0 ? s1 * s1 / s2 : 0.0;
    const double sd = out.estimate.std_error * std::sqrt(static_cast<double>(weights.size()));
    out.weight_cv = out.estimate.mean != 0.0 ? sd / out.estimate.mean : 0.0;
    return out;
}

double many_to_one_lhs_sample(const Population& pop, std::size_t n, const Functional& f) {
    if (n < 1) throw std::invalid_argument("generation must be >= 1");
    pop.require_complete(static_cast<std::uint32_t>(n));
    if (pop.window().t_max < 1.0) {
        throw std::invalid_argument("many-to-one needs t_max >= 1");
    }
    if (f.position_support(n) > pop.window().x_max) {
        throw std::invalid_argument("support of " + f.name() +
                                    " exceeds x_max; truncation would bias the estimate");
    }
    const auto atoms = pop.atoms();
    std::vector<LineageStep> steps(n);
    double total = 0.0;
    for (const auto& a : atoms) {
        if (a.birth_time > 1.0) break;
        if (a.generation != n) continue;
        // Walk up the genealogy filling steps n..1.
        AtomId cur = a.id;
        for (std::size_t i = n; i >= 1; --i) {
            const AtomRecord& anc = atoms[cur];
            steps[i - 1] = {1.0 - anc.birth_time, anc.position};
            cur = anc.parent;
        }
        total += f(steps);
    }
    return total;
}

Estimate many_to_one_lhs(std::span<const Population> populations, std::size_t n,
                         const Functional& f, std::uint64_t seed) {
    std::vector<double> values;
    values.reserve(populations.size());
    for (const auto& pop : populations) values.push_back(many_to_one_lhs_sample(pop, n, f));
    return summarize(values, seed);
}

}  // namespace bstable
