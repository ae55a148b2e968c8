#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bstable/measure.hpp"
#include "bstable/random.hpp"
#include "bstable/simulator.hpp"
#include "bstable/stats.hpp"

namespace bstable {

/// Spine trajectory: ages A_i = U_1 ... U_i and positions S_i with gamma(alpha, 1) steps.
struct SpinePath {
    std::vector<double> ages;
    std::vector<double> positions;
};

SpinePath sample_spine(Alpha alpha, std::size_t n, SplitMix64& rng);

/// One step (a_i, x_i) of a transformed lineage. On the population side a_i = 1 - t_i,
/// on the spine side a_i = A_i.
struct LineageStep {
    double age;
    double position;
};

/// A non-negative functional of ((a_i, x_i))_{i <= n}.
///
/// `position_support(n)` is a bound B with f = 0 whenever x_n > B; the first moment
/// of Z_n is infinite on unbounded positions, so only functionals with finite
/// support can be estimated.
class Functional {
public:
    using Fn = std::function<double(std::span<const LineageStep>)>;
    using Support = std::function<double(std::size_t)>;

    Functional(std::string name, Fn fn, Support support);

    double operator()(std::span<const LineageStep> steps) const { return fn_(steps); }
    double position_support(std::size_t n) const { return support_(n); }
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
    Fn fn_;
    Support support_;
};

/// 1{x_i <= a}; i is 1-based.
Functional position_at_most(std::size_t i, double a);
/// 1{x_n <= a}.
Functional last_position_at_most(double a);
/// 1{a_i <= b}.
Functional age_at_most(std::size_t i, double b);
/// a_i.
Functional age_of(std::size_t i);
Functional constant(double c);
Functional operator*(const Functional& f, const Functional& g);

/// The fixed test library for generation n: indicators and products, all vanishing for x_n > 1.
std::vector<Functional> builtin_functionals(std::size_t n);

struct SpineEstimate {
    Estimate estimate;
    double weight_cv;              ///< coefficient of variation of the weights
    double effective_sample_size;  ///< (sum w)^2 / sum w^2
};

/// E[f((A_i, S_i)_{i<=n}) e^{S_n} prod_{i<n} A_i] by direct sampling of the spine.
SpineEstimate many_to_one_rhs(Alpha alpha, std::size_t n, const Functional& f,
                              std::uint64_t replicas, std::uint64_t seed);

/// Sum over generation-n atoms born by time 1 of f((1 - t_i, x_i)_{i<=n}) for one population.
double many_to_one_lhs_sample(const Population& pop, std::size_t n, const Functional& f);

/// Replica average of many_to_one_lhs_sample.
Estimate many_to_one_lhs(std::span<const Population> populations, std::size_t n,
                         const Functional& f, std::uint64_t seed);

}  // namespace bstable
