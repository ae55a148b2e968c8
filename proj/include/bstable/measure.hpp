#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bstable {

/// Self-similarity index. The process has scaling exponent -value().
class Alpha {
public:
    explicit Alpha(double value);
    double value() const noexcept { return value_; }

private:
    double value_;
};

/// One finite configuration x_1 <= ... <= x_m of strictly positive offsets.
/// Repeated offsets encode multiplicity. Offsets are sorted on construction.
class Config {
public:
    explicit Config(std::vector<double> offsets);

    std::span<const double> offsets() const noexcept { return offsets_; }
    std::size_t size() const noexcept { return offsets_.size(); }
    double first() const noexcept { return offsets_.front(); }

    Config dilated(double factor) const;

private:
    std::vector<double> offsets_;
};

struct LambdaEntry {
    double weight;
    Config config;
};

/// Finite mixture of finite configurations: lambda = sum_j w_j delta_{x_j}.
class LambdaSpec {
public:
    explicit LambdaSpec(std::vector<LambdaEntry> entries);

    std::span<const LambdaEntry> entries() const noexcept { return entries_; }
    double total_mass() const noexcept;

    LambdaSpec dilated(double factor) const;

private:
    std::vector<LambdaEntry> entries_;
};

/// A LambdaSpec satisfying c(lambda) Gamma(alpha) = 1.
class NormalizedLambda {
public:
    NormalizedLambda(LambdaSpec spec, Alpha alpha, double dilation_applied);

    const LambdaSpec& spec() const noexcept { return spec_; }
    Alpha alpha() const noexcept { return alpha_; }
    double dilation_applied() const noexcept { return dilation_applied_; }

private:
    LambdaSpec spec_;
    Alpha alpha_;
    double dilation_applied_;
};

/// Raised when adaptive quadrature cannot reach the requested accuracy.
class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double partial_value, double error_estimate)
        : std::runtime_error(what), partial_value(partial_value), error_estimate(error_estimate) {}

    double partial_value;
    double error_estimate;
};

struct QuadratureResult {
    double value;
    double relative_error;  ///< estimated relative accuracy of `value`
    double tail_bound;      ///< analytic bound on the discarded (Y, inf) tail
    double cutoff;          ///< Y
};

/// c(lambda) = sum_j w_j sum_k x_{j,k}^{-alpha}.
double c_lambda(const LambdaSpec& spec, Alpha alpha);

/// Dilates every configuration by d = (c(lambda) Gamma(alpha))^{1/alpha}.
NormalizedLambda normalize_lambda(const LambdaSpec& spec, Alpha alpha);

/// int_0^inf y^{alpha-1} sum_j w_j (sum_k exp(-y x_{j,k}))^p dy for p in (1, 2].
/// Throws QuadratureError if the relative accuracy 1e-8 is not reached.
QuadratureResult lp_condition_integral(const LambdaSpec& spec, Alpha alpha, double p);

/// r = sum_j w_j x_{j,1}^{-alpha}; the first-atom measure is r a^alpha / alpha.
double first_atom_rate(const LambdaSpec& spec, Alpha alpha);

/// The unit single-atom family lambda = delta_{(1)}, normalized for alpha.
NormalizedLambda unit_atom_model(Alpha alpha);

}  // namespace bstable
