#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace bstable {

/// Monte Carlo mean with its standard error.
struct Estimate {
    double mean;
    double std_error;
    std::uint64_t replicas;
    std::uint64_t seed;
};

/// Sample mean and unbiased standard error. Needs at least 2 samples.
Estimate summarize(std::span<const double> samples, std::uint64_t seed = 0);

struct KsResult {
    double statistic;
    double p_value;
    std::size_t n;  ///< effective sample size used for the p-value
};

/// Asymptotic Kolmogorov survival function P(K > lambda).
double kolmogorov_survival(double lambda);

/// One-sample two-sided KS against a continuous CDF. Needs at least 10 samples.
KsResult ks_test(std::span<const double> sample, const std::function<double(double)>& cdf);

/// One-sample KS with right censoring: values > upper are only known to exceed it,
/// so the supremum runs over [lower support, upper].
KsResult ks_test_censored(std::span<const double> sample,
                          const std::function<double(double)>& cdf, double upper);

/// Two-sample two-sided KS; ties are handled by comparing ECDFs at distinct values.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Median (mean of the two middle order statistics for even sizes).
double median(std::vector<double> values);

}  // namespace bstable
