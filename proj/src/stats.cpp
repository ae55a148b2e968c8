#include "bstable/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bstable {

Estimate summarize(std::span<const double> samples, std::uint64_t seed) {
    if (samples.size() < 2) throw std::invalid_argument("summarize needs at least 2 samples");
    // Welford
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t k = 0;
    for (double v : samples) {
        ++k;
        const double d = v - mean;
        mean += d / static_cast<double>(k);
        m2 += d * (v - mean);
    }
    const double n = static_cast<double>(samples.size());
    const double var = m2 / (n - 1.0);
    return {mean, std::sqrt(var / n), samples.size(), seed};
}

double kolmogorov_survival(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 0.2) return 1.0;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-17) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

namespace {

double p_value_for(double d, double n_eff) {
    const double sn = std::sqrt(n_eff);
    // Stephens' small-sample correction of the asymptotic distribution.
    return kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
}

}  // namespace

KsResult ks_test_censored(std::span<const double> sample,
                          const std::function<double(double)>& cdf, double upper) {
    if (sample.size() < 10) throw std::invalid_argument("KS test needs at least 10 samples");
    std::vector<double> s(sample.begin(), sample.end());
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    double d = 0.0;
    std::size_t i = 0;
    while (i < s.size() && s[i] <= upper) {
        const double f = cdf(s[i]);
        std::size_t j = i;
        while (j < s.size() && s[j] == s[i]) ++j;
        d = std::max({d, std::abs(f - static_cast<double>(i) / n),
                      std::abs(static_cast<double>(j) / n - f)});
        i = j;
    }
    // Between the last observed value and the censoring point the ECDF is flat.
    d = std::max(d, std::abs(cdf(upper) - static_cast<double>(i) / n));
    return {d, p_value_for(d, n), s.size()};
}

KsResult ks_test(std::span<const double> sample, const std::function<double(double)>& cdf) {
    return ks_test_censored(sample, cdf, std::numeric_limits<double>::infinity());
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 10 || b.size() < 10) {
        throw std::invalid_argument("KS test needs at least 10 samples per group");
    }
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double nx = static_cast<double>(x.size());
    const double ny = static_cast<double>(y.size());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < x.size() || j < y.size()) {
        double v;
        if (j >= y.size() || (i < x.size() && x[i] <= y[j])) {
            v = x[i];
        } else {
            v = y[j];
        }
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / nx - static_cast<double>(j) / ny));
    }
    const double n_eff = nx * ny / (nx + ny);
    return {d, p_value_for(d, n_eff), static_cast<std::size_t>(n_eff)};
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median of an empty sample");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace bstable
