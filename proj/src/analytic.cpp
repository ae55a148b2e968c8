#include "bstable/analytic.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace bstable {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Largest log-value that still converts to a finite double.
const double kLogMax = std::log(std::numeric_limits<double>::max());

double log_term(double rho, double beta, double log_z, int k) {
    if (k == 0) return -std::lgamma(beta);
    return k * log_z - std::lgamma(k + 1.0) - std::lgamma(rho * k + beta);
}

}  // namespace

WrightEval wright_phi(double rho, double beta, double z) {
    if (!(rho > 0.0) || !(beta > 0.0) || !(z >= 0.0) || !std::isfinite(rho) ||
        !std::isfinite(beta) || !std::isfinite(z)) {
        throw std::invalid_argument("wright_phi requires rho > 0, beta > 0, z >= 0");
    }
    if (z == 0.0) {
        const double v = 1.0 / std::tgamma(beta);
        return {v, std::log(v), 1, 0.0, 0.0, false};
    }

    // The term ratio z Gamma(rho k + beta) / ((k+1) Gamma(rho k + rho + beta)) is strictly
    // decreasing in k, so once it drops below 1 the remaining tail is dominated by a
    // geometric series with that ratio.
    const double log_z = std::log(z);
    std::vector<double> logs;
    double running_max = -kInf;
    double scaled_sum = 0.0;  // sum of exp(log_k - running_max)
    int tiny_streak = 0;
    double log_tail = -kInf;

    for (int k = 0;; ++k) {
        const double lt = log_term(rho, beta, log_z, k);
        logs.push_back(lt);
        if (lt > running_max) {
            scaled_sum = scaled_sum * std::exp(running_max - lt) + 1.0;
            running_max = lt;
        } else {
            scaled_sum += std::exp(lt - running_max);
        }
        const double log_partial = running_max + std::log(scaled_sum);

        tiny_streak = (lt < log_partial + std::log(1e-16)) ? tiny_streak + 1 : 0;
        const double log_next = log_term(rho, beta, log_z, k + 1);
        const double log_ratio = log_next - lt;
        if (tiny_streak >= 3 && log_ratio < 0.0) {
            // tail <= t_{k+1} / (1 - r_{k+1}) with r_{k+1} <= r_k < 1
            log_tail = log_next - std::log1p(-std::exp(log_ratio));
            break;
        }
        if (k > 10'000'000) {
            throw std::runtime_error("wright_phi: series did not converge");
        }
    }

    // Re-sum with a fixed reference, smallest terms first, for accuracy.
    double ref = running_max;
    double sum = 0.0;
    for (auto it = logs.rbegin(); it != logs.rend(); ++it) sum += std::exp(*it - ref);
    const double log_value = ref + std::log(sum);
    const double rel_tail = std::exp(log_tail - log_value);

    WrightEval out{};
    out.log_value = log_value;
    out.terms_used = static_cast<int>(logs.size());
    out.relative_truncation_bound = rel_tail;
    out.overflow = log_value > kLogMax;
    if (out.overflow) {
        out.value = kInf;
        out.truncation_bound = kInf;
    } else {
        out.value = std::exp(log_value);
        out.truncation_bound = std::exp(log_tail);
    }
    return out;
}

WrightEval mean_cdf(Alpha alpha, double t, double x) {
    if (!(t > 0.0) || !(x > 0.0)) {
        throw std::invalid_argument("mean_cdf requires t > 0 and x > 0");
    }
    const double a = alpha.value();
    const double z = std::exp(std::log(t) + a * std::log(x));
    return wright_phi(a, 1.0, z);
}

double log_mean_cdf_asymptotic(Alpha alpha, double x) {
    if (!(x > 0.0)) throw std::invalid_argument("mean_cdf_asymptotic requires x > 0");
    const double a = alpha.value();
    const double e = a / (a + 1.0);
    const double growth = (a + 1.0) * std::pow(x / a, e);
    const double log_den = 0.5 * (std::log(2.0 * std::numbers::pi * (a + 1.0)) +
                                  std::log(a) / (a + 1.0) + e * std::log(x));
    return growth - log_den;
}

double mean_cdf_asymptotic(Alpha alpha, double x) {
    return std::exp(log_mean_cdf_asymptotic(alpha, x));
}

double laplace_mean(Alpha alpha, double t, double theta) {
    if (!(t >= 0.0) || !(theta > 0.0)) {
        throw std::invalid_argument("laplace_mean requires t >= 0 and theta > 0");
    }
    return std::exp(t * std::pow(theta, -alpha.value()));
}

IntensityValue intensity_mu_n(Alpha alpha, int n, double t, double x) {
    if (n < 1) throw std::invalid_argument("intensity_mu_n requires n >= 1");
    if (!(t > 0.0) || !(x > 0.0)) {
        throw std::invalid_argument("intensity_mu_n requires t > 0 and x > 0");
    }
    const double a = alpha.value();
    const double an = a * n;
    const double lt = std::log(t);
    const double lx = std::log(x);
    IntensityValue v{};
    v.log_density = (n - 1) * lt + (an - 1.0) * lx - std::lgamma(static_cast<double>(n)) -
                    std::lgamma(an);
    v.log_cumulative = n * lt + an * lx - std::lgamma(n + 1.0) - std::lgamma(an + 1.0);
    v.density = std::exp(v.log_density);
    v.cumulative = std::exp(v.log_cumulative);
    return v;
}

double cumulant_2d(Alpha alpha, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("cumulant_2d requires a, b > 0");
    return -(std::log(a) + alpha.value() * std::log(b));
}

double legendre_kappa_star(Alpha alpha, double p, double q) {
    if (!(p > 0.0) || !(q > 0.0)) return kInf;
    const double a = alpha.value();
    return 1.0 + a + std::log(p) + a * std::log(q / a);
}

double c_alpha_const(Alpha alpha) {
    const double a = alpha.value();
    return a * std::exp(-(a + 1.0) / a);
}

Region in_region_C_alpha(Alpha alpha, ShapePoint pt) {
    if (!(pt.p > 0.0) || !(pt.q > 0.0)) return Region::outside;
    const double a = alpha.value();
    // Compare p q^a against a^a e^{-(1+a)} in log space, relative tolerance 1e-12.
    const double lhs = std::log(pt.p) + a * std::log(pt.q);
    const double rhs = a * std::log(a) - (1.0 + a);
    const double diff = lhs - rhs;
    if (std::abs(diff) <= 1e-12) return Region::boundary;
    return diff > 0.0 ? Region::inside : Region::outside;
}

const char* to_string(Region r) {
    switch (r) {
        case Region::inside: return "inside";
        case Region::boundary: return "boundary";
        case Region::outside: return "outside";
    }
    return "unknown";
}

}  // namespace bstable
