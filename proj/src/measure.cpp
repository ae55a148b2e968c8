#include "bstable/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace bstable {

namespace {

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

Alpha::Alpha(double value) : value_(value) {
    if (!finite_positive(value)) {
        throw std::invalid_argument("alpha must be finite and > 0");
    }
}

Config::Config(std::vector<double> offsets) : offsets_(std::move(offsets)) {
    if (offsets_.empty()) {
        throw std::invalid_argument("configuration must contain at least one offset");
    }
    for (double x : offsets_) {
        if (!finite_positive(x)) {
            throw std::invalid_argument("configuration offsets must be finite and > 0");
        }
    }
    std::sort(offsets_.begin(), offsets_.end());
}

Config Config::dilated(double factor) const {
    if (!finite_positive(factor)) {
        throw std::invalid_argument("dilation factor must be finite and > 0");
    }
    std::vector<double> out(offsets_);
    for (double& x : out) x *= factor;
    return Config(std::move(out));
}

LambdaSpec::LambdaSpec(std::vector<LambdaEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) {
        throw std::invalid_argument("lambda must have at least one entry");
    }
    for (const auto& e : entries_) {
        if (!finite_positive(e.weight)) {
            throw std::invalid_argument("lambda weights must be finite and > 0");
        }
    }
    if (!std::isfinite(total_mass())) {
        throw std::invalid_argument("lambda total mass must be finite");
    }
}

double LambdaSpec::total_mass() const noexcept {
    double m = 0.0;
    for (const auto& e : entries_) m += e.weight;
    return m;
}

LambdaSpec LambdaSpec::dilated(double factor) const {
    std::vector<LambdaEntry> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back({e.weight, e.config.dilated(factor)});
    return LambdaSpec(std::move(out));
}

NormalizedLambda::NormalizedLambda(LambdaSpec spec, Alpha alpha, double dilation_applied)
    : spec_(std::move(spec)), alpha_(alpha), dilation_applied_(dilation_applied) {
    const double product = c_lambda(spec_, alpha_) * std::tgamma(alpha_.value());
    if (std::abs(product - 1.0) > 1e-12) {
        throw std::invalid_argument("lambda is not normalized: c(lambda) Gamma(alpha) != 1");
    }
}

double c_lambda(const LambdaSpec& spec, Alpha alpha) {
    const double a = alpha.value();
    double total = 0.0;
    for (const auto& e : spec.entries()) {
        double inner = 0.0;
        for (double x : e.config.offsets()) inner += std::pow(x, -a);
        total += e.weight * inner;
    }
    if (!std::isfinite(total) || total <= 0.0) {
        throw std::invalid_argument("c(lambda) is not finite and positive");
    }
    return total;
}

NormalizedLambda normalize_lambda(const LambdaSpec& spec, Alpha alpha) {
    const double a = alpha.value();
    const double product = c_lambda(spec, alpha) * std::tgamma(a);
    const double d = std::pow(product, 1.0 / a);
    if (std::abs(product - 1.0) <= 1e-15) {
        return NormalizedLambda(spec, alpha, 1.0);
    }
    auto dilated = spec.dilated(d);
    // One correction step absorbs the rounding in pow().
    const double residual = c_lambda(dilated, alpha) * std::tgamma(a);
    if (std::abs(residual - 1.0) > 1e-14) {
        const double fix = std::pow(residual, 1.0 / a);
        dilated = dilated.dilated(fix);
        return NormalizedLambda(std::move(dilated), alpha, d * fix);
    }
    return NormalizedLambda(std::move(dilated), alpha, d);
}

QuadratureResult lp_condition_integral(const LambdaSpec& spec, Alpha alpha, double p) {
    if (!(p > 1.0 && p <= 2.0)) {
        throw std::invalid_argument("p must lie in (1, 2]");
    }
    const double a = alpha.value();

    auto integrand_y = [&](double y) {
        double total = 0.0;
        for (const auto& e : spec.entries()) {
            double s = 0.0;
            for (double x : e.config.offsets()) s += std::exp(-y * x);
            total += e.weight * std::pow(s, p);
        }
        return total;
    };

    // tanh-sinh copes with the endpoint behaviour of y^{alpha-1} at 0 for every alpha.
    auto integrand = [&](double y) { return integrand_y(y) * std::pow(y, a - 1.0); };

    // Tail over (Y, inf): (sum_k e^{-y x_k})^p <= m^p e^{-p x_1 y}, so the tail is at most
    // sum_j w_j m_j^p (p x_{j,1})^{-alpha} Gamma(alpha, p x_{j,1} Y).
    auto tail_bound = [&](double cutoff) {
        double bound = 0.0;
        for (const auto& e : spec.entries()) {
            const double rate = p * e.config.first();
            const double m = static_cast<double>(e.config.size());
            bound += e.weight * std::pow(m, p) * std::pow(rate, -a) *
                     boost::math::tgamma(a, rate * cutoff);
        }
        return bound;
    };

    boost::math::quadrature::tanh_sinh<double> quad;
    double cutoff = 1.0;
    for (const auto& e : spec.entries()) cutoff = std::max(cutoff, 1.0 / e.config.first());

    double value = 0.0;
    double abs_error = 0.0;
    double lower = 0.0;
    // Grow Y geometrically, integrating each new slab, until the tail bound is negligible.
    for (int iter = 0; iter < 200; ++iter) {
        double err = 0.0;
        value += quad.integrate(integrand, lower, cutoff, 1e-13, &err);
        abs_error += err;
        lower = cutoff;
        if (tail_bound(cutoff) < 1e-12 * value) break;
        cutoff *= 2.0;
    }
    const double tail = tail_bound(cutoff);
    const double rel = (abs_error + tail) / value;
    if (!(rel <= 1e-8) || !std::isfinite(value)) {
        throw QuadratureError("lp condition quadrature did not converge", value, abs_error + tail);
    }
    return {value, rel, tail, cutoff};
}

double first_atom_rate(const LambdaSpec& spec, Alpha alpha) {
    double r = 0.0;
    for (const auto& e : spec.entries()) r += e.weight * std::pow(e.config.first(), -alpha.value());
    return r;
}

NormalizedLambda unit_atom_model(Alpha alpha) {
    return normalize_lambda(LambdaSpec({{1.0, Config({1.0})}}), alpha);
}

}  // namespace bstable
