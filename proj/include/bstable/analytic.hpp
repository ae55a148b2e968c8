#pragma once

#include "bstable/measure.hpp"

namespace bstable {

/// Result of summing the Wright series phi(rho, beta, z).
///
/// The sum is accumulated in log space. When the value exceeds the double range
/// `overflow` is set, `value` is +inf and `log_value` still carries the result.
struct WrightEval {
    double value;
    double log_value;
    int terms_used;
    double truncation_bound;           ///< absolute bound on the discarded tail (+inf on overflow)
    double relative_truncation_bound;  ///< the same bound divided by the partial sum
    bool overflow;
};

/// phi(rho, beta, z) = sum_{k>=0} z^k / (k! Gamma(rho k + beta)), rho > 0, beta > 0, z >= 0.
WrightEval wright_phi(double rho, double beta, double z);

/// E[S_t([0, x])] = phi(alpha, 1, t x^alpha) under c(lambda) Gamma(alpha) = 1.
WrightEval mean_cdf(Alpha alpha, double t, double x);

/// Leading-order growth of E[S_1([0, x])] as x -> infinity.
double mean_cdf_asymptotic(Alpha alpha, double x);
double log_mean_cdf_asymptotic(Alpha alpha, double x);

/// E[int e^{-theta x} S_t(dx)] = exp(t theta^{-alpha}).
double laplace_mean(Alpha alpha, double t, double theta);

struct IntensityValue {
    double density;         ///< t^{n-1} x^{alpha n - 1} / ((n-1)! Gamma(alpha n))
    double cumulative;      ///< mu_n([0,t] x [0,x]) = t^n x^{alpha n} / (n! Gamma(alpha n + 1))
    double log_density;
    double log_cumulative;
};

/// Intensity of the n-th generation Z_n, normalized model.
IntensityValue intensity_mu_n(Alpha alpha, int n, double t, double x);

/// kappa(a, b) = -log(a b^alpha), the log-Laplace transform of Z_1.
double cumulant_2d(Alpha alpha, double a, double b);

/// Legendre transform of kappa; +inf when p <= 0 or q <= 0.
double legendre_kappa_star(Alpha alpha, double p, double q);

/// c_alpha = alpha e^{-(alpha+1)/alpha}, the speed of the leftmost generation-n atom.
double c_alpha_const(Alpha alpha);

struct ShapePoint {
    double p;  ///< rescaled birth time
    double q;  ///< rescaled position
};

enum class Region { inside, boundary, outside };

/// Classifies a point against C_alpha = {p q^alpha >= alpha^alpha e^{-(1+alpha)}}.
Region in_region_C_alpha(Alpha alpha, ShapePoint pt);

const char* to_string(Region r);

}  // namespace bstable
