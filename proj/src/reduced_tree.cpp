#include "bstable/reduced_tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

#include <boost/math/quadrature/tanh_sinh.hpp>

namespace bstable {

namespace {

constexpr double kDecadesBelow = 10.0;

// Lagrange cubic through four equally spaced samples at offsets 0..3, evaluated at u.
double lagrange4(const double* f, double u) {
    const double a = u, b = u - 1.0, c = u - 2.0, d = u - 3.0;
    return -f[0] * b * c * d / 6.0 + f[1] * a * c * d / 2.0 - f[2] * a * b * d / 2.0 +
           f[3] * a * b * c / 6.0;
}

long long truncated_poisson(double mean, SplitMix64& rng) {
    if (mean > 20.0) {
        std::poisson_distribution<long long> pois(mean);
        for (;;) {
            const long long k = pois(rng);
            if (k > 0) return k;
        }
    }
    const double target = uniform_open01(rng) * -std::expm1(-mean);
    double term = std::exp(-mean) * mean;
    double acc = term;
    long long k = 1;
    while (acc < target && k < 10'000) {
        ++k;
        term *= mean / static_cast<double>(k);
        acc += term;
    }
    return k;
}

// log(1 - exp(-e^l)).
double log_hit(double l) {
    if (l < -30.0) return l - 0.5 * std::exp(l);
    return std::log(-std::expm1(-std::exp(l)));
}

// out[i] = log of the integral up to grid point i of f(e^s) e^s ds, from the logs lf of the
// integrand on a uniform s grid; fourth-order accurate away from the ends.
void log_cumulative(const std::vector<double>& lf, double log_initial, double step,
                    std::vector<double>& out) {
    const std::size_t grid = lf.size();
    out.resize(grid);
    double log_cum = log_initial;
    out[0] = log_cum;
    for (std::size_t i = 0; i + 1 < grid; ++i) {
        std::size_t j0;
        double w[4];
        if (i == 0) {
            j0 = 0;
            w[0] = 5.0 / 12.0, w[1] = 8.0 / 12.0, w[2] = -1.0 / 12.0, w[3] = 0.0;
        } else if (i + 2 == grid) {
            j0 = i - 1;
            w[0] = -1.0 / 12.0, w[1] = 8.0 / 12.0, w[2] = 5.0 / 12.0, w[3] = 0.0;
        } else {
            j0 = i - 1;
            w[0] = -1.0 / 24.0, w[1] = 13.0 / 24.0, w[2] = 13.0 / 24.0, w[3] = -1.0 / 24.0;
        }
        const double top = lf[std::min(j0 + 3, grid - 1)];
        double sum = 0.0;
        for (std::size_t j = 0; j < 4 && j0 + j < grid; ++j) sum += w[j] * std::exp(lf[j0 + j] - top);
        const double log_piece = top + std::log(step * sum);
        log_cum = log_piece > log_cum ? log_piece + std::log1p(std::exp(log_cum - log_piece))
                                      : log_cum + std::log1p(std::exp(log_piece - log_cum));
        out[i + 1] = log_cum;
    }
}

}  // namespace

GenerationVoidTable::GenerationVoidTable(Alpha alpha, int max_generation, double z_max,
                                         std::size_t grid)
    : alpha_(alpha), z_max_(z_max) {
    if (max_generation < 1) throw std::invalid_argument("max_generation must be >= 1");
    if (!(z_max > 0.0) || !std::isfinite(z_max)) {
        throw std::invalid_argument("z_max must be positive and finite");
    }
    const double a = alpha.value();
    if (grid == 0) grid = a == 1.0 ? 16384 : 4096;
    if (grid < 16) throw std::invalid_argument("grid must have at least 16 points");
    const double log_top = std::log(z_max);
    log_z_min_ = std::min(log_top, 0.0) - kDecadesBelow * std::log(10.0);
    step_ = (log_top - log_z_min_) / static_cast<double>(grid - 1);
    const double lg = std::lgamma(a + 1.0);

    std::vector<double> zs(grid);
    for (std::size_t i = 0; i < grid; ++i) zs[i] = std::exp(log_z_min_ + step_ * static_cast<double>(i));

    log_i_.resize(static_cast<std::size_t>(max_generation) + 1);
    log_i_[1].resize(grid);
    for (std::size_t i = 0; i < grid; ++i) log_i_[1][i] = std::log(zs[i]) - lg;

    // Everything is carried in logs: at high k the values near the bottom of the grid
    // are far below the smallest double.
    std::vector<double> lf(grid);
    log_hc_.resize(static_cast<std::size_t>(max_generation));
    for (int k = 2; k <= max_generation; ++k) {
        const auto& prev = log_i_[k - 1];
        auto& log_h_cum = log_hc_[k - 1];
        log_h_cum.resize(grid);
        // H_{k-1}(z) = int_0^z h_{k-1}, integrated in s = log w with integrand f = h(w) w.
        for (std::size_t i = 0; i < grid; ++i) lf[i] = log_hit(prev[i]) + std::log(zs[i]);
        log_cumulative(lf, lf[0] - std::log(static_cast<double>(k)), step_, log_h_cum);
        auto& cur = log_i_[k];
        cur.resize(grid);
        if (a == 1.0) {
            // I_k(z) = int_0^z Q_{k-1}(v) dv, and Q_{k-1}(v) v = H_{k-1}(v).
            log_cumulative(log_h_cum, log_h_cum[0] - std::log(static_cast<double>(k)), step_, cur);
            continue;
        }
        auto fill = [&](std::size_t begin, std::size_t end) {
            boost::math::quadrature::tanh_sinh<double> integrator;
            for (std::size_t i = begin; i < end; ++i) {
                const double z = zs[i];
                const double lh = log_h_cum[i];
                // Q(v) / Q(z), which lies in [0, 1] because Q is increasing.
                auto ratio = [&](double v) {
                    if (v <= 0.0) return 0.0;
                    return std::exp(interp(log_h_cum, k, v) - lh) * (z / v);
                };
                const double integral = integrator.integrate(
                    [&](double r) { return ratio(z * std::pow(1.0 - std::pow(r, 1.0 / a), a)); },
                    0.0, 1.0, 1e-12);
                cur[i] = lh - lg + std::log(integral);
            }
        };
        const std::size_t workers = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
        const std::size_t chunk = (grid + workers - 1) / workers;
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(fill, w * chunk, std::min(grid, (w + 1) * chunk));
        }
    }
}

double GenerationVoidTable::interp(const std::vector<double>& table, int slope, double z) const {
    const double lz = std::log(z);
    const double u = (lz - log_z_min_) / step_;
    const auto n = static_cast<double>(table.size());
    if (u < 0.0) return table[0] + static_cast<double>(slope) * (lz - log_z_min_);
    if (u > n - 1.0 + 1e-9) {
        throw std::out_of_range("window size beyond the tabulated range");
    }
    const auto j0 = static_cast<std::size_t>(
        std::clamp(std::floor(u) - 1.0, 0.0, n - 4.0));
    return lagrange4(table.data() + j0, u - static_cast<double>(j0));
}

double GenerationVoidTable::log_void(int k, double z) const {
    if (k < 0 || k > max_generation()) throw std::out_of_range("generation not tabulated");
    if (k == 0) return std::numeric_limits<double>::infinity();
    if (z <= 0.0) return 0.0;
    return std::exp(interp(log_i_[static_cast<std::size_t>(k)], k, z));
}

double GenerationVoidTable::void_probability(int k, double z) const {
    return std::exp(-log_void(k, z));
}

double GenerationVoidTable::hit_probability(int k, double z) const {
    if (k == 0) return 1.0;
    return -std::expm1(-log_void(k, z));
}

double GenerationVoidTable::log_hit_probability(int k, double z) const {
    if (k < 0 || k > max_generation()) throw std::out_of_range("generation not tabulated");
    if (k == 0) return 0.0;
    if (z <= 0.0) return -std::numeric_limits<double>::infinity();
    return log_hit(interp(log_i_[static_cast<std::size_t>(k)], k, z));
}

double GenerationVoidTable::log_mean_hit(int k, double z) const {
    if (k < 1 || k >= max_generation()) throw std::out_of_range("generation not tabulated");
    return interp(log_hc_[static_cast<std::size_t>(k)], k + 1, z) - std::log(z);
}

bool single_offset_model(const NormalizedLambda& model) {
    for (const auto& e : model.spec().entries()) {
        if (e.config.size() != 1) return false;
    }
    return true;
}

std::vector<WindowAtom> sample_generation_window(const GenerationVoidTable& table, int n,
                                                 double T, double X, SplitMix64& rng,
                                                 std::uint64_t* individuals) {
    if (n < 1 || n > table.max_generation()) {
        throw std::out_of_range("generation not covered by the table");
    }
    if (!(T > 0.0) || !(X > 0.0)) throw std::invalid_argument("window must be non-empty");
    const double a = table.alpha().value();
    const double inv_a = 1.0 / a;
    const double z = T * std::pow(X, a);
    if (z > table.z_max() * (1.0 + 1e-12)) {
        throw std::out_of_range("window size beyond the tabulated range");
    }

    auto guard = [](std::uint64_t tries) {
        if (tries > 100'000'000ULL) {
            throw std::runtime_error("reduced-tree rejection sampler did not accept");
        }
    };
    std::vector<WindowAtom> out;
    std::uint64_t kept = 0;
    if (uniform_open01(rng) < table.void_probability(n, z)) {
        if (individuals) *individuals = 0;
        return out;
    }
    struct Node {
        double t, x;
        int remaining;
    };
    std::vector<Node> stack{{0.0, 0.0, n}};
    while (!stack.empty()) {
        const Node node = stack.back();
        stack.pop_back();
        ++kept;
        const double tr = T - node.t;
        const double xr = X - node.x;
        const long long children = truncated_poisson(table.log_void(node.remaining, tr * std::pow(xr, a)), rng);
        const int m = node.remaining - 1;
        for (long long c = 0; c < children; ++c) {
            double s, y;
            if (m == 0) {
                s = tr * uniform_open01(rng);
                y = xr * std::pow(uniform_open01(rng), inv_a);
            } else {
                // y = xr rho^{1/alpha} with rho density proportional to Q_m(tr (xr - y)^alpha),
                // then u = (tr - s)(xr - y)^alpha with density proportional to h_m(u).
                const double zr = tr * std::pow(xr, a);
                const double q_top = table.log_mean_hit(m, zr);
                double v;
                for (std::uint64_t tries = 0;; ++tries) {
                    guard(tries);
                    y = xr * std::pow(uniform_open01(rng), inv_a);
                    v = std::pow(xr - y, a);
                    if (v <= 0.0) continue;
                    if (std::log(uniform_open01(rng)) < table.log_mean_hit(m, tr * v) - q_top) break;
                }
                const double u_top = tr * v;
                const double h_top = table.log_hit_probability(m, u_top);
                double u;
                for (std::uint64_t tries = 0;; ++tries) {
                    guard(tries);
                    u = u_top * uniform_open01(rng);
                    if (std::log(uniform_open01(rng)) < table.log_hit_probability(m, u) - h_top) break;
                }
                s = tr - u / v;
            }
            if (m == 0) {
                out.push_back({node.t + s, node.x + y});
            } else {
                stack.push_back({node.t + s, node.x + y, m});
            }
        }
    }
    if (individuals) *individuals = kept + out.size();
    return out;
}

}  // namespace bstable
