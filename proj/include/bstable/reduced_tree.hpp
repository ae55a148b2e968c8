#pragma once

#include <cstdint>
#include <vector>

#include "bstable/measure.hpp"
#include "bstable/random.hpp"

namespace bstable {

/// Void probabilities g_k(z) = P(Z_k([0,T] x [0,X]) = 0), z = T X^alpha, for models whose
/// configurations all carry a single offset (children of an individual then form a
/// Poisson process with intensity dt x^{alpha-1} dx / Gamma(alpha)).
///
/// With I_k = -log g_k and h_k = 1 - g_k, the branching property gives
///   I_k(z) = z / Gamma(alpha+1) * int_0^1 Q_{k-1}(z (1 - r^{1/alpha})^alpha) dr,
///   Q_k(v) = v^{-1} int_0^v h_k(w) dw,  h_0 = 1,
/// which is tabulated on a logarithmic grid of z.
class GenerationVoidTable {
public:
    /// grid = 0 picks 16384 points for alpha = 1 and 4096 otherwise.
    GenerationVoidTable(Alpha alpha, int max_generation, double z_max, std::size_t grid = 0);

    Alpha alpha() const noexcept { return alpha_; }
    int max_generation() const noexcept { return static_cast<int>(log_i_.size()) - 1; }
    double z_max() const noexcept { return z_max_; }

    /// I_k(z) = -log P(no generation-k atom in a window of size z); k = 0 gives +inf.
    double log_void(int k, double z) const;
    double void_probability(int k, double z) const;
    /// 1 - g_k(z), accurate for tiny values.
    double hit_probability(int k, double z) const;
    double log_hit_probability(int k, double z) const;

    /// log Q_k(z) = log(z^{-1} int_0^z h_k), for 1 <= k < max_generation().
    double log_mean_hit(int k, double z) const;

private:
    double interp(const std::vector<double>& table, int slope, double z) const;

    Alpha alpha_;
    double z_max_;
    double log_z_min_;
    double step_;
    std::vector<std::vector<double>> log_i_;   // log I_k on the grid, k >= 1 (index 0 unused)
    std::vector<std::vector<double>> log_hc_;  // log int_0^z h_k on the grid, k >= 1
};

struct WindowAtom {
    double birth_time;
    double position;
};

/// True when every configuration of the model has exactly one offset.
bool single_offset_model(const NormalizedLambda& model);

/// Exact sample of the generation-n atoms inside [0,T] x [0,X]. Only individuals with
/// at least one generation-n descendant in the window are generated: the number of such
/// children of a kept individual is Poisson(I_m) conditioned to be >= 1 and their
/// locations are drawn from the intensity weighted by h_{m-1}. The table must cover T X^alpha and n.
std::vector<WindowAtom> sample_generation_window(const GenerationVoidTable& table, int n,
                                                 double T, double X, SplitMix64& rng,
                                                 std::uint64_t* individuals = nullptr);

}  // namespace bstable
