#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bstable/measure.hpp"
#include "bstable/random.hpp"

namespace bstable {

/// Observation window [0, t_max] x [0, x_max]. Truncating the simulation to it is exact
/// because children are always born later and further right than their parent.
struct Window {
    Window(double t_max, double x_max);

    double t_max;
    double x_max;
};

using AtomId = std::uint32_t;
inline constexpr AtomId kNoParent = 0xFFFFFFFFu;

struct AtomRecord {
    AtomId id;
    AtomId parent;  ///< kNoParent for the root
    std::uint32_t generation;
    double birth_time;
    double position;
};

struct SimulationCaps {
    std::size_t max_atoms = 10'000'000;
    /// Individuals of this generation do not reproduce. Statistics restricted to
    /// generations <= max_generation are unaffected.
    std::optional<std::uint32_t> max_generation;
};

/// Raised by statistics that refuse truncated (atom cap hit) or generation-capped populations.
class PopulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A window-truncated population: atoms sorted by birth time, id == index.
class Population {
public:
    Population(std::vector<AtomRecord> atoms, Window window, std::uint64_t seed,
               NormalizedLambda model, bool truncated = false,
               std::optional<std::uint32_t> max_generation = std::nullopt,
               std::uint64_t discarded_children = 0);

    std::span<const AtomRecord> atoms() const noexcept { return atoms_; }
    const AtomRecord& atom(AtomId id) const;
    std::size_t size() const noexcept { return atoms_.size(); }
    const Window& window() const noexcept { return window_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const NormalizedLambda& model() const noexcept { return model_; }

    /// True when the atom cap was reached; every statistic refuses such a population.
    bool truncated() const noexcept { return truncated_; }
    const std::optional<std::uint32_t>& max_generation() const noexcept { return max_generation_; }
    /// Children that fell beyond x_max. Diagnostic only.
    std::uint64_t discarded_children() const noexcept { return discarded_children_; }

    /// Throws PopulationError if truncated, or generation-capped below `generation`.
    void require_complete(std::optional<std::uint32_t> generation = std::nullopt) const;

    /// Checks every structural invariant; returns a description of the first violation.
    std::optional<std::string> validate() const;

private:
    std::vector<AtomRecord> atoms_;
    Window window_;
    std::uint64_t seed_;
    NormalizedLambda model_;
    bool truncated_;
    std::optional<std::uint32_t> max_generation_;
    std::uint64_t discarded_children_;
};

struct ReproductionEvent {
    double rate;          ///< total rate R of events whose nearest child fits in the budget
    std::size_t config;   ///< index into the model's entries
    double dilation_y;    ///< children sit at parent + y x_{j,k}
};

/// Precomputed sampler for the per-individual Poisson reproduction process
/// restricted to events with y x_{j,1} <= budget.
class ReproductionSampler {
public:
    explicit ReproductionSampler(const NormalizedLambda& model);

    /// R = (budget^alpha / alpha) * first_atom_rate; 0 when budget <= 0.
    double rate(double budget) const;

    /// Config j with probability proportional to w_j x_{j,1}^{-alpha}, then y with
    /// density alpha y^{alpha-1} / Y_j^alpha on (0, Y_j], Y_j = budget / x_{j,1}.
    ReproductionEvent sample(double budget, SplitMix64& rng) const;

    const NormalizedLambda& model() const noexcept { return model_; }

private:
    NormalizedLambda model_;
    double alpha_;
    double inv_alpha_;
    double first_rate_;
    std::vector<double> cumulative_;  // normalized cumulative of w_j x_{j,1}^{-alpha}
};

/// One event of the reproduction process; nullopt when budget <= 0 (sterile in the window).
std::optional<ReproductionEvent> sample_reproduction_event(const NormalizedLambda& model,
                                                           double budget, SplitMix64& rng);

/// Event-driven simulation by birth time. Deterministic in (model, window, seed, caps).
Population simulate_population(const NormalizedLambda& model, const Window& window,
                               std::uint64_t seed, const SimulationCaps& caps = {});

/// S_t([0, x]): atoms born by t at position <= x, root included.
std::uint64_t count_cdf(const Population& pop, double t, double x);

/// Z_n([0, t] x [0, x]).
std::uint64_t generation_count(const Population& pop, std::uint32_t n, double t, double x);

struct MartingaleValue {
    double value;
    double tail_bias_bound;  ///< bound on the expected contribution beyond x_max
};

/// W_t(theta) = exp(-t theta^{-alpha}) sum_{birth <= t} exp(-theta position).
MartingaleValue martingale_W(const Population& pop, double theta, double t);

/// exp(-s) sum_{n>=1} s^n/n! Q(alpha n, theta x_max), s = t theta^{-alpha}.
double martingale_tail_bias_bound(Alpha alpha, double theta, double t, double x_max);

struct LineagePoint {
    double birth_time;
    double position;
};

/// Ancestral line from the root (0, 0) to `id`, inclusive.
std::vector<LineagePoint> lineage(const Population& pop, AtomId id);

/// (t, x) -> (c^{-alpha} t, c x) on every atom and on the window.
Population dilate_population(const Population& pop, double c);

/// Minimal position of a generation-n atom born by time 1; nullopt when censored
/// (no such atom within x_max, so the minimum exceeds x_max).
std::optional<double> min_position_generation_n(const Population& pop, std::uint32_t n);

/// CSV: replica,id,parent,generation,birth_time,position (parent -1 for the root).
void write_atom_csv_header(std::ostream& out);
void write_atom_csv(std::ostream& out, const Population& pop, std::uint64_t replica);

/// Parses an atom dump back into per-replica atom lists (sorted by id).
std::map<std::uint64_t, std::vector<AtomRecord>> read_atom_csv(std::istream& in);

}  // namespace bstable
