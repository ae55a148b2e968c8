#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bstable/measure.hpp"
#include "bstable/simulator.hpp"
#include "bstable/stats.hpp"

namespace bstable {

enum class Verdict { pass, fail, inconclusive };

const char* to_string(Verdict v);

/// One decision of an experiment. `rule` spells out the tolerance in words and numbers;
/// informational checks (hard == false) never affect the overall verdict.
struct Check {
    std::string name;
    double statistic;
    double reference;
    double tolerance;
    std::string rule;
    Verdict verdict;
    bool hard = true;
};

struct ExperimentReport {
    std::string name;
    nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
    std::uint64_t seed = 0;
    std::vector<Check> checks;
    nlohmann::ordered_json diagnostics = nlohmann::ordered_json::object();
    std::vector<std::string> replica_columns;
    std::vector<std::vector<double>> replica_rows;
    double runtime_seconds = 0.0;

    /// fail if any hard check fails, else inconclusive if any hard check is, else pass.
    Verdict verdict() const;
    const Check& check(const std::string& name) const;
};

nlohmann::ordered_json to_json(const ExperimentReport& report, bool include_runtime = true);
void write_replica_csv(std::ostream& out, const ExperimentReport& report);

/// Thrown before (or instead of) a run whose expected size exceeds the atom cap,
/// or whose censoring makes the statistic meaningless.
class InfeasibleRun : public std::runtime_error {
public:
    InfeasibleRun(const std::string& what, double expected_count)
        : std::runtime_error(what), expected_count(expected_count) {}
    double expected_count;
};

struct RunOptions {
    unsigned threads = 1;
    std::size_t max_atoms = 10'000'000;
};

/// Evaluates fn(0..count-1) on a pool of `threads` workers; results are ordered by index,
/// so the outcome does not depend on scheduling.
template <class T>
std::vector<T> parallel_map(std::uint64_t count, unsigned threads,
                            const std::function<T(std::uint64_t)>& fn) {
    std::vector<std::optional<T>> slots(count);
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::uint64_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    const auto n = static_cast<unsigned>(
        std::clamp<std::uint64_t>(std::min<std::uint64_t>(threads, count), 1, 1024));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
    }
    if (error) std::rethrow_exception(error);
    std::vector<T> out;
    out.reserve(count);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// |estimate - reference| <= 3 se + bias.
Check mean_check(std::string name, const Estimate& est, double reference, double bias = 0.0,
                 bool hard = true);
/// p > 0.01.
Check ks_check(std::string name, const KsResult& ks, bool hard = true);

// Experiments. All are deterministic in their arguments and seed.

ExperimentReport verify_mean_cdf(const NormalizedLambda& model, double t, double x,
                                 std::uint64_t replicas, std::uint64_t seed,
                                 const RunOptions& opts = {});

ExperimentReport verify_intensity(const NormalizedLambda& model, const std::vector<int>& n_list,
                                  double t, double x, std::uint64_t replicas, std::uint64_t seed,
                                  const RunOptions& opts = {});

/// x_max defaults to the point where the void probability is 1e-6.
ExperimentReport verify_first_atom(const NormalizedLambda& model, double t,
                                   std::uint64_t replicas, std::uint64_t seed,
                                   std::optional<double> x_max = std::nullopt,
                                   const RunOptions& opts = {});

/// ks_replicas defaults to replicas.
ExperimentReport verify_martingale(const NormalizedLambda& model,
                                   const std::vector<double>& theta_list, double t,
                                   std::uint64_t replicas, std::uint64_t seed,
                                   std::optional<double> x_max = std::nullopt,
                                   std::optional<std::uint64_t> ks_replicas = std::nullopt,
                                   const RunOptions& opts = {});

ExperimentReport verify_T2_window(const NormalizedLambda& model, const std::vector<double>& t_list,
                                  double a, std::uint64_t replicas, std::uint64_t seed,
                                  const RunOptions& opts = {});

ExperimentReport min_position_experiment(const NormalizedLambda& model,
                                         const std::vector<int>& n_list, std::uint64_t replicas,
                                         double x_max, std::uint64_t seed,
                                         const RunOptions& opts = {});

/// Hull of generation-n atoms rescaled by 1/n, observed through the window
/// [0, w n] x [0, w (c_alpha + eta) n] of the time-n picture. Single-offset models use the
/// reduced-tree sampler, others the full population.
ExperimentReport convex_hull_experiment(const NormalizedLambda& model, int n, double eta,
                                        std::uint64_t replicas, std::uint64_t seed,
                                        double window_factor = 1.05,
                                        const RunOptions& opts = {});

inline constexpr int kMaxReducedGeneration = 60;

/// Expected work per replica of convex_hull_experiment, in simulated individuals.
double hull_expected_atoms(const NormalizedLambda& model, int n, double eta,
                           double window_factor = 1.05);

/// Largest n whose total expected work over all replicas stays within the budget.
int largest_feasible_hull_n(const NormalizedLambda& model, double eta, std::uint64_t replicas,
                            double atom_budget, double window_factor = 1.05);

ExperimentReport scaling_invariance(const NormalizedLambda& model, const std::vector<double>& c_list,
                                    double t, double x, std::uint64_t replicas, std::uint64_t seed,
                                    const RunOptions& opts = {});

ExperimentReport verify_many_to_one(const NormalizedLambda& model, const std::vector<int>& n_list,
                                    std::uint64_t lhs_replicas, std::uint64_t rhs_replicas,
                                    std::uint64_t seed, const RunOptions& opts = {});

/// Counts at (t, x) from windows with x_max = x and x_max = 2x; every population is
/// also checked against the structural invariants.
ExperimentReport truncation_exactness(const NormalizedLambda& model, double t, double x,
                                      std::uint64_t replicas, std::uint64_t seed,
                                      double ks_threshold = 0.01, const RunOptions& opts = {});

std::vector<std::string> experiment_names();

}  // namespace bstable
