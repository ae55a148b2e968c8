#include "bstable/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

namespace bstable {

Window::Window(double t_max, double x_max) : t_max(t_max), x_max(x_max) {
    if (!(t_max > 0.0) || !std::isfinite(t_max) || !(x_max > 0.0) || !std::isfinite(x_max)) {
        throw std::invalid_argument("window bounds must be finite and > 0");
    }
}

// ---------------------------------------------------------------------------
// Population

Population::Population(std::vector<AtomRecord> atoms, Window window, std::uint64_t seed,
                       NormalizedLambda model, bool truncated,
                       std::optional<std::uint32_t> max_generation,
                       std::uint64_t discarded_children)
    : atoms_(std::move(atoms)),
      window_(window),
      seed_(seed),
      model_(std::move(model)),
      truncated_(truncated),
      max_generation_(max_generation),
      discarded_children_(discarded_children) {
    if (atoms_.empty()) throw std::invalid_argument("population must contain the root");
}

const AtomRecord& Population::atom(AtomId id) const {
    if (id >= atoms_.size()) throw std::out_of_range("unknown atom id");
    return atoms_[id];
}

void Population::require_complete(std::optional<std::uint32_t> generation) const {
    if (truncated_) {
        throw PopulationError("population hit the atom cap; statistics are refused");
    }
    if (max_generation_ && (!generation || *generation > *max_generation_)) {
        throw PopulationError("population is generation-capped below the requested statistic");
    }
}

std::optional<std::string> Population::validate() const {
    auto fail = [](std::size_t i, const char* what) {
        std::ostringstream os;
        os << "atom " << i << ": " << what;
        return std::optional<std::string>(os.str());
    };
    const AtomRecord& root = atoms_.front();
    if (root.id != 0 || root.parent != kNoParent || root.birth_time != 0.0 ||
        root.position != 0.0 || root.generation != 0) {
        return fail(0, "root must be id 0 at (0, 0), generation 0, without parent");
    }
    for (std::size_t i = 1; i < atoms_.size(); ++i) {
        const AtomRecord& a = atoms_[i];
        if (a.id != i) return fail(i, "id does not match index");
        if (a.birth_time < atoms_[i - 1].birth_time) return fail(i, "not sorted by birth time");
        // Parents precede children, which makes the genealogy acyclic and rooted.
        if (a.parent == kNoParent || a.parent >= i) return fail(i, "parent must precede child");
        const AtomRecord& p = atoms_[a.parent];
        if (!(a.position > p.position)) return fail(i, "child not strictly right of parent");
        if (!(a.birth_time > p.birth_time)) return fail(i, "child not born strictly after parent");
        if (a.generation != p.generation + 1) return fail(i, "generation != parent generation + 1");
        if (a.birth_time > window_.t_max || a.position > window_.x_max) {
            return fail(i, "atom outside the window");
        }
        if (max_generation_ && a.generation > *max_generation_) {
            return fail(i, "generation above the cap");
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Reproduction

ReproductionSampler::ReproductionSampler(const NormalizedLambda& model)
    : model_(model),
      alpha_(model.alpha().value()),
      inv_alpha_(1.0 / model.alpha().value()),
      first_rate_(first_atom_rate(model.spec(), model.alpha())) {
    const auto entries = model_.spec().entries();
    cumulative_.reserve(entries.size());
    double acc = 0.0;
    for (const auto& e : entries) {
        acc += e.weight * std::pow(e.config.first(), -alpha_);
        cumulative_.push_back(acc);
    }
    for (double& c : cumulative_) c /= acc;
    cumulative_.back() = 1.0;
}

double ReproductionSampler::rate(double budget) const {
    if (!(budget > 0.0)) return 0.0;
    return std::pow(budget, alpha_) * inv_alpha_ * first_rate_;
}

ReproductionEvent ReproductionSampler::sample(double budget, SplitMix64& rng) const {
    std::size_t j = 0;
    if (cumulative_.size() > 1) {
        const double u = uniform_open01(rng);
        j = static_cast<std::size_t>(
            std::lower_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
        j = std::min(j, cumulative_.size() - 1);
    }
    const double cap = budget / model_.spec().entries()[j].config.first();
    const double y = cap * std::pow(uniform_open01(rng), inv_alpha_);
    return {rate(budget), j, y};
}

std::optional<ReproductionEvent> sample_reproduction_event(const NormalizedLambda& model,
                                                           double budget, SplitMix64& rng) {
    if (!(budget > 0.0)) return std::nullopt;
    return ReproductionSampler(model).sample(budget, rng);
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

struct Pending {
    double birth_time;
    std::uint64_t seq;  // tie-break for siblings born in one event
    double position;
    AtomId parent;
    std::uint32_t generation;
};

struct LaterFirst {
    bool operator()(const Pending& a, const Pending& b) const noexcept {
        if (a.birth_time != b.birth_time) return a.birth_time > b.birth_time;
        return a.seq > b.seq;
    }
};

}  // namespace

Population simulate_population(const NormalizedLambda& model, const Window& window,
                               std::uint64_t seed, const SimulationCaps& caps) {
    if (caps.max_atoms == 0 || caps.max_atoms >= kNoParent) {
        throw std::invalid_argument("max_atoms must lie in [1, 2^32 - 1)");
    }
    const ReproductionSampler sampler(model);
    const auto entries = model.spec().entries();

    std::vector<AtomRecord> atoms;
    std::priority_queue<Pending, std::vector<Pending>, LaterFirst> queue;
    std::uint64_t seq = 0;
    std::uint64_t discarded = 0;
    bool truncated = false;

    queue.push({0.0, seq++, 0.0, kNoParent, 0});
    while (!queue.empty()) {
        const Pending next = queue.top();
        queue.pop();
        if (atoms.size() >= caps.max_atoms) {
            truncated = true;
            break;
        }
        const auto id = static_cast<AtomId>(atoms.size());
        atoms.push_back({id, next.parent, next.generation, next.birth_time, next.position});

        if (caps.max_generation && next.generation >= *caps.max_generation) continue;
        const double budget = window.x_max - next.position;
        const double rate = sampler.rate(budget);
        if (!(rate > 0.0)) continue;

        // The individual's own stream; its whole reproduction record on
        // (birth, t_max] is drawn at once since it does not depend on anyone else.
        SplitMix64 rng(derive_seed(seed, id));
        double t = next.birth_time;
        for (;;) {
            t += standard_exponential(rng) / rate;
            if (t > window.t_max) break;
            const double birth = t > next.birth_time
                                     ? t
                                     : std::nextafter(next.birth_time, window.t_max);
            const ReproductionEvent ev = sampler.sample(budget, rng);
            const auto offsets = entries[ev.config].config.offsets();
            for (std::size_t k = 0; k < offsets.size(); ++k) {
                const double off = ev.dilation_y * offsets[k];
                if (off > budget) {
                    discarded += offsets.size() - k;
                    break;
                }
                double pos = std::min(next.position + off, window.x_max);
                if (!(pos > next.position)) pos = std::nextafter(next.position, window.x_max);
                queue.push({birth, seq++, pos, id, next.generation + 1});
            }
        }
    }
    return Population(std::move(atoms), window, seed, model, truncated, caps.max_generation,
                      discarded);
}

// ---------------------------------------------------------------------------
// Statistics

namespace {

void require_inside(const Population& pop, double t, double x) {
    const Window& w = pop.window();
    if (!(t >= 0.0 && t <= w.t_max && x >= 0.0 && x <= w.x_max)) {
        throw std::out_of_range("(t, x) lies outside the simulation window");
    }
}

// Atoms with birth_time <= t form a prefix.
std::span<const AtomRecord> born_by(const Population& pop, double t) {
    const auto atoms = pop.atoms();
    const auto end = std::upper_bound(atoms.begin(), atoms.end(), t,
                                      [](double v, const AtomRecord& a) { return v < a.birth_time; });
    return atoms.first(static_cast<std::size_t>(end - atoms.begin()));
}

}  // namespace

std::uint64_t count_cdf(const Population& pop, double t, double x) {
    pop.require_complete();
    require_inside(pop, t, x);
    std::uint64_t n = 0;
    for (const auto& a : born_by(pop, t)) n += (a.position <= x);
    return n;
}

std::uint64_t generation_count(const Population& pop, std::uint32_t n, double t, double x) {
    pop.require_complete(n);
    require_inside(pop, t, x);
    std::uint64_t count = 0;
    for (const auto& a : born_by(pop, t)) count += (a.generation == n && a.position <= x);
    return count;
}

double martingale_tail_bias_bound(Alpha alpha, double theta, double t, double x_max) {
    const double a = alpha.value();
    const double s = t * std::pow(theta, -a);
    const double bx = theta * x_max;
    // Terms are s^n/n! Q(a n, theta x_max) with Q <= 1; once n > s the Poisson
    // weights decay geometrically and bound the remainder.
    double log_weight = -s;  // log(e^{-s} s^n / n!) at n = 0
    double total = 0.0;
    for (int n = 1; n < 100000; ++n) {
        log_weight += std::log(s) - std::log(static_cast<double>(n));
        const double w = std::exp(log_weight);
        total += w * boost::math::gamma_q(a * n, bx);
        const double ratio = s / (n + 1.0);
        if (ratio < 0.5) {
            const double remainder = w * ratio / (1.0 - ratio);
            if (remainder <= 1e-3 * total || remainder < 1e-300) {
                return total + remainder;
            }
        }
    }
    return total;
}

MartingaleValue martingale_W(const Population& pop, double theta, double t) {
    pop.require_complete();
    if (!(theta > 0.0)) throw std::invalid_argument("theta must be > 0");
    if (!(t >= 0.0 && t <= pop.window().t_max)) {
        throw std::out_of_range("t lies outside the simulation window");
    }
    const Alpha alpha = pop.model().alpha();
    double sum = 0.0;
    for (const auto& a : born_by(pop, t)) sum += std::exp(-theta * a.position);
    const double scale = std::exp(-t * std::pow(theta, -alpha.value()));
    return {scale * sum, martingale_tail_bias_bound(alpha, theta, t, pop.window().x_max)};
}

std::vector<LineagePoint> lineage(const Population& pop, AtomId id) {
    std::vector<LineagePoint> path;
    AtomId cur = id;
    pop.atom(id);
    for (;;) {
        const AtomRecord& a = pop.atom(cur);
        path.push_back({a.birth_time, a.position});
        if (a.parent == kNoParent) break;
        cur = a.parent;
    }
    std::reverse(path.begin(), path.end());
    return path;
}

Population dilate_population(const Population& pop, double c) {
    if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("dilation factor must be > 0");
    const double time_factor = std::pow(c, -pop.model().alpha().value());
    std::vector<AtomRecord> atoms(pop.atoms().begin(), pop.atoms().end());
    for (auto& a : atoms) {
        a.birth_time *= time_factor;
        a.position *= c;
    }
    Window w(pop.window().t_max * time_factor, pop.window().x_max * c);
    // Rounding can push an atom a hair past the scaled bound.
    for (auto& a : atoms) {
        a.birth_time = std::min(a.birth_time, w.t_max);
        a.position = std::min(a.position, w.x_max);
    }
    return Population(std::move(atoms), w, pop.seed(), pop.model(), pop.truncated(),
                      pop.max_generation(), pop.discarded_children());
}

std::optional<double> min_position_generation_n(const Population& pop, std::uint32_t n) {
    pop.require_complete(n);
    if (pop.window().t_max < 1.0) throw std::out_of_range("min position needs t_max >= 1");
    std::optional<double> best;
    for (const auto& a : born_by(pop, 1.0)) {
        if (a.generation == n && (!best || a.position < *best)) best = a.position;
    }
    return best;
}

// ---------------------------------------------------------------------------
// CSV

void write_atom_csv_header(std::ostream& out) {
    out << "replica,id,parent,generation,birth_time,position\n";
}

void write_atom_csv(std::ostream& out, const Population& pop, std::uint64_t replica) {
    const auto old_precision = out.precision(17);
    for (const auto& a : pop.atoms()) {
        out << replica << ',' << a.id << ',';
        if (a.parent == kNoParent) {
            out << -1;
        } else {
            out << a.parent;
        }
        out << ',' << a.generation << ',' << a.birth_time << ',' << a.position << '\n';
    }
    out.precision(old_precision);
}

std::map<std::uint64_t, std::vector<AtomRecord>> read_atom_csv(std::istream& in) {
    std::map<std::uint64_t, std::vector<AtomRecord>> out;
    std::string line;
    if (!std::getline(in, line) || line != "replica,id,parent,generation,birth_time,position") {
        throw std::runtime_error("atom csv: missing or malformed header");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field[6];
        for (int i = 0; i < 6; ++i) {
            if (!std::getline(row, field[i], ',')) {
                throw std::runtime_error("atom csv line " + std::to_string(line_no) +
                                         ": expected 6 fields");
            }
        }
        try {
            AtomRecord a{};
            const auto replica = std::stoull(field[0]);
            a.id = static_cast<AtomId>(std::stoul(field[1]));
            const long long parent = std::stoll(field[2]);
            a.parent = parent < 0 ? kNoParent : static_cast<AtomId>(parent);
            a.generation = static_cast<std::uint32_t>(std::stoul(field[3]));
            a.birth_time = std::stod(field[4]);
            a.position = std::stod(field[5]);
            out[replica].push_back(a);
        } catch (const std::logic_error&) {
            throw std::runtime_error("atom csv line " + std::to_string(line_no) +
                                     ": unparsable field");
        }
    }
    for (auto& [replica, atoms] : out) {
        std::sort(atoms.begin(), atoms.end(),
                  [](const AtomRecord& a, const AtomRecord& b) { return a.id < b.id; });
    }
    return out;
}

}  // namespace bstable
