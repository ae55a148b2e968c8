// Command-line front end: simulate, analytic, spine, experiment, list-experiments.
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bstable/analytic.hpp"
#include "bstable/config_io.hpp"
#include "bstable/harness.hpp"
#include "bstable/measure.hpp"
#include "bstable/simulator.hpp"
#include "bstable/spine.hpp"

namespace {

using namespace bstable;
using Json = nlohmann::json;

enum Exit { kPass = 0, kCheckFailed = 1, kUsage = 2, kInfeasible = 3 };

struct Common {
    std::string config_path;
    std::optional<double> alpha;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> replicas;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> max_atoms;
    std::optional<std::string> out;
};

RunConfig load(const Common& c) {
    RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
    if (c.seed) cfg.seed = c.seed;
    if (c.replicas) cfg.replicas = c.replicas;
    if (c.threads) cfg.threads = c.threads;
    if (c.max_atoms) cfg.max_atoms = c.max_atoms;
    if (c.out) cfg.output_dir = c.out;
    return cfg;
}

// --alpha overrides the config; without any model the unit single-atom family is used.
NormalizedLambda resolve_model(const RunConfig& cfg, std::optional<double> alpha,
                               std::optional<double> fallback_alpha = std::nullopt) {
    if (cfg.model) {
        const Alpha a = alpha ? Alpha(*alpha) : cfg.model->alpha;
        return normalize_lambda(cfg.model->spec, a);
    }
    if (!alpha) alpha = fallback_alpha;
    if (!alpha) throw ConfigError("no model: give --alpha or a config with a model");
    return unit_atom_model(Alpha(*alpha));
}

std::uint64_t require_seed(const RunConfig& cfg) {
    if (!cfg.seed) throw ConfigError("field seed: missing (give --seed or set it in the config)");
    return *cfg.seed;
}

RunOptions run_options(const RunConfig& cfg) {
    RunOptions o;
    if (cfg.threads) o.threads = std::max(1u, *cfg.threads);
    if (cfg.max_atoms) o.max_atoms = static_cast<std::size_t>(*cfg.max_atoms);
    return o;
}

void print_value(double v) { std::cout << std::setprecision(17) << v << '\n'; }

// Experiment parameters: a flag wins over the config file, which wins over the default.
class Params {
public:
    explicit Params(const Json& file) : file_(file) {}

    template <class T>
    T get(const std::string& key, const std::optional<T>& flag, const T& fallback) const {
        if (flag) return *flag;
        if (file_.contains(key)) {
            try {
                return file_.at(key).get<T>();
            } catch (const Json::exception&) {
                throw ConfigError("field experiment." + key + ": wrong type");
            }
        }
        return fallback;
    }

    template <class T>
    std::optional<T> get_opt(const std::string& key, const std::optional<T>& flag) const {
        if (flag) return flag;
        if (file_.contains(key)) {
            try {
                return file_.at(key).get<T>();
            } catch (const Json::exception&) {
                throw ConfigError("field experiment." + key + ": wrong type");
            }
        }
        return std::nullopt;
    }

private:
    const Json& file_;
};

struct ExperimentFlags {
    std::string name;
    std::optional<double> t, x, a, eta, x_max, window_factor;
    std::optional<int> n;
    std::optional<std::vector<int>> n_list;
    std::optional<std::vector<double>> theta_list, t_list, c_list;
    std::optional<std::uint64_t> ks_replicas, lhs_replicas, rhs_replicas;
    bool no_runtime = false;
};

ExperimentReport dispatch(const ExperimentFlags& f, const RunConfig& cfg, const NormalizedLambda& model) {
    const Params p(cfg.parameters);
    const std::uint64_t seed = require_seed(cfg);
    const RunOptions opts = run_options(cfg);
    const auto replicas = [&](std::uint64_t fallback) { return cfg.replicas.value_or(fallback); };
    const std::string& name = f.name;

    if (name == "verify_mean_cdf") {
        return verify_mean_cdf(model, p.get("t", f.t, 1.0), p.get("x", f.x, 1.0), replicas(100000), seed, opts);
    }
    if (name == "verify_intensity") {
        return verify_intensity(model, p.get("n_list", f.n_list, std::vector<int>{1, 2, 3, 4}),
                                p.get("t", f.t, 1.0), p.get("x", f.x, 1.0), replicas(100000), seed, opts);
    }
    if (name == "verify_first_atom") {
        return verify_first_atom(model, p.get("t", f.t, 1.0), replicas(10000), seed,
                                 p.get_opt("x_max", f.x_max), opts);
    }
    if (name == "verify_martingale") {
        return verify_martingale(model, p.get("theta_list", f.theta_list, std::vector<double>{1.0, 2.0}),
                                 p.get("t", f.t, 1.0), replicas(100000), seed, p.get_opt("x_max", f.x_max),
                                 p.get_opt("ks_replicas", f.ks_replicas), opts);
    }
    if (name == "verify_T2_window") {
        return verify_T2_window(model, p.get("t_list", f.t_list, std::vector<double>{7.0, 8.0}),
                                p.get("a", f.a, 6.0), replicas(300), seed, opts);
    }
    if (name == "min_position_experiment") {
        return min_position_experiment(model, p.get("n_list", f.n_list, std::vector<int>{4, 6, 8}),
                                       replicas(1000), p.get("x_max", f.x_max, 25.0), seed, opts);
    }
    if (name == "convex_hull_experiment") {
        const Alpha alpha = model.alpha();
        const double eta = p.get("eta", f.eta, 0.5 * c_alpha_const(alpha));
        const double wf = p.get("window_factor", f.window_factor, 1.05);
        const std::uint64_t reps = replicas(200);
        // Without n, take the largest n affordable at 1e8 expected individuals in total.
        const int n = p.get("n", f.n, largest_feasible_hull_n(model, eta, reps, 1e8, wf));
        return convex_hull_experiment(model, n, eta, reps, seed, wf, opts);
    }
    if (name == "scaling_invariance") {
        return scaling_invariance(model, p.get("c_list", f.c_list, std::vector<double>{0.5, 2.0}),
                                  p.get("t", f.t, 1.0), p.get("x", f.x, 2.0), replicas(20000), seed, opts);
    }
    if (name == "verify_many_to_one") {
        return verify_many_to_one(model, p.get("n_list", f.n_list, std::vector<int>{1, 2, 3}),
                                  p.get("lhs_replicas", f.lhs_replicas, replicas(100000)),
                                  p.get("rhs_replicas", f.rhs_replicas, replicas(100000)), seed, opts);
    }
    if (name == "truncation_exactness") {
        return truncation_exactness(model, p.get("t", f.t, 1.0), p.get("x", f.x, 2.0), replicas(10000), seed,
                                    0.01, opts);
    }
    throw ConfigError("unknown experiment '" + name + "' (see list-experiments)");
}

int run_experiment(const ExperimentFlags& f, const Common& common) {
    RunConfig cfg = load(common);
    ExperimentFlags flags = f;
    if (flags.name.empty() && cfg.experiment) flags.name = *cfg.experiment;
    if (flags.name.empty()) throw ConfigError("no experiment name given");
    if (cfg.experiment && *cfg.experiment != flags.name) cfg.parameters = Json::object();
    const NormalizedLambda model = resolve_model(cfg, common.alpha, 1.0);
    const ExperimentReport report = dispatch(flags, cfg, model);
    const std::string doc = to_json(report, !flags.no_runtime).dump(2);

    std::ostream* summary = &std::cout;
    if (cfg.output_dir) {
        std::filesystem::create_directories(*cfg.output_dir);
        const std::filesystem::path dir(*cfg.output_dir);
        std::ofstream(dir / (report.name + ".json")) << doc << '\n';
        std::ofstream csv(dir / (report.name + "_replicas.csv"));
        write_replica_csv(csv, report);
    } else {
        std::cout << doc << '\n';
        summary = &std::cerr;
    }
    std::size_t passed = 0;
    std::size_t hard = 0;
    for (const auto& c : report.checks) {
        if (!c.hard) continue;
        ++hard;
        passed += c.verdict == Verdict::pass;
    }
    *summary << report.name << ": " << to_string(report.verdict()) << " (" << passed << "/" << hard
             << " hard checks passed, seed " << report.seed << ")\n";
    return report.verdict() == Verdict::pass ? kPass : kCheckFailed;
}

int run_simulate(const Common& common, std::optional<double> t_max, std::optional<double> x_max,
                 std::optional<std::uint32_t> max_generation) {
    RunConfig cfg = load(common);
    if (t_max) cfg.t_max = t_max;
    if (x_max) cfg.x_max = x_max;
    if (!cfg.t_max) throw ConfigError("field window.t_max: missing");
    if (!cfg.x_max) throw ConfigError("field window.x_max: missing");
    const std::uint64_t seed = require_seed(cfg);
    const NormalizedLambda model = resolve_model(cfg, common.alpha);
    const Window window(*cfg.t_max, *cfg.x_max);
    const RunOptions opts = run_options(cfg);

    const WrightEval expected = mean_cdf(model.alpha(), window.t_max, window.x_max);
    std::cerr << "expected atoms per replica: " << expected.value << '\n';
    if (expected.overflow || expected.value > static_cast<double>(opts.max_atoms)) {
        std::cerr << "refusing: expected atom count exceeds the cap " << opts.max_atoms << '\n';
        return kInfeasible;
    }
    SimulationCaps caps;
    caps.max_atoms = opts.max_atoms;
    caps.max_generation = max_generation;

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (cfg.output_dir) {
        file.open(*cfg.output_dir);
        if (!file) throw ConfigError("cannot write " + *cfg.output_dir);
        out = &file;
    }
    write_atom_csv_header(*out);
    const std::uint64_t replicas = cfg.replicas.value_or(1);
    bool truncated = false;
    for (std::uint64_t r = 0; r < replicas; ++r) {
        const Population pop = simulate_population(model, window, derive_seed(seed, r), caps);
        truncated = truncated || pop.truncated();
        write_atom_csv(*out, pop, r);
    }
    if (truncated) {
        std::cerr << "warning: atom cap reached; the dump is flagged incomplete\n";
        return kInfeasible;
    }
    return kPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Branching-stable point measures: simulation, closed forms and experiments"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "JSON model or run configuration")->check(CLI::ExistingFile);
        sub->add_option("--alpha", common.alpha, "self-similarity index (overrides the config)");
        sub->add_option("--seed", common.seed, "master seed (mandatory for random runs)");
        sub->add_option("--replicas", common.replicas, "number of replicas");
        sub->add_option("--threads", common.threads, "worker threads");
        sub->add_option("--max-atoms", common.max_atoms, "atom cap per population");
    };

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate populations and dump atoms as CSV");
    add_common(sim);
    std::optional<double> sim_t, sim_x;
    std::optional<std::uint32_t> sim_gen;
    sim->add_option("--t-max", sim_t, "time horizon");
    sim->add_option("--x-max", sim_x, "spatial cutoff");
    sim->add_option("--max-generation", sim_gen, "individuals of this generation do not reproduce");
    sim->add_option("--out", common.out, "output CSV file (default stdout)");

    // analytic
    auto* ana = app.add_subcommand("analytic", "evaluate closed-form quantities");
    ana->require_subcommand(1);
    double rho = 1, beta = 1, z = 0, t = 1, x = 1, theta = 1, pa = 1, pb = 1, pp = 1, pq = 1, lp = 2;
    int n = 1;
    std::string ana_config;
    std::optional<double> ana_alpha;
    auto alpha_opt = [&](CLI::App* s) { s->add_option("--alpha", ana_alpha, "self-similarity index")->required(); };
    auto* a_wright = ana->add_subcommand("wright", "phi(rho, beta, z)");
    a_wright->add_option("--rho", rho)->required();
    a_wright->add_option("--beta", beta)->required();
    a_wright->add_option("--z", z)->required();
    auto* a_mean = ana->add_subcommand("mean-cdf", "E S_t([0,x])");
    alpha_opt(a_mean);
    a_mean->add_option("--t", t)->required();
    a_mean->add_option("--x", x)->required();
    auto* a_asym = ana->add_subcommand("asymptotic", "leading-order growth of E S_1([0,x])");
    alpha_opt(a_asym);
    a_asym->add_option("--x", x)->required();
    auto* a_lap = ana->add_subcommand("laplace", "exp(t theta^-alpha)");
    alpha_opt(a_lap);
    a_lap->add_option("--t", t)->required();
    a_lap->add_option("--theta", theta)->required();
    auto* a_int = ana->add_subcommand("intensity", "density and cumulative of mu_n");
    alpha_opt(a_int);
    a_int->add_option("--n", n)->required();
    a_int->add_option("--t", t)->required();
    a_int->add_option("--x", x)->required();
    auto* a_kappa = ana->add_subcommand("kappa", "-log(a b^alpha)");
    alpha_opt(a_kappa);
    a_kappa->add_option("--a", pa)->required();
    a_kappa->add_option("--b", pb)->required();
    auto* a_kstar = ana->add_subcommand("kappa-star", "Legendre transform of kappa");
    alpha_opt(a_kstar);
    a_kstar->add_option("--p", pp)->required();
    a_kstar->add_option("--q", pq)->required();
    auto* a_calpha = ana->add_subcommand("c-alpha", "alpha e^{-(alpha+1)/alpha}");
    alpha_opt(a_calpha);
    auto* a_region = ana->add_subcommand("region", "classify (p, q) against C_alpha");
    alpha_opt(a_region);
    a_region->add_option("--p", pp)->required();
    a_region->add_option("--q", pq)->required();
    auto* a_clam = ana->add_subcommand("c-lambda", "c(lambda) of a model file");
    auto* a_norm = ana->add_subcommand("normalize", "normalized model of a model file (JSON)");
    auto* a_lp = ana->add_subcommand("lp-integral", "L^p condition integral of a model file");
    auto* a_first = ana->add_subcommand("first-atom-rate", "sum_j w_j x_{j,1}^-alpha of a model file");
    for (auto* s : {a_clam, a_norm, a_lp, a_first}) {
        s->add_option("--config", ana_config, "model file")->required()->check(CLI::ExistingFile);
        s->add_option("--alpha", ana_alpha, "override alpha");
    }
    a_lp->add_option("--p", lp, "exponent in (1, 2]");

    // spine
    auto* spn = app.add_subcommand("spine", "spine estimates of the many-to-one right side");
    add_common(spn);
    int spine_n = 1;
    spn->add_option("--n", spine_n, "generation")->required();

    // experiment
    auto* exp = app.add_subcommand("experiment", "run a named experiment");
    add_common(exp);
    ExperimentFlags ef;
    exp->add_option("name", ef.name, "experiment name (see list-experiments)");
    exp->add_option("--out-dir", common.out, "write <name>.json and <name>_replicas.csv here");
    exp->add_option("--t", ef.t);
    exp->add_option("--x", ef.x);
    exp->add_option("--a", ef.a, "window width for verify_T2_window");
    exp->add_option("--eta", ef.eta);
    exp->add_option("--x-max", ef.x_max);
    exp->add_option("--window-factor", ef.window_factor);
    exp->add_option("--n", ef.n, "generation for convex_hull_experiment");
    exp->add_option("--n-list", ef.n_list)->delimiter(',');
    exp->add_option("--theta-list", ef.theta_list)->delimiter(',');
    exp->add_option("--t-list", ef.t_list)->delimiter(',');
    exp->add_option("--c-list", ef.c_list)->delimiter(',');
    exp->add_option("--ks-replicas", ef.ks_replicas);
    exp->add_option("--lhs-replicas", ef.lhs_replicas);
    exp->add_option("--rhs-replicas", ef.rhs_replicas);
    exp->add_flag("--no-runtime", ef.no_runtime, "omit runtime_seconds so reports compare byte for byte");

    auto* list = app.add_subcommand("list-experiments", "print the experiment names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (list->parsed()) {
            for (const auto& name : experiment_names()) std::cout << name << '\n';
            return kPass;
        }
        if (sim->parsed()) return run_simulate(common, sim_t, sim_x, sim_gen);
        if (exp->parsed()) return run_experiment(ef, common);
        if (spn->parsed()) {
            const RunConfig cfg = load(common);
            const NormalizedLambda model = resolve_model(cfg, common.alpha);
            const std::uint64_t seed = require_seed(cfg);
            const std::uint64_t reps = cfg.replicas.value_or(100000);
            if (spine_n < 1) throw ConfigError("--n must be >= 1");
            Json out = Json::array();
            std::uint64_t k = 0;
            for (const auto& f : builtin_functionals(static_cast<std::size_t>(spine_n))) {
                const SpineEstimate e =
                    many_to_one_rhs(model.alpha(), static_cast<std::size_t>(spine_n), f, reps, derive_seed(seed, k++));
                out.push_back({{"functional", f.name()},
                               {"mean", e.estimate.mean},
                               {"std_error", e.estimate.std_error},
                               {"replicas", e.estimate.replicas},
                               {"weight_cv", e.weight_cv},
                               {"effective_sample_size", e.effective_sample_size}});
            }
            std::cout << out.dump(2) << '\n';
            return kPass;
        }
        if (ana->parsed()) {
            if (a_wright->parsed()) {
                const WrightEval e = wright_phi(rho, beta, z);
                if (e.overflow) {
                    std::cout << "overflow log_value=" << std::setprecision(17) << e.log_value << '\n';
                } else {
                    print_value(e.value);
                }
                std::cerr << "terms " << e.terms_used << ", truncation bound " << e.truncation_bound << '\n';
            } else if (a_mean->parsed()) {
                const WrightEval e = mean_cdf(Alpha(*ana_alpha), t, x);
                if (e.overflow) {
                    std::cout << "overflow log_value=" << std::setprecision(17) << e.log_value << '\n';
                } else {
                    print_value(e.value);
                }
            } else if (a_asym->parsed()) {
                print_value(mean_cdf_asymptotic(Alpha(*ana_alpha), x));
            } else if (a_lap->parsed()) {
                print_value(laplace_mean(Alpha(*ana_alpha), t, theta));
            } else if (a_int->parsed()) {
                const IntensityValue v = intensity_mu_n(Alpha(*ana_alpha), n, t, x);
                std::cout << std::setprecision(17) << "density " << v.density << "\ncumulative " << v.cumulative
                          << '\n';
            } else if (a_kappa->parsed()) {
                print_value(cumulant_2d(Alpha(*ana_alpha), pa, pb));
            } else if (a_kstar->parsed()) {
                print_value(legendre_kappa_star(Alpha(*ana_alpha), pp, pq));
            } else if (a_calpha->parsed()) {
                print_value(c_alpha_const(Alpha(*ana_alpha)));
            } else if (a_region->parsed()) {
                std::cout << to_string(in_region_C_alpha(Alpha(*ana_alpha), {pp, pq})) << '\n';
            } else {
                const RunConfig cfg = load_run_config(ana_config);
                if (!cfg.model) throw ConfigError(ana_config + ": no model");
                const Alpha alpha = ana_alpha ? Alpha(*ana_alpha) : cfg.model->alpha;
                if (a_clam->parsed()) {
                    print_value(c_lambda(cfg.model->spec, alpha));
                } else if (a_first->parsed()) {
                    print_value(first_atom_rate(cfg.model->spec, alpha));
                } else if (a_lp->parsed()) {
                    const QuadratureResult q = lp_condition_integral(cfg.model->spec, alpha, lp);
                    print_value(q.value);
                    std::cerr << "relative error " << q.relative_error << ", tail bound " << q.tail_bound << '\n';
                } else {
                    const NormalizedLambda m = normalize_lambda(cfg.model->spec, alpha);
                    Json j = model_to_json({m.alpha(), m.spec()});
                    j["dilation_applied"] = m.dilation_applied();
                    std::cout << j.dump(2) << '\n';
                }
            }
            return kPass;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const InfeasibleRun& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const PopulationError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return kUsage;
    } catch (const std::out_of_range& e) {
        std::cerr << "out of range: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
