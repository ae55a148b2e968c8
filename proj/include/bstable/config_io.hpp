#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "bstable/measure.hpp"

namespace bstable {

/// Invalid configuration; the message names the offending line or field.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ModelConfig {
    Alpha alpha;
    LambdaSpec spec;
};

/// Run configuration. Everything is optional here; the CLI merges flags on top and
/// then insists on what each subcommand needs (the seed in particular).
struct RunConfig {
    std::optional<ModelConfig> model;
    std::optional<double> t_max;
    std::optional<double> x_max;
    std::optional<std::string> experiment;
    nlohmann::json parameters = nlohmann::json::object();
    std::optional<std::uint64_t> replicas;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output_dir;
    std::optional<unsigned> threads;
    std::optional<std::uint64_t> max_atoms;
};

/// {"alpha": a, "entries": [{"weight": w, "offsets": [x1, ...]}, ...]}
ModelConfig parse_model(const nlohmann::json& j, const std::string& where = "model");

/// Either a bare model document or a run document with the fields
/// model, window {t_max, x_max}, experiment {name, ...parameters}, replicas, seed,
/// output_dir, threads, max_atoms.
RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::string& path);

nlohmann::json model_to_json(const ModelConfig& model);

}  // namespace bstable
