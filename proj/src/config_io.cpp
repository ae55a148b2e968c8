#include "bstable/config_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace bstable {

namespace {

using Json = nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ConfigError("field " + where + ": " + what);
}

double positive_number(const Json& j, const std::string& where) {
    if (!j.is_number()) fail(where, "must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v) || !(v > 0.0)) fail(where, "must be a finite number > 0");
    return v;
}

std::uint64_t count_field(const Json& j, const std::string& where) {
    if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0)) {
        fail(where, "must be a non-negative integer");
    }
    return j.get<std::uint64_t>();
}

void reject_unknown(const Json& j, const std::string& where, std::initializer_list<const char*> known) {
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            fail(where.empty() ? key : where + "." + key, "unknown field");
        }
    }
}

}  // namespace

ModelConfig parse_model(const Json& j, const std::string& where) {
    if (!j.is_object()) fail(where, "must be an object");
    reject_unknown(j, where, {"alpha", "entries"});
    if (!j.contains("alpha")) fail(where + ".alpha", "missing");
    if (!j.contains("entries")) fail(where + ".entries", "missing");
    const double alpha = positive_number(j["alpha"], where + ".alpha");
    const Json& entries = j["entries"];
    if (!entries.is_array() || entries.empty()) fail(where + ".entries", "must be a non-empty array");
    std::vector<LambdaEntry> out;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string at = where + ".entries[" + std::to_string(i) + "]";
        const Json& e = entries[i];
        if (!e.is_object()) fail(at, "must be an object");
        reject_unknown(e, at, {"weight", "offsets"});
        if (!e.contains("weight")) fail(at + ".weight", "missing");
        if (!e.contains("offsets")) fail(at + ".offsets", "missing");
        const double w = positive_number(e["weight"], at + ".weight");
        const Json& offs = e["offsets"];
        if (!offs.is_array() || offs.empty()) fail(at + ".offsets", "must be a non-empty array");
        std::vector<double> xs;
        for (std::size_t k = 0; k < offs.size(); ++k) {
            xs.push_back(positive_number(offs[k], at + ".offsets[" + std::to_string(k) + "]"));
        }
        out.push_back({w, Config(std::move(xs))});
    }
    return {Alpha(alpha), LambdaSpec(std::move(out))};
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        const auto upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw ConfigError(source + ": line " + std::to_string(line) + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError(source + ": top level must be an object");

    RunConfig cfg;
    try {
        if (j.contains("entries")) {
            // A bare model document.
            cfg.model = parse_model(j, "model");
            return cfg;
        }
        reject_unknown(j, "", {"model", "window", "experiment", "replicas", "seed", "output_dir", "threads", "max_atoms"});
        if (j.contains("model")) cfg.model = parse_model(j["model"], "model");
        if (j.contains("window")) {
            const Json& w = j["window"];
            if (!w.is_object()) fail("window", "must be an object");
            reject_unknown(w, "window", {"t_max", "x_max"});
            if (w.contains("t_max")) cfg.t_max = positive_number(w["t_max"], "window.t_max");
            if (w.contains("x_max")) cfg.x_max = positive_number(w["x_max"], "window.x_max");
        }
        if (j.contains("experiment")) {
            const Json& e = j["experiment"];
            if (e.is_string()) {
                cfg.experiment = e.get<std::string>();
            } else if (e.is_object()) {
                if (!e.contains("name") || !e["name"].is_string()) fail("experiment.name", "missing or not a string");
                cfg.experiment = e["name"].get<std::string>();
                for (const auto& [key, value] : e.items()) {
                    if (key != "name") cfg.parameters[key] = value;
                }
            } else {
                fail("experiment", "must be a name or an object");
            }
        }
        if (j.contains("replicas")) cfg.replicas = count_field(j["replicas"], "replicas");
        if (j.contains("seed")) cfg.seed = count_field(j["seed"], "seed");
        if (j.contains("output_dir")) {
            if (!j["output_dir"].is_string()) fail("output_dir", "must be a string");
            cfg.output_dir = j["output_dir"].get<std::string>();
        }
        if (j.contains("threads")) cfg.threads = static_cast<unsigned>(count_field(j["threads"], "threads"));
        if (j.contains("max_atoms")) cfg.max_atoms = count_field(j["max_atoms"], "max_atoms");
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path);
}

Json model_to_json(const ModelConfig& model) {
    Json entries = Json::array();
    for (const auto& e : model.spec.entries()) {
        entries.push_back({{"weight", e.weight},
                           {"offsets", std::vector<double>(e.config.offsets().begin(), e.config.offsets().end())}});
    }
    return {{"alpha", model.alpha.value()}, {"entries", entries}};
}

}  // namespace bstable
