#include <doctest.h>

#include <string>

#include "bstable/config_io.hpp"

using namespace bstable;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_run_config(text, "cfg");
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("full run document") {
    const RunConfig c = parse_run_config(R"({
        "model": {"alpha": 1.5, "entries": [{"weight": 2, "offsets": [3, 1]}]},
        "window": {"t_max": 1, "x_max": 4},
        "experiment": {"name": "verify_mean_cdf", "t": 0.5, "x": 2},
        "replicas": 1000, "seed": 7, "output_dir": "out", "threads": 2, "max_atoms": 5000
    })");
    REQUIRE(c.model.has_value());
    CHECK(c.model->alpha.value() == 1.5);
    CHECK(c.model->spec.entries()[0].config.offsets()[0] == 1.0);
    CHECK(c.model->spec.entries()[0].config.offsets()[1] == 3.0);
    CHECK(*c.t_max == 1.0);
    CHECK(*c.x_max == 4.0);
    CHECK(*c.experiment == "verify_mean_cdf");
    CHECK(c.parameters["t"] == 0.5);
    CHECK(c.parameters["x"] == 2);
    CHECK(*c.replicas == 1000);
    CHECK(*c.seed == 7);
    CHECK(*c.output_dir == "out");
    CHECK(*c.threads == 2);
    CHECK(*c.max_atoms == 5000);
}

TEST_CASE("bare model document and round trip") {
    const RunConfig c = parse_run_config(R"({"alpha": 1, "entries": [{"weight": 1, "offsets": [1]}]})");
    REQUIRE(c.model.has_value());
    CHECK_FALSE(c.seed.has_value());
    const auto j = model_to_json(*c.model);
    const ModelConfig back = parse_model(j);
    CHECK(back.alpha.value() == 1.0);
    CHECK(back.spec.entries().size() == 1);
}

TEST_CASE("errors name the field or line") {
    CHECK(error_of(R"({"alpha": 1, "entries": [{"weight": 1, "offsets": [1, -2]}]})")
              .find("model.entries[0].offsets[1]") != std::string::npos);
    CHECK(error_of(R"({"model": {"alpha": 0, "entries": [{"weight": 1, "offsets": [1]}]}})")
              .find("model.alpha") != std::string::npos);
    CHECK(error_of(R"({"sed": 3})").find("sed") != std::string::npos);
    CHECK(error_of(R"({"window": {"t_max": 1, "y": 2}})").find("window.y") != std::string::npos);
    CHECK(error_of(R"({"seed": -1})").find("seed") != std::string::npos);
    CHECK(error_of(R"({"experiment": 3})").find("experiment") != std::string::npos);
    CHECK(error_of("{\n\"seed\": 1,\n\"replicas\": ,\n}").find("line 3") != std::string::npos);
    CHECK(error_of("[1]").find("top level") != std::string::npos);
    CHECK(error_of(R"({"model": {"alpha": 1, "entries": []}})").find("model.entries") != std::string::npos);
    CHECK_THROWS_AS(load_run_config("/nonexistent/file.json"), ConfigError);
}
