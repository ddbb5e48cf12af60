#include "doctest.h"

#include <cmath>
#include <string>

#include "mvflow/config.hpp"
#include "mvflow/error.hpp"

using namespace mvflow;

namespace {

const std::string kMinimalStability = R"(kind = stability
coefficients.preset = conv_ou
init_b.mean = 0.2
)";

std::string error_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("minimal stability config takes the documented defaults") {
    const auto c = parse_config_text(kMinimalStability);
    CHECK(c.kind == "stability");
    CHECK(c.preset == "conv_ou");
    CHECK(c.has_init_b);
    CHECK(c.init_b.mean == std::vector<double>{0.2});
    CHECK(c.init_b.std == 1.0);
    CHECK(c.init.kind == "gaussian");
    CHECK(c.init.mean == std::vector<double>{0.0});
    CHECK(c.t_end == 1.0);
    CHECK(c.n_steps == 100);
    CHECK(c.n_paths == 10000);
    CHECK(c.theta == 1.0);
    CHECK(c.metric == "rho_tilde");
    CHECK(c.tol == 0.02);
    CHECK(c.max_iter == 20);
    CHECK(c.seed == 0);
    CHECK(c.output_dir == "out");
    CHECK(!c.windowed);
    CHECK(c.allowance == 0.01);
    CHECK(c.source_text == kMinimalStability);
    CHECK_NOTHROW(require_for(c, "stability"));
}

TEST_CASE("values, comments and nesting") {
    const auto c = parse_config_text(R"(
# full-line comment
coefficients.preset = "conv_tanh"   # trailing comment
coefficients.bound = 0.25
coefficients.dim = 2
init.mean = 0.5, -1
init.std = 2e-1
windowed = true
seed = 42
output_dir = "runs/a b#c"
chaos.particles = 10, 20
flow_a.kind = two_atom
flow_a.p0 = 0.75
)");
    CHECK(c.preset == "conv_tanh");
    CHECK(c.preset_params.at("bound") == 0.25);
    CHECK(c.init.mean == std::vector<double>{0.5, -1.0});
    CHECK(c.init.std == 0.2);
    CHECK(c.windowed);
    CHECK(c.seed == 42);
    CHECK(c.output_dir == "runs/a b#c");
    CHECK(c.chaos_particles == std::vector<std::size_t>{10, 20});
    CHECK(c.flow_a.kind == "two_atom");
    CHECK(c.flow_a.p0 == 0.75);
    CHECK(c.key_lines.at("seed") == 9);
    CHECK(c.coefficients().dim_state == 2);
}

TEST_CASE("unknown key names the key and line") {
    const auto e = error_of("coefficients.preset = conv_ou\nn_pathz = 100\n");
    CHECK(contains(e, "line 2"));
    CHECK(contains(e, "n_pathz"));
    CHECK(contains(error_of("coefficients.preset = conv_ou\ncoefficients.bound = 1\n"), "coefficients.bound"));
    CHECK(contains(error_of("coefficients.rate = 1\n"), "line 1"));
}

TEST_CASE("duplicate key") {
    const auto e = error_of("seed = 42\nseed = 42\n");
    CHECK(contains(e, "duplicate"));
    CHECK(contains(e, "line 2"));
    CHECK(contains(e, "line 1"));
}

TEST_CASE("type mismatches and range errors carry the line") {
    CHECK(contains(error_of("\nn_paths = many\n"), "line 2"));
    CHECK(contains(error_of("n_paths = \"100\"\n"), "expects a number"));
    CHECK(contains(error_of("windowed = 1\n"), "expects a boolean"));
    CHECK(contains(error_of("n_paths = 10.5\n"), "integer"));
    CHECK(contains(error_of("n_paths = 0\n"), "integer"));
    CHECK(contains(error_of("tol = -1\n"), "positive"));
    CHECK(contains(error_of("theta = 0.5\n"), ">= 1"));
    CHECK(contains(error_of("metric = sup\n"), "one of"));
    CHECK(contains(error_of("seed = nan\n"), "finite"));
    CHECK(contains(error_of("flow_a.p1 = 1.5\n"), "[0, 1]"));
    CHECK(contains(error_of("just words\n"), "key = value"));
    CHECK(contains(error_of("a b = 1\n"), "malformed key"));
    CHECK(contains(error_of("output_dir = \"open\n"), "unterminated"));
    CHECK(contains(error_of("init.mean = 1,,2\n"), "not a number"));
    CHECK(contains(error_of("seed =\n"), "missing value"));
}

TEST_CASE("kind-specific requirements") {
    auto c = parse_config_text("coefficients.preset = conv_ou\n");
    CHECK_NOTHROW(require_for(c, "picard"));
    CHECK_THROWS_AS(require_for(c, "stability"), ConfigError);
    CHECK_THROWS_AS(require_for(c, "contraction"), ConfigError);
    CHECK_THROWS_AS(require_for(parse_config_text("init_b.mean = 1\n"), "picard"), ConfigError);
    CHECK_NOTHROW(require_for(parse_config_text("init_b.mean = 1\n"), "distances"));
    CHECK_THROWS_AS(require_for(parse_config_text(kMinimalStability), "picard"), ConfigError);
    CHECK_THROWS_AS(parse_config("/nonexistent/mvflow.cfg"), ConfigError);
}

TEST_CASE("flow families") {
    const TimeGrid grid(1.0, 4);
    FlowSpec dirac;
    dirac.location = 1.0;
    dirac.velocity = 2.0;
    const auto f = dirac.build(grid, 2);
    CHECK(f[2].point(0)[0] == 2.0);
    CHECK(f[2].point(0)[1] == 2.0);

    FlowSpec two;
    two.kind = "two_atom";
    two.p0 = 1.0;
    two.p1 = 0.0;
    const auto g = two.build(grid, 1);
    CHECK(g[0].weight(0) == 1.0);
    CHECK(g[2].weight(0) == 0.5);
    CHECK(g[4].weight(0) == 0.0);

    FlowSpec gauss;
    gauss.kind = "gaussian";
    gauss.atoms = 1000;
    gauss.std = 2.0;
    gauss.mean = 1.0;
    const auto h = gauss.build(grid, 1);
    CHECK(h[0].mean() == doctest::Approx(1.0).epsilon(1e-12));
    double v = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) v += (h[0].point(i)[0] - 1.0) * (h[0].point(i)[0] - 1.0) / 1000.0;
    CHECK(std::sqrt(v) == doctest::Approx(2.0).epsilon(0.01));
}
