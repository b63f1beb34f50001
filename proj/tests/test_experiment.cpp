#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "ppde/errors.hpp"
#include "ppde/experiment.hpp"
#include "ppde/grid.hpp"

using namespace ppde;

namespace {

std::string config_path(const char* name) {
  return std::string(PPDE_CONFIG_DIR) + "/" + name;
}

ExperimentConfig parse_ok(const std::string& text) {
  ExperimentConfig cfg = parse_experiment(text);
  validate_experiment(cfg);
  return cfg;
}

// The thrown message must carry the offending field so a config author can
// find it without reading source.
void check_rejects(const std::string& text, const std::string& needle) {
  try {
    ExperimentConfig cfg = parse_experiment(text);
    validate_experiment(cfg);
    FAIL("accepted: ", text);
  } catch (const input_error& e) {
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  }
}

}  // namespace

TEST_CASE("config parsing and validation") {
  SUBCASE("minimal config round trips") {
    ExperimentConfig cfg = parse_ok(R"({"kind": "heat", "steps": 8})");
    CHECK(cfg.kind == "heat");
    CHECK(cfg.steps == (std::vector<int>{8}));
    CHECK(cfg.horizon == 1.0);
    CHECK(cfg.functional.name == "terminal");
    CHECK(cfg.name == "experiment");
  }

  SUBCASE("rejections name the offending field") {
    check_rejects("not json", "not valid JSON");
    check_rejects(R"({"kind": "heat", "steps": 8, "wat": 1})", "'wat'");
    check_rejects(R"({"kind": "frobnicate", "steps": 8})", "kind");
    check_rejects(R"({"kind": "heat", "steps": []})", "steps");
    check_rejects(R"({"kind": "heat", "steps": 8, "horizon": -1})", "horizon");
    check_rejects(R"({"kind": "heat", "steps": 8, "functional": "nope"})", "functional");
    check_rejects(R"({"kind": "heat", "steps": 8, "generator": "nope"})", "generator");
    check_rejects(R"({"kind": "heat", "steps": 8, "expect": {"wat": [1]}})", "expect.wat");
    check_rejects(R"({"kind": "heat", "steps": 8, "expect": {"value": [1]}})", "expect.value");
    check_rejects(R"({"kind": "heat", "steps": 8, "side": "both"})", "side");
    check_rejects(R"({"kind": "converge", "steps": [4, 8]})", "reference");
    check_rejects(R"({"kind": "heat", "steps": 8, "functional":
                      {"name": "fixed-time", "time": 2.0}})", "functional.time");
    check_rejects(R"({"kind": "compare", "steps": 8})", "functional_b");
    check_rejects(R"({"kind": "heat", "steps": [4, 8], "mode": "certify"})", "mode");
    check_rejects(R"({"kind": "stability", "steps": [4, 8]})", "steps");
  }

  SUBCASE("drift tilts must stay inside one-step probabilities") {
    // L sqrt(h) = 2 at a single unit step: the tilt would leave [0, 1].
    check_rejects(R"({"kind": "heat", "steps": 1, "L": 2.0})", "L sqrt(h)");
    CHECK_NOTHROW(parse_ok(R"({"kind": "heat", "steps": 1, "L": 1.0})"));
    CHECK_NOTHROW(parse_ok(R"({"kind": "heat", "steps": 8, "L": 2.0})"));
  }

  SUBCASE("points are checked against the grid") {
    check_rejects(R"({"kind": "check-submartingale", "steps": 8,
                      "points": [[8, 0]]})", "points");
    check_rejects(R"({"kind": "check-submartingale", "steps": 8,
                      "points": [[2, 4]]})", "points");
    CHECK_NOTHROW(parse_ok(R"({"kind": "check-submartingale", "steps": 8,
                               "points": [[2, 3], [7, 127]]})"));
  }

  SUBCASE("expect keys are gated by kind and mode") {
    check_rejects(R"({"kind": "scheme", "steps": 8,
                      "expect": {"exact_tol": [1e-9]}})", "certify");
    check_rejects(R"({"kind": "check-viscosity", "steps": 8,
                      "expect": {"all_consistent": []}})", "equivalence");
    check_rejects(R"({"kind": "heat", "steps": [4, 8],
                      "expect": {"gap_ratio": [4, 8, 1.5, 2.5]}})", "below");
  }
}

TEST_CASE("functional and generator specs") {
  SUBCASE("affine wrapping keeps the declared structure") {
    FunctionalSpec spec;
    spec.name = "terminal";
    spec.scale = -2.0;
    spec.offset = 0.5;
    PathFunctional f = functional_from_spec(spec);

    TimeGrid grid(1.0, 4);
    std::vector<double> data = {0.0, 0.5, 1.0, 0.5, 1.5};
    PathView w{grid.step(), 1, {data.data(), data.size()}};
    CHECK(f(w) == doctest::Approx(-2.0 * 1.5 + 0.5));
    REQUIRE(f.lipschitz().has_value());
    CHECK(*f.lipschitz() == doctest::Approx(2.0));
    REQUIRE(f.has_terminal_profile());
    CHECK(f.terminal_profile()(1.5) == doctest::Approx(-2.0 * 1.5 + 0.5));
  }

  SUBCASE("put payoff") {
    FunctionalSpec spec;
    spec.name = "put";
    spec.strike = 0.25;
    PathFunctional f = functional_from_spec(spec);
    TimeGrid grid(1.0, 2);
    std::vector<double> down = {0.0, -0.5, -1.0};
    std::vector<double> up = {0.0, 0.5, 1.0};
    CHECK(f(PathView{grid.step(), 1, {down.data(), down.size()}}) == doctest::Approx(1.25));
    CHECK(f(PathView{grid.step(), 1, {up.data(), up.size()}}) == 0.0);
    CHECK(f.terminal_profile()(-1.0) == doctest::Approx(1.25));
  }

  SUBCASE("generator shift") {
    GeneratorSpec spec;
    spec.name = "heat";
    spec.shift = 0.25;
    Generator gen = generator_from_spec(spec, 0.0);
    CHECK(gen.g(0.0, PathView{}, 0.0, 0.0, 0.0) == doctest::Approx(0.25));
  }
}

TEST_CASE("experiment runs") {
  SUBCASE("heat value vanishes identically") {
    ExperimentConfig cfg = parse_ok(R"({"kind": "heat", "steps": [10],
                                        "expect": {"value": [0.0, 0.0]}})");
    RunReport rep = run_experiment(cfg);
    CHECK(rep.passed);
    CHECK(rep.rows.size() == 1);
    CHECK(rep.rows[0][2] == 0.0);  // exact, not approximate
  }

  SUBCASE("single-step envelope from the checked-in config") {
    ExperimentConfig cfg = load_experiment(config_path("snell_immediate_edge.json"));
    CHECK(cfg.name == "snell_immediate_edge");
    RunReport rep = run_experiment(cfg);
    CHECK(rep.passed);
    CHECK(rep.scalars.at("root") == 1.0);
  }

  SUBCASE("decay refinement is first order") {
    ExperimentConfig cfg = load_experiment(config_path("bsde_decay_refinement.json"));
    RunReport rep = run_experiment(cfg);
    CHECK(rep.passed);
    CHECK(rep.scalars.at("order") == doctest::Approx(1.0).epsilon(0.1));
  }

  SUBCASE("stability of the shifted heat dynamics is exactly linear") {
    ExperimentConfig cfg = parse_ok(R"({"kind": "stability", "steps": [64],
                                        "functional": "zero", "epsilons": [0.25]})");
    RunReport rep = run_experiment(cfg);
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0][3] == doctest::Approx(0.25).epsilon(1e-14));
  }

  SUBCASE("failing bounds flip the report") {
    ExperimentConfig cfg = parse_ok(R"({"kind": "heat", "steps": [4],
                                        "functional": "terminal-square",
                                        "expect": {"value": [0.0, 1e-9]}})");
    RunReport rep = run_experiment(cfg);
    CHECK_FALSE(rep.passed);
    REQUIRE(rep.checks.size() == 1);
    CHECK_FALSE(rep.checks[0].pass);
    CHECK(rep.checks[0].observed == doctest::Approx(1.0));
  }
}

TEST_CASE("reports are deterministic and serializable") {
  ExperimentConfig cfg = load_experiment(config_path("snell_random.json"));

  SUBCASE("byte-identical bodies across repeat runs and thread budgets") {
    setenv("PPDE_THREADS", "1", 1);
    std::string first = report_body_json(run_experiment(cfg));
    std::string again = report_body_json(run_experiment(cfg));
    setenv("PPDE_THREADS", "8", 1);
    std::string wide = report_body_json(run_experiment(cfg));
    unsetenv("PPDE_THREADS");
    CHECK(first == again);
    CHECK(first == wide);
  }

  SUBCASE("seed override changes the body") {
    RunReport base = run_experiment(cfg);
    ExperimentConfig reseeded = cfg;
    reseeded.seed = cfg.seed + 1;
    CHECK(report_body_json(base) != report_body_json(run_experiment(reseeded)));
  }

  SUBCASE("files land under the requested directory") {
    ExperimentConfig quick = parse_ok(R"({"kind": "heat", "steps": [4], "name": "roundtrip",
                                          "expect": {"value": [0.0, 0.0]}})");
    RunReport rep = run_experiment(quick);
    std::filesystem::path dir =
        std::filesystem::temp_directory_path() / "ppde_experiment_test";
    std::filesystem::remove_all(dir);
    std::string written = write_report_files(rep, dir.string());
    CHECK(std::filesystem::exists(written));
    CHECK(std::filesystem::exists(dir / "roundtrip.csv"));

    std::ifstream in(written);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"passed\": true") != std::string::npos);
    CHECK(text.find("wall_time_ms") != std::string::npos);
    // The body view drops the timing so reruns can be compared directly.
    CHECK(report_body_json(rep).find("wall_time_ms") == std::string::npos);

    std::ifstream csv(dir / "roundtrip.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "n,h,value");
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("catalog text lists the building blocks") {
  std::string text = catalog_text();
  for (const char* needle : {"terminal", "running-max", "put", "heat", "decay", "drift-hjb"})
    CHECK(text.find(needle) != std::string::npos);
}
