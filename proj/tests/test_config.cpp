#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "icra/config.hpp"
#include "icra/experiment.hpp"
#include "icra/format.hpp"
#include "icra/prompts.hpp"
#include "icra/svg.hpp"
#include "icra/synthgen.hpp"
#include "icra/taskio.hpp"

using namespace icra;

namespace {

std::string error_of(const std::string& text) {
  try {
    (void)KeyValueConfig::parse(text, "t.conf");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

cli::ExperimentConfig experiment(const std::string& text) {
  return cli::ExperimentConfig::from(KeyValueConfig::parse(text, "t.conf"), std::nullopt);
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("grammar") {
    const auto kv = KeyValueConfig::parse(
        "# comment\n"
        "\n"
        "  a.b = 3   # trailing comment\n"
        "list=1, 2,3\n"
        "vecs = 1,2;3,4\n"
        "name = two words\n"
        "flag = yes\n");
    CHECK(kv.get_int("a.b", 0) == 3);
    CHECK(kv.get_ints("list", {}) == std::vector<int>{1, 2, 3});
    CHECK(kv.get_string("name", "") == "two words");
    CHECK(kv.get_bool("flag", false));
    const auto vecs = kv.get_vectors("vecs", {});
    REQUIRE(vecs.size() == 2);
    CHECK(vecs[1][0] == 3.0);
    CHECK(kv.get_double("missing", 1.5) == 1.5);
    CHECK(kv.unused_keys().empty());
  }

  TEST_CASE("syntax errors cite the line") {
    CHECK(error_of("a = 1\nnot a pair\n").find("t.conf:2") != std::string::npos);
    CHECK(error_of("A = 1\n").find("invalid key") != std::string::npos);
    CHECK(error_of("a..b = 1\n").find("invalid key") != std::string::npos);
    CHECK(error_of("a. = 1\n").find("invalid key") != std::string::npos);
    const std::string dup = error_of("a = 1\nb = 2\na = 3\n");
    CHECK(dup.find("t.conf:3") != std::string::npos);
    CHECK(dup.find("duplicate key 'a'") != std::string::npos);
  }

  TEST_CASE("typed accessors reject bad values") {
    const auto kv = KeyValueConfig::parse("n = 3.5\nb = maybe\nx = 1e\nl = 1,,2\n", "t.conf");
    CHECK_THROWS_AS(kv.get_int("n", 0), ConfigError);
    CHECK(kv.get_double("n", 0) == 3.5);
    CHECK_THROWS_AS(kv.get_bool("b", false), ConfigError);
    CHECK_THROWS_AS(kv.get_double("x", 0), ConfigError);
    CHECK_THROWS_AS(kv.get_doubles("l", {}), ConfigError);
    CHECK_THROWS_AS(kv.require_string("absent"), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::load(test::scratch_dir("config_missing") / "nope.conf"), IoError);
  }

  TEST_CASE("unused keys are reported") {
    const auto kv = KeyValueConfig::parse("used = 1\ntypo = 2\n");
    (void)kv.get_int("used", 0);
    CHECK(kv.unused_keys() == std::vector<std::string>{"typo"});
  }

  TEST_CASE("experiment configuration") {
    const auto cfg = experiment("seed = 9\ndim = 3\nn = 16\ntrain.precondition = true\n");
    CHECK(cfg.seed == 9);
    CHECK(cfg.spec.dim == 3);
    CHECK(cfg.n_demos == 16);
    CHECK(cfg.train.precondition);

    CHECK_THROWS_AS(experiment("dim = 3\n"), ConfigError);             // no seed
    CHECK_THROWS_AS(experiment("seed = 1\ntrian.max_iters = 3\n"), ConfigError);  // unknown key
    CHECK_THROWS_AS(experiment("seed = 1\nn = 0\n"), ConfigError);
    const auto overridden =
        cli::ExperimentConfig::from(KeyValueConfig::parse("seed = 1\n"), std::uint64_t{42});
    CHECK(overridden.seed == 42);
    CHECK(cli::ExperimentConfig::from(KeyValueConfig::parse(""), std::uint64_t{5}).seed == 5);
  }

  TEST_CASE("shipped configurations parse") {
    for (const char* name : {"default", "smoke", "rates", "recovery_d2", "ingest_demo"}) {
      const auto path = std::filesystem::path(ICRA_SOURCE_DIR) / "configs" / (std::string(name) + ".conf");
      CAPTURE(name);
      CHECK_NOTHROW(cli::ExperimentConfig::from(KeyValueConfig::load(path), std::nullopt, path.parent_path()));
    }
  }

  TEST_CASE("population description is valid config") {
    const PopulationSpec spec = cli::default_population(5);
    const std::string text = "seed = 1\n" + cli::describe_population(spec);
    const auto cfg = experiment(text);
    CHECK(cfg.spec.dim == 5);
    CHECK(cfg.spec.features.bound == spec.features.bound);
    CHECK(cli::describe_population(cfg.spec) == cli::describe_population(spec));
  }
}

TEST_SUITE("format") {
  TEST_CASE("doubles round-trip through their shortest text") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 1e22, 5e-324}) {
      CHECK(parse_double(format_double(x)) == x);
    }
    CHECK(format_double(-0.0) == "0");
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_fixed(0.87654, 3) == "0.877");
    CHECK_THROWS_AS(parse_double("1.5x"), DataError);
    CHECK_THROWS_AS(parse_int("2.0"), DataError);
    CHECK(split("a,,b", ',') == std::vector<std::string>{"a", "", "b"});
    CHECK(trim("  x y \t") == "x y");
  }
}

TEST_SUITE("taskio") {
  TEST_CASE("task CSV round-trips") {
    const PopulationSpec spec = test::gaussian_spec(3);
    synth::DdmConfig ddm;
    for (LabelMode mode : {LabelMode::binary, LabelMode::response_time}) {
      synth::BatchRequest req;
      req.n_tasks = 5;
      req.n_demos = 4;
      req.k = 3;
      req.mode = mode;
      req.seed = 8;
      const auto tasks = synth::generate_tasks(spec, req, ddm);
      const std::string csv = taskio::write_tasks_csv(tasks);
      const auto thetas = taskio::read_thetas_csv(taskio::write_thetas_csv(tasks));
      const auto back = taskio::read_tasks_csv(csv, &thetas);
      REQUIRE(back.size() == tasks.size());
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        CHECK(back[i].theta.theta() == tasks[i].theta.theta());
        CHECK(back[i].query.values() == tasks[i].query.values());
        CHECK(back[i].query_truth.z == tasks[i].query_truth.z);
        CHECK(back[i].query_truth.t == tasks[i].query_truth.t);
        REQUIRE(back[i].n_demos() == 4);
        for (std::size_t j = 0; j < 4; ++j) {
          CHECK(back[i].demos[j].z == tasks[i].demos[j].z);
          CHECK(back[i].demos[j].t == tasks[i].demos[j].t);
          CHECK(back[i].demos[j].k == tasks[i].demos[j].k);
        }
      }
      CHECK(taskio::write_tasks_csv(back) == csv);
    }
  }

  TEST_CASE("malformed task CSV is rejected") {
    CHECK_THROWS_AS(taskio::read_tasks_csv("task_id,role,phi_0,z,t,k\n0,demo,1,2\n"), DataError);
    CHECK_THROWS_AS(taskio::read_tasks_csv("task_id,role,phi_0,z,t,k\n0,other,1,1,,1\n"), DataError);
    CHECK_THROWS_AS(taskio::read_tasks_csv("task_id,role,phi_0,z,t,k\n0,demo,1,1,,1\n"), DataError);  // no query
  }

  TEST_CASE("prompt CSV reproduces the prompt exactly") {
    const PopulationSpec spec = test::gaussian_spec(2);
    Rng rng = Rng::stream(4, 0);
    for (LabelMode mode : {LabelMode::binary, LabelMode::response_time}) {
      const TaskSample task = synth::generate_task(spec, 6, 5, mode, synth::DdmConfig{}, rng);
      const prompts::PromptMatrix prompt = prompts::build_prompt(task, mode);
      const prompts::PromptMatrix back = taskio::read_prompt_csv(taskio::write_prompt_csv(prompt), mode);
      CHECK(back.features == prompt.features);
      CHECK(back.labels == prompt.labels);
    }
  }
}

TEST_SUITE("svg") {
  TEST_CASE("charts are deterministic and skip unplottable points") {
    const std::vector<svg::Series> series{{"err", {1, 2, 4, 8}, {1, 0.5, 0, 0.125}}};
    const std::string a = svg::line_chart(series, "t", "x", "y", true);
    CHECK(a == svg::line_chart(series, "t", "x", "y", true));
    CHECK(a.rfind("<svg", 0) == 0);
    CHECK(a.find("</svg>") != std::string::npos);
    const std::string bars = svg::bar_chart({{"binary", {0.9, std::numeric_limits<double>::quiet_NaN()}}},
                                            {"ID", "OOD"}, "acc");
    CHECK(bars.find("binary") != std::string::npos);
    CHECK(svg::line_chart({}, "empty", "x", "y", false).find("</svg>") != std::string::npos);
  }
}
