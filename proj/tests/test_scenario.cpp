#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bangride/scenario.hpp"

using namespace bangride;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir() {
  static int counter = 0;
  const auto dir = fs::temp_directory_path() /
                   ("bangride_test_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& name, const json& j) {
  const auto path = dir / name;
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json ecm_config() {
  return json{
      {"model", "ecm"},
      {"parameters",
       {{"R0_ohm", 1e-3},
        {"R1_ohm", 1.5e-3},
        {"R2_ohm", 1e-3},
        {"C1_farad", 2e6},
        {"C2_farad", 5e5},
        {"Q_Ah", 50},
        {"beta", 0.1}}},
      {"t_s", 0.05},
      {"t_f", 2000},
      {"u_max", 100.0},
      {"y_max", 0.2},
      {"strategy", "selector"},
  };
}

json tiny_linear_config() {
  return json{
      {"model", "linear-generic"},
      {"parameters",
       {{"A", {{0.5}}},
        {"B", {1.0}},
        {"C", {{1.0}}},
        {"D", {0.25}},
        {"E", {1.0}},
        {"F", 0.0}}},
      {"t_s", 1.0},
      {"t_f", 8},
      {"u_max", 1.0},
      {"y_max", {0.6}},
      {"strategy", "selector"},
  };
}

}  // namespace

TEST_CASE("scenario parsing") {
  SUBCASE("a minimal config fills the defaults") {
    const auto s = parse_scenario(ecm_config(), "fallback");
    CHECK(s.name == "fallback");
    CHECK(s.model == ModelKind::ecm);
    CHECK(s.ecm.Q == 50.0 * 3600.0);
    CHECK(s.y_max == std::vector<double>{0.2});
    CHECK(s.tol_active == default_tol_active);
    CHECK(s.seed == 0);
  }

  SUBCASE("unknown keys are rejected, not ignored") {
    auto j = ecm_config();
    j["typo_key"] = 1;
    CHECK_THROWS_WITH_AS(parse_scenario(j, "x"), doctest::Contains("typo_key"),
                         ConfigError);

    j = ecm_config();
    j["parameters"]["R3_ohm"] = 1.0;
    CHECK_THROWS_WITH_AS(parse_scenario(j, "x"), doctest::Contains("R3_ohm"),
                         ConfigError);

    j = ecm_config();
    j["options"] = {{"grid", {{"u_lo", 0.0}, {"u_hi", 1.0}, {"points", 3}, {"oops", 1}}}};
    CHECK_THROWS_WITH_AS(parse_scenario(j, "x"), doctest::Contains("oops"),
                         ConfigError);
  }

  SUBCASE("invalid values name the offending field") {
    auto j = ecm_config();
    j["parameters"]["C1_farad"] = -2e6;
    CHECK_THROWS_WITH_AS(parse_scenario(j, "x"), doctest::Contains("C1"),
                         ConfigError);

    j = ecm_config();
    j["t_f"] = -3;
    CHECK_THROWS_WITH_AS(parse_scenario(j, "x"), doctest::Contains("t_f"),
                         ConfigError);

    j = ecm_config();
    j["strategy"] = "mpc";
    CHECK_THROWS_WITH_AS(parse_scenario(j, "x"), doctest::Contains("strategy"),
                         ConfigError);
  }

  SUBCASE("capacity must be given exactly once") {
    auto j = ecm_config();
    j["parameters"]["Q_As"] = 180000.0;
    CHECK_THROWS_AS(parse_scenario(j, "x"), ConfigError);
    j["parameters"].erase("Q_Ah");
    CHECK_NOTHROW(parse_scenario(j, "x"));
  }

  SUBCASE("ampere-hour and ampere-second capacities build identical systems") {
    auto j_ah = ecm_config();
    auto j_as = ecm_config();
    j_as["parameters"].erase("Q_Ah");
    j_as["parameters"]["Q_As"] = 180000.0;
    const auto sys_ah = build_problem(parse_scenario(j_ah, "a")).system.linear();
    const auto sys_as = build_problem(parse_scenario(j_as, "b")).system.linear();
    CHECK(sys_ah.B == sys_as.B);
    CHECK(sys_ah.A == sys_as.A);
  }

  SUBCASE("y_max length must match the model") {
    auto j = ecm_config();
    j["y_max"] = {0.2, 0.3};
    CHECK_THROWS_WITH_AS(build_problem(parse_scenario(j, "x")),
                         doctest::Contains("y_max"), ConfigError);
  }

  SUBCASE("x0 length must match the model") {
    auto j = ecm_config();
    j["x0"] = {0.0, 0.0};
    CHECK_THROWS_WITH_AS(build_problem(parse_scenario(j, "x")),
                         doctest::Contains("x0"), ConfigError);
  }
}

TEST_CASE("parse -> serialize -> parse is a fixed point") {
  std::vector<json> cases;
  cases.push_back(ecm_config());
  cases.push_back(tiny_linear_config());
  {
    json j{{"model", "counterexample"},
           {"t_s", 1.0},
           {"t_f", 1},
           {"u_max", 1.0},
           {"y_max", {1.0}},
           {"strategy", "oracle"},
           {"options", {{"grid", {{"u_lo", -1.0}, {"u_hi", 1.0}, {"points", 3}}}}}};
    cases.push_back(j);
  }
  {
    json j = ecm_config();
    j["strategy"] = "pid";
    j["options"] = {{"pid",
                     {{"gains",
                       {{{"kp", 1.0}, {"ki", 4.0}, {"kd", 0.5}, {"kw", 4.0}}}}}}};
    j["seed"] = 42;
    cases.push_back(j);
  }
  {
    json j{{"model", "spm"},
           {"parameters",
            {{"a1", 0.02},
             {"a2", 0.005},
             {"b1", 1e-3},
             {"b2", 1e-3},
             {"b3", 1e-3},
             {"c1", 1.0},
             {"c2", 1.0},
             {"c3", 1.0}}},
           {"t_s", 10.0},
           {"t_f", 100},
           {"u_max", 1.0},
           {"y_max", {0.5}},
           {"strategy", "greedy"}};
    cases.push_back(j);
  }

  for (std::size_t k = 0; k < cases.size(); ++k) {
    const json j1 = scenario_to_json(parse_scenario(cases[k], "case"));
    const json j2 = scenario_to_json(parse_scenario(j1, "case"));
    REQUIRE(j1 == j2);
  }
}

TEST_CASE("switch detection with debouncing") {
  const double t_s = 0.5;

  SUBCASE("constant index produces no events") {
    CHECK(detect_switches(std::vector<int>{0, 0, 0, 0}, t_s).empty());
  }

  SUBCASE("single-step flicker is suppressed at hold 3") {
    CHECK(detect_switches(std::vector<int>{0, 0, 1, 0, 0, 0}, t_s, 3).empty());
  }

  SUBCASE("a held change is committed at its first step") {
    const auto ev = detect_switches(std::vector<int>{0, 0, 1, 1, 1, 1}, t_s, 3);
    REQUIRE(ev.size() == 1);
    CHECK(ev[0].t == 2);
    CHECK(ev[0].time_s == 1.0);
    CHECK(ev[0].from == 0);
    CHECK(ev[0].to == 1);
  }

  SUBCASE("idle periods appear as index -1") {
    const auto ev = detect_switches(std::vector<int>{0, 0, -1, -1, -1, 1, 1, 1}, t_s, 3);
    REQUIRE(ev.size() == 2);
    CHECK(ev[0].to == -1);
    CHECK(ev[1].from == -1);
    CHECK(ev[1].to == 1);
  }

  SUBCASE("hold 1 commits immediately") {
    const auto ev = detect_switches(std::vector<int>{0, 1, 0}, t_s, 1);
    REQUIRE(ev.size() == 2);
  }
}

TEST_CASE("metrics: violations per constraint and boundary gaps") {
  const auto s = parse_scenario(tiny_linear_config(), "tiny");
  const auto run = execute_scenario(s);
  REQUIRE(run.metrics.max_violation.size() == 2);
  CHECK(run.metrics.max_violation[0] == 0.0);
  CHECK(run.metrics.max_violation[1] <= 1e-15);
  // the selector rides one bound at every step, so the gap stays at zero
  for (double g : run.metrics.gap_per_step) REQUIRE(g <= 1e-12);
}

TEST_CASE("trace files round-trip exactly") {
  const auto dir = fresh_dir();
  const auto s = parse_scenario(tiny_linear_config(), "tiny");
  const auto run = execute_scenario(s);
  const auto path = dir / "tiny_trace.csv";
  write_trace_csv(path, run.problem, run.trajectory, s.t_s);

  const auto tf = read_trace_csv(path);
  REQUIRE(tf.u.size() == run.trajectory.u.size());
  REQUIRE(tf.p == 1);
  REQUIRE(tf.n == 1);
  for (std::size_t t = 0; t < tf.u.size(); ++t) {
    REQUIRE(tf.u[t] == run.trajectory.u[t]);
    REQUIRE(tf.y[t][0] == run.trajectory.y[t](0));
    REQUIRE(tf.active_idx[t] == min_active_index(run.trajectory, t));
  }

  const auto replay = simulate(run.problem, tf.u, s.tol_active);
  CHECK(replay.cost == doctest::Approx(run.metrics.final_cost).epsilon(1e-12));
  CHECK(tf.cost_cum.back() == doctest::Approx(run.metrics.final_cost).epsilon(1e-12));
}

TEST_CASE("identical configs give byte-identical artifacts") {
  const auto dir = fresh_dir();
  const auto cfg = write_config(dir, "run.json", ecm_config());

  CommonFlags a, b;
  a.out_dir = (dir / "a").string();
  b.out_dir = (dir / "b").string();
  a.quiet = b.quiet = true;
  REQUIRE(cmd_simulate(cfg.string(), a) == exit_ok);
  REQUIRE(cmd_simulate(cfg.string(), b) == exit_ok);

  CHECK(slurp(dir / "a" / "run_trace.csv") == slurp(dir / "b" / "run_trace.csv"));
  CHECK(slurp(dir / "a" / "run_metrics.json") == slurp(dir / "b" / "run_metrics.json"));
  CHECK_FALSE(slurp(dir / "a" / "run_trace.csv").empty());
  // wall time never lands in the artifacts
  CHECK(slurp(dir / "a" / "run_metrics.json").find("wall") == std::string::npos);
}

TEST_CASE("compare: a scenario against itself has zero deltas") {
  const auto dir = fresh_dir();
  auto j = ecm_config();
  j["name"] = "left";
  const auto cfg_a = write_config(dir, "a.json", j);
  j["name"] = "right";
  const auto cfg_b = write_config(dir, "b.json", j);

  CommonFlags flags;
  flags.out_dir = dir.string();
  flags.quiet = true;
  REQUIRE(cmd_compare({cfg_a.string(), cfg_b.string()}, flags) == exit_ok);

  const auto report = json::parse(slurp(dir / "compare_report.json"));
  CHECK(report["deltas"][0]["max_abs_du"] == 0.0);
  CHECK(report["deltas"][0]["final_cost_delta"] == 0.0);
  CHECK(report["deltas"][0]["max_abs_dy"][0] == 0.0);
}

TEST_CASE("compare ranks the two PID tunings by post-switch error") {
  const auto dir = fresh_dir();
  auto j = ecm_config();
  j["t_f"] = 12000;  // covers the constraint switch and the recovery tail
  j["name"] = "fast";
  j["strategy"] = "pid";
  j["options"] = {{"pid",
                   {{"gains",
                     {{{"kp", 1.0}, {"ki", 4.0}, {"kd", 0.5}, {"kw", 4.0}}}}}}};
  const auto cfg_fast = write_config(dir, "fast.json", j);
  j["name"] = "alt";
  j["options"] = {{"pid",
                   {{"gains",
                     {{{"kp", 43.23}, {"ki", 0.366}, {"kd", 0.0}, {"kw", 0.366}}}}}}};
  const auto cfg_alt = write_config(dir, "alt.json", j);

  CommonFlags flags;
  flags.out_dir = dir.string();
  flags.quiet = true;
  REQUIRE(cmd_compare({cfg_fast.string(), cfg_alt.string()}, flags) == exit_ok);
  const auto report = json::parse(slurp(dir / "compare_report.json"));
  const double peak_fast = report["runs"][0]["peak_post_switch_error"].get<double>();
  const double peak_alt = report["runs"][1]["peak_post_switch_error"].get<double>();
  CHECK(peak_fast < peak_alt);
}

TEST_CASE("compare rejects misaligned scenarios") {
  const auto dir = fresh_dir();
  auto j = ecm_config();
  j["name"] = "left";
  const auto cfg_a = write_config(dir, "a.json", j);
  j["name"] = "right";
  j["t_f"] = 100;
  const auto cfg_b = write_config(dir, "b.json", j);

  CommonFlags flags;
  flags.out_dir = dir.string();
  flags.quiet = true;
  CHECK(cmd_compare({cfg_a.string(), cfg_b.string()}, flags) == exit_config_error);
}

TEST_CASE("exit codes") {
  const auto dir = fresh_dir();
  CommonFlags flags;
  flags.out_dir = dir.string();
  flags.quiet = true;

  SUBCASE("missing file") {
    CHECK(cmd_simulate((dir / "nope.json").string(), flags) == exit_config_error);
  }

  SUBCASE("malformed JSON") {
    const auto path = dir / "broken.json";
    std::ofstream(path) << "{ not json";
    CHECK(cmd_simulate(path.string(), flags) == exit_config_error);
  }

  SUBCASE("invalid field") {
    auto j = ecm_config();
    j["parameters"]["C1_farad"] = -1.0;
    const auto cfg = write_config(dir, "bad.json", j);
    CHECK(cmd_simulate(cfg.string(), flags) == exit_config_error);
  }

  SUBCASE("constraint violations flag exit code 3") {
    auto j = tiny_linear_config();
    // clamp above the boundary feedback: the loop is forced infeasible
    j["options"] = {{"selector", {{"u_min", 0.5}}}};
    const auto cfg = write_config(dir, "clamped.json", j);
    CHECK(cmd_simulate(cfg.string(), flags) == exit_infeasible);
  }

  SUBCASE("healthy run exits 0") {
    const auto cfg = write_config(dir, "ok.json", ecm_config());
    CHECK(cmd_simulate(cfg.string(), flags) == exit_ok);
  }

  SUBCASE("pid strategy without gains is a config error") {
    auto j = ecm_config();
    j["strategy"] = "pid";
    const auto cfg = write_config(dir, "nogains.json", j);
    CHECK(cmd_simulate(cfg.string(), flags) == exit_config_error);
  }

  SUBCASE("oracle strategy without a grid is a config error") {
    auto j = ecm_config();
    j["strategy"] = "oracle";
    const auto cfg = write_config(dir, "nogrid.json", j);
    CHECK(cmd_simulate(cfg.string(), flags) == exit_config_error);
  }
}

TEST_CASE("the oracle subcommand overrides the configured strategy") {
  const auto dir = fresh_dir();
  json j{{"model", "counterexample"},
         {"t_s", 1.0},
         {"t_f", 1},
         {"u_max", 1.0},
         {"y_max", {1.0}},
         {"strategy", "selector"},
         {"options", {{"grid", {{"u_lo", -1.0}, {"u_hi", 1.0}, {"points", 3}}}}}};
  const auto cfg = write_config(dir, "force.json", j);
  CommonFlags flags;
  flags.out_dir = dir.string();
  flags.quiet = true;
  REQUIRE(cmd_simulate(cfg.string(), flags, StrategyKind::oracle) == exit_ok);
  const auto m = json::parse(slurp(dir / "force_metrics.json"));
  CHECK(m["strategy"] == "oracle");
  CHECK(m["oracle"]["best_cost"] == 1.0);
  CHECK(m["oracle"]["feasible_count"] == 7);
}

TEST_CASE("check subcommand emits the sampling bounds") {
  const auto dir = fresh_dir();
  const auto cfg = write_config(dir, "cell.json", ecm_config());
  CommonFlags flags;
  flags.out_dir = dir.string();
  flags.quiet = true;
  REQUIRE(cmd_check(cfg.string(), flags) == exit_ok);

  const auto j = json::parse(slurp(dir / "cell_check.json"));
  CHECK(j["assumptions"]["all_hold"] == true);
  CHECK(std::abs(j["sampling"]["ts1"].get<double>() - 500.0) <= 0.01);
  CHECK(std::abs(j["sampling"]["ts2"].get<double>() - 327.27) <= 0.01);
  CHECK(j["sampling"]["within_bounds"] == true);
}

TEST_CASE("oracle metrics expose the suboptimality gap identity") {
  json j{{"model", "counterexample"},
         {"t_s", 1.0},
         {"t_f", 1},
         {"u_max", 1.0},
         {"y_max", {1.0}},
         {"strategy", "oracle"},
         {"options", {{"grid", {{"u_lo", -1.0}, {"u_hi", 1.0}, {"points", 3}}}}}};
  const auto run = execute_scenario(parse_scenario(j, "gap"));
  const auto m = metrics_to_json(run);
  const double j_oracle = m["oracle"]["best_cost"].get<double>();
  const double j_bangride = m["counterexample"]["j_bangride"].get<double>();
  const double gamma = m["counterexample"]["gamma"].get<double>();
  CHECK(j_oracle - j_bangride == 1.0);
  CHECK(j_oracle - j_bangride == std::abs(gamma) * 1.0);
}

TEST_CASE("controller state serializes and restores") {
  PidBank bank({PidGains{1.0, 4.0, 0.5, 4.0}}, 100.0);
  bank.step(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.2));
  bank.step(Eigen::VectorXd::Constant(1, 0.05), Eigen::VectorXd::Constant(1, 0.2));

  const auto j = pid_bank_to_json(bank);
  auto restored = pid_bank_from_json(j);
  REQUIRE(restored.loops().size() == 1);
  CHECK(restored.u_max() == bank.u_max());
  CHECK(restored.loops()[0].integral_sum() == bank.loops()[0].integral_sum());
  CHECK(restored.loops()[0].prev_error() == bank.loops()[0].prev_error());
  CHECK(restored.loops()[0].windup_sum() == bank.loops()[0].windup_sum());

  // both continue identically
  const auto a = bank.step(Eigen::VectorXd::Constant(1, 0.1), Eigen::VectorXd::Constant(1, 0.2));
  const auto b = restored.step(Eigen::VectorXd::Constant(1, 0.1), Eigen::VectorXd::Constant(1, 0.2));
  CHECK(a.u == b.u);
  CHECK(a.winner == b.winner);
}
