#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bangride/battery.hpp"
#include "bangride/checks.hpp"
#include "bangride/oracle.hpp"
#include "bangride/pid.hpp"
#include "bangride/selector.hpp"

namespace bangride {

// Configuration problems (bad file, unknown key, invalid value) map to exit
// code 1; everything else that throws maps to 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum ExitCode {
  exit_ok = 0,
  exit_config_error = 1,
  exit_runtime_error = 2,
  exit_infeasible = 3,  // run completed but violated a constraint beyond tol
};

enum class ModelKind { ecm, spm, linear_generic, counterexample };
enum class StrategyKind { selector, pid, greedy, oracle };

std::string to_string(ModelKind kind);
std::string to_string(StrategyKind kind);

struct LinearModelConfig {
  LinearSystem system;
};

// Two-step suboptimality instance; cb and d parameterize the output map.
struct CounterexampleConfig {
  Eigen::VectorXd cb = Eigen::VectorXd::Constant(1, 2.0);
  Eigen::VectorXd d = Eigen::VectorXd::Constant(1, 1.0);
};

struct GridOptions {
  double u_lo = 0.0;
  double u_hi = 0.0;
  int points = 0;
  std::uint64_t budget = 2'000'000;
  bool configured = false;
};

struct SelectorCliOptions {
  double tol_root = 1e-10;
  int max_iter = 200;
  std::optional<double> u_min;
};

struct Scenario {
  std::string name;
  ModelKind model = ModelKind::ecm;
  EcmParams ecm{};
  SpmParams spm{};
  LinearModelConfig linear{};
  CounterexampleConfig counterexample{};
  std::optional<std::vector<double>> x0;  // default: zero state
  double t_s = 1.0;
  int t_f = 0;
  double u_max = 0.0;
  std::vector<double> y_max;
  StrategyKind strategy = StrategyKind::selector;
  std::vector<PidGains> pid_gains;
  GridOptions grid{};
  SelectorCliOptions selector{};
  double tol_active = default_tol_active;
  std::uint64_t seed = 0;
  std::string trace_path;    // empty: <name>_trace.csv under --out
  std::string metrics_path;  // empty: <name>_metrics.json under --out
};

// Strict parsing: unknown keys are rejected, not ignored. Throws
// ConfigError with the offending field named.
Scenario parse_scenario(const nlohmann::json& j, const std::string& default_name);
Scenario load_scenario(const std::filesystem::path& path);

// Canonical serialization; parse(scenario_to_json(s)) reproduces s.
nlohmann::json scenario_to_json(const Scenario& s);

Problem build_problem(const Scenario& s);

struct SwitchEvent {
  int t = 0;
  double time_s = 0.0;
  int from = 0;
  int to = 0;
};

// Changes of the minimal active index, debounced: a new index is committed
// only after holding for `hold` consecutive steps; the event carries the
// first step of the new index. Index -1 stands for "no constraint active".
std::vector<SwitchEvent> detect_switches(const Trajectory& trajectory,
                                         double t_s, int hold = 3);
std::vector<SwitchEvent> detect_switches(const std::vector<int>& min_active,
                                         double t_s, int hold = 3);

struct RunMetrics {
  double final_cost = 0.0;
  std::vector<double> max_violation;  // per constraint, index 0 = input
  std::vector<SwitchEvent> switches;
  // |bound - value| on the currently active constraint; when none is
  // active, the distance to the nearest output bound.
  std::vector<double> gap_per_step;
  double gap_peak = 0.0;
  double wall_time_s = 0.0;  // reported on stdout only, never serialized
};

RunMetrics compute_metrics(const Problem& problem, const Trajectory& trajectory,
                           double t_s, int hold = 3);

// Largest |y_max_i - y_i| after the run leaves the input constraint (its
// first switch event departing index 0; falls back to the first event, then
// to the start of the run).
double peak_post_switch_error(const Problem& problem,
                              const Trajectory& trajectory,
                              const std::vector<SwitchEvent>& events);

struct ScenarioRun {
  Scenario scenario;
  Problem problem;
  Trajectory trajectory;
  RunMetrics metrics;
  std::optional<OracleResult> oracle;
};

ScenarioRun execute_scenario(const Scenario& s, int hold = 3);

// Trace rows: t,time_s,u,y1..yp,x1..xn,active_idx,cost_cum. Numbers are
// written with shortest round-trip precision, so re-importing is exact.
void write_trace_csv(const std::filesystem::path& path, const Problem& problem,
                     const Trajectory& trajectory, double t_s);

struct TraceFile {
  int n = 0;
  int p = 0;
  std::vector<int> t;
  std::vector<double> time_s;
  std::vector<double> u;
  std::vector<std::vector<double>> y;  // per step
  std::vector<std::vector<double>> x;  // per step
  std::vector<int> active_idx;
  std::vector<double> cost_cum;
};

TraceFile read_trace_csv(const std::filesystem::path& path);

nlohmann::json metrics_to_json(const ScenarioRun& run);
nlohmann::json assumption_report_to_json(const AssumptionReport& report);

// Controller checkpointing.
nlohmann::json pid_bank_to_json(const PidBank& bank);
PidBank pid_bank_from_json(const nlohmann::json& j);

struct CommonFlags {
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<double> tol_active;
  bool quiet = false;
  int hold = 3;
};

// Subcommand entry points; each returns an ExitCode value.
int cmd_check(const std::string& config_path, const CommonFlags& flags);
int cmd_simulate(const std::string& config_path, const CommonFlags& flags,
                 std::optional<StrategyKind> force_strategy = {});
int cmd_compare(const std::vector<std::string>& config_paths,
                const CommonFlags& flags);
int cmd_switches(const std::string& trace_path, const CommonFlags& flags);

}  // namespace bangride
