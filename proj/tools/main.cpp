#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bangride/scenario.hpp"

namespace {

void add_common_flags(CLI::App* sub, bangride::CommonFlags* flags,
                      std::optional<std::int64_t>* seed,
                      std::optional<double>* tol_active) {
  sub->add_option("--out", flags->out_dir, "directory for emitted files")
      ->capture_default_str();
  sub->add_option("--seed", *seed, "override the scenario seed")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--tol-active", *tol_active,
                  "override the active-set / feasibility tolerance")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--hold", flags->hold,
                  "consecutive steps before a switch event is committed")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  sub->add_flag("--quiet", flags->quiet, "suppress progress output");
}

bangride::CommonFlags finish_flags(bangride::CommonFlags flags,
                                   const std::optional<std::int64_t>& seed,
                                   const std::optional<double>& tol_active) {
  if (seed) flags.seed = static_cast<std::uint64_t>(*seed);
  if (tol_active) flags.tol_active = *tol_active;
  return flags;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "bangride: simulation, hypothesis checking and constrained optimal "
      "control of discrete-time monotone systems"};
  app.require_subcommand(1);

  std::string config_path;
  std::string trace_path;
  std::vector<std::string> compare_paths;
  bangride::CommonFlags flags;
  std::optional<std::int64_t> seed;
  std::optional<double> tol_active;

  auto* check = app.add_subcommand(
      "check", "report monotonicity assumptions, impulse response and sampling bounds");
  check->add_option("config", config_path, "scenario config (JSON)")->required();
  add_common_flags(check, &flags, &seed, &tol_active);

  auto* simulate = app.add_subcommand(
      "simulate", "run the scenario's strategy and export trace + metrics");
  simulate->add_option("config", config_path, "scenario config (JSON)")->required();
  add_common_flags(simulate, &flags, &seed, &tol_active);

  auto* oracle = app.add_subcommand(
      "oracle", "exhaustive open-loop grid search (needs options.grid)");
  oracle->add_option("config", config_path, "scenario config (JSON)")->required();
  add_common_flags(oracle, &flags, &seed, &tol_active);

  auto* compare = app.add_subcommand(
      "compare", "run several aligned scenarios and diff their trajectories");
  compare->add_option("configs", compare_paths, "two or more scenario configs")
      ->required()
      ->expected(-2);
  add_common_flags(compare, &flags, &seed, &tol_active);

  auto* switches = app.add_subcommand(
      "switches", "detect active-constraint switch events in an exported trace");
  switches->add_option("trace", trace_path, "trace CSV file")->required();
  add_common_flags(switches, &flags, &seed, &tol_active);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return bangride::exit_config_error;
  }

  const auto common = finish_flags(flags, seed, tol_active);
  if (check->parsed()) return bangride::cmd_check(config_path, common);
  if (simulate->parsed()) return bangride::cmd_simulate(config_path, common);
  if (oracle->parsed())
    return bangride::cmd_simulate(config_path, common,
                                  bangride::StrategyKind::oracle);
  if (compare->parsed()) return bangride::cmd_compare(compare_paths, common);
  if (switches->parsed()) return bangride::cmd_switches(trace_path, common);
  return bangride::exit_config_error;
}
