#include "bangride/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace bangride {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(ctx + ": unknown key '" + item.key() + "'");
  }
}

const json& require_field(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) throw ConfigError(ctx + "." + key + ": missing");
  return j.at(key);
}

double get_number(const json& j, const char* key, const std::string& ctx) {
  const json& v = require_field(j, key, ctx);
  if (!v.is_number()) throw ConfigError(ctx + "." + key + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(ctx + "." + key + ": must be finite");
  return d;
}

double get_positive(const json& j, const char* key, const std::string& ctx) {
  const double d = get_number(j, key, ctx);
  if (!(d > 0.0)) throw ConfigError(ctx + "." + key + ": must be positive");
  return d;
}

int get_int(const json& j, const char* key, const std::string& ctx) {
  const json& v = require_field(j, key, ctx);
  if (!v.is_number_integer()) throw ConfigError(ctx + "." + key + ": expected an integer");
  return v.get<int>();
}

std::string get_string(const json& j, const char* key, const std::string& ctx) {
  const json& v = require_field(j, key, ctx);
  if (!v.is_string()) throw ConfigError(ctx + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> number_array(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.empty()) throw ConfigError(ctx + ": expected a non-empty array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(ctx + ": expected numbers");
    const double d = e.get<double>();
    if (!std::isfinite(d)) throw ConfigError(ctx + ": entries must be finite");
    out.push_back(d);
  }
  return out;
}

Eigen::VectorXd vector_from_json(const json& v, const std::string& ctx) {
  const auto vals = number_array(v, ctx);
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<int>(vals.size()));
}

Eigen::MatrixXd matrix_from_json(const json& v, const std::string& ctx) {
  if (!v.is_array() || v.empty()) throw ConfigError(ctx + ": expected an array of rows");
  const auto first = number_array(v.at(0), ctx + "[0]");
  Eigen::MatrixXd m(static_cast<int>(v.size()), static_cast<int>(first.size()));
  for (int r = 0; r < m.rows(); ++r) {
    std::ostringstream rc;
    rc << ctx << "[" << r << "]";
    const auto row = number_array(v.at(r), rc.str());
    if (static_cast<int>(row.size()) != m.cols())
      throw ConfigError(ctx + ": rows must have equal length");
    for (int c = 0; c < m.cols(); ++c) m(r, c) = row[c];
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

EcmParams parse_ecm_params(const json& j) {
  const std::string ctx = "parameters";
  require_keys(j, {"R0_ohm", "R1_ohm", "R2_ohm", "C1_farad", "C2_farad", "Q_Ah", "Q_As", "beta"}, ctx);
  EcmParams p;
  p.R0 = get_positive(j, "R0_ohm", ctx);
  p.R1 = get_positive(j, "R1_ohm", ctx);
  p.R2 = get_positive(j, "R2_ohm", ctx);
  p.C1 = get_positive(j, "C1_farad", ctx);
  p.C2 = get_positive(j, "C2_farad", ctx);
  p.beta = get_positive(j, "beta", ctx);
  const bool has_ah = j.contains("Q_Ah"), has_as = j.contains("Q_As");
  if (has_ah == has_as)
    throw ConfigError(ctx + ": give the capacity as exactly one of Q_Ah or Q_As");
  p.Q = has_ah ? get_positive(j, "Q_Ah", ctx) * seconds_per_hour
               : get_positive(j, "Q_As", ctx);
  return p;
}

SpmParams parse_spm_params(const json& j) {
  const std::string ctx = "parameters";
  require_keys(j, {"a1", "a2", "b1", "b2", "b3", "c1", "c2", "c3"}, ctx);
  SpmParams p;
  p.a1 = get_positive(j, "a1", ctx);
  p.a2 = get_positive(j, "a2", ctx);
  p.b1 = get_positive(j, "b1", ctx);
  p.b2 = get_positive(j, "b2", ctx);
  p.b3 = get_positive(j, "b3", ctx);
  p.c1 = get_positive(j, "c1", ctx);
  p.c2 = get_positive(j, "c2", ctx);
  p.c3 = get_positive(j, "c3", ctx);
  return p;
}

LinearModelConfig parse_linear_params(const json& j) {
  const std::string ctx = "parameters";
  require_keys(j, {"A", "B", "C", "D", "E", "F"}, ctx);
  LinearModelConfig cfg;
  cfg.system.A = matrix_from_json(require_field(j, "A", ctx), ctx + ".A");
  cfg.system.B = vector_from_json(require_field(j, "B", ctx), ctx + ".B");
  cfg.system.C = matrix_from_json(require_field(j, "C", ctx), ctx + ".C");
  cfg.system.D = vector_from_json(require_field(j, "D", ctx), ctx + ".D");
  cfg.system.E = vector_from_json(require_field(j, "E", ctx), ctx + ".E").transpose();
  cfg.system.F = get_number(j, "F", ctx);
  try {
    cfg.system.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(ctx + ": " + e.what());
  }
  return cfg;
}

CounterexampleConfig parse_counterexample_params(const json& j) {
  const std::string ctx = "parameters";
  require_keys(j, {"cb", "d"}, ctx);
  CounterexampleConfig cfg;
  if (j.contains("cb")) cfg.cb = vector_from_json(j.at("cb"), ctx + ".cb");
  if (j.contains("d")) cfg.d = vector_from_json(j.at("d"), ctx + ".d");
  if (cfg.cb.size() != cfg.d.size())
    throw ConfigError(ctx + ": cb and d must have equal length");
  return cfg;
}

int spm_flag_horizon(int t_f) { return std::max(1, std::min(t_f, 1000)); }

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ecm: return "ecm";
    case ModelKind::spm: return "spm";
    case ModelKind::linear_generic: return "linear-generic";
    case ModelKind::counterexample: return "counterexample";
  }
  return "?";
}

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::selector: return "selector";
    case StrategyKind::pid: return "pid";
    case StrategyKind::greedy: return "greedy";
    case StrategyKind::oracle: return "oracle";
  }
  return "?";
}

Scenario parse_scenario(const json& j, const std::string& default_name) {
  const std::string ctx = "config";
  require_keys(j,
               {"name", "model", "parameters", "t_s", "t_f", "u_max", "y_max",
                "x0", "strategy", "options", "output", "seed", "tol_active"},
               ctx);
  Scenario s;
  s.name = j.contains("name") ? get_string(j, "name", ctx) : default_name;
  if (s.name.empty()) throw ConfigError("config.name: must not be empty");

  const std::string model = get_string(j, "model", ctx);
  if (model == "ecm")
    s.model = ModelKind::ecm;
  else if (model == "spm")
    s.model = ModelKind::spm;
  else if (model == "linear-generic")
    s.model = ModelKind::linear_generic;
  else if (model == "counterexample")
    s.model = ModelKind::counterexample;
  else
    throw ConfigError("config.model: unknown model '" + model + "'");

  if (s.model == ModelKind::counterexample) {
    if (j.contains("parameters"))
      s.counterexample = parse_counterexample_params(j.at("parameters"));
  } else {
    const json& params = require_field(j, "parameters", ctx);
    if (s.model == ModelKind::ecm)
      s.ecm = parse_ecm_params(params);
    else if (s.model == ModelKind::spm)
      s.spm = parse_spm_params(params);
    else
      s.linear = parse_linear_params(params);
  }

  s.t_s = get_positive(j, "t_s", ctx);
  s.t_f = get_int(j, "t_f", ctx);
  if (s.t_f < 0) throw ConfigError("config.t_f: must be nonnegative");
  s.u_max = get_number(j, "u_max", ctx);
  const json& ym = require_field(j, "y_max", ctx);
  if (ym.is_number())
    s.y_max = {ym.get<double>()};
  else
    s.y_max = number_array(ym, ctx + ".y_max");
  for (double v : s.y_max)
    if (!std::isfinite(v)) throw ConfigError("config.y_max: must be finite");

  if (j.contains("x0")) s.x0 = number_array(j.at("x0"), ctx + ".x0");

  const std::string strat = get_string(j, "strategy", ctx);
  if (strat == "selector")
    s.strategy = StrategyKind::selector;
  else if (strat == "pid")
    s.strategy = StrategyKind::pid;
  else if (strat == "greedy")
    s.strategy = StrategyKind::greedy;
  else if (strat == "oracle")
    s.strategy = StrategyKind::oracle;
  else
    throw ConfigError("config.strategy: unknown strategy '" + strat + "'");

  if (j.contains("options")) {
    const json& opts = j.at("options");
    require_keys(opts, {"selector", "pid", "grid"}, "options");
    if (opts.contains("selector")) {
      const json& sel = opts.at("selector");
      require_keys(sel, {"tol_root", "max_iter", "u_min"}, "options.selector");
      if (sel.contains("tol_root")) s.selector.tol_root = get_positive(sel, "tol_root", "options.selector");
      if (sel.contains("max_iter")) {
        s.selector.max_iter = get_int(sel, "max_iter", "options.selector");
        if (s.selector.max_iter < 1)
          throw ConfigError("options.selector.max_iter: must be at least 1");
      }
      if (sel.contains("u_min")) s.selector.u_min = get_number(sel, "u_min", "options.selector");
    }
    if (opts.contains("pid")) {
      const json& pid = opts.at("pid");
      require_keys(pid, {"gains"}, "options.pid");
      const json& gains = require_field(pid, "gains", "options.pid");
      if (!gains.is_array() || gains.empty())
        throw ConfigError("options.pid.gains: expected a non-empty array");
      for (std::size_t i = 0; i < gains.size(); ++i) {
        std::ostringstream gc;
        gc << "options.pid.gains[" << i << "]";
        const json& g = gains.at(i);
        require_keys(g, {"kp", "ki", "kd", "kw"}, gc.str());
        PidGains pg;
        if (g.contains("kp")) pg.kp = get_number(g, "kp", gc.str());
        if (g.contains("ki")) pg.ki = get_number(g, "ki", gc.str());
        if (g.contains("kd")) pg.kd = get_number(g, "kd", gc.str());
        if (g.contains("kw")) pg.kw = get_number(g, "kw", gc.str());
        s.pid_gains.push_back(pg);
      }
    }
    if (opts.contains("grid")) {
      const json& grid = opts.at("grid");
      require_keys(grid, {"u_lo", "u_hi", "points", "budget"}, "options.grid");
      s.grid.u_lo = get_number(grid, "u_lo", "options.grid");
      s.grid.u_hi = get_number(grid, "u_hi", "options.grid");
      s.grid.points = get_int(grid, "points", "options.grid");
      if (s.grid.points < 2) throw ConfigError("options.grid.points: must be at least 2");
      if (!(s.grid.u_lo < s.grid.u_hi))
        throw ConfigError("options.grid: u_lo must be below u_hi");
      if (grid.contains("budget")) {
        const json& b = grid.at("budget");
        if (!b.is_number_integer() || b.get<long long>() < 1)
          throw ConfigError("options.grid.budget: expected a positive integer");
        s.grid.budget = b.get<std::uint64_t>();
      }
      s.grid.configured = true;
    }
  }

  if (j.contains("output")) {
    const json& out = j.at("output");
    require_keys(out, {"trace", "metrics"}, "output");
    if (out.contains("trace")) s.trace_path = get_string(out, "trace", "output");
    if (out.contains("metrics")) s.metrics_path = get_string(out, "metrics", "output");
  }

  if (j.contains("seed")) {
    const json& v = j.at("seed");
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw ConfigError("config.seed: expected a nonnegative integer");
    s.seed = v.get<std::uint64_t>();
  }
  if (j.contains("tol_active")) {
    s.tol_active = get_number(j, "tol_active", ctx);
    if (s.tol_active < 0.0) throw ConfigError("config.tol_active: must be nonnegative");
  }
  return s;
}

Scenario load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_scenario(j, path.stem().string());
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  j["model"] = to_string(s.model);
  switch (s.model) {
    case ModelKind::ecm:
      j["parameters"] = {{"R0_ohm", s.ecm.R0},   {"R1_ohm", s.ecm.R1},
                         {"R2_ohm", s.ecm.R2},   {"C1_farad", s.ecm.C1},
                         {"C2_farad", s.ecm.C2}, {"Q_As", s.ecm.Q},
                         {"beta", s.ecm.beta}};
      break;
    case ModelKind::spm:
      j["parameters"] = {{"a1", s.spm.a1}, {"a2", s.spm.a2}, {"b1", s.spm.b1},
                         {"b2", s.spm.b2}, {"b3", s.spm.b3}, {"c1", s.spm.c1},
                         {"c2", s.spm.c2}, {"c3", s.spm.c3}};
      break;
    case ModelKind::linear_generic:
      j["parameters"] = {{"A", matrix_to_json(s.linear.system.A)},
                         {"B", vector_to_json(s.linear.system.B)},
                         {"C", matrix_to_json(s.linear.system.C)},
                         {"D", vector_to_json(s.linear.system.D)},
                         {"E", vector_to_json(s.linear.system.E.transpose())},
                         {"F", s.linear.system.F}};
      break;
    case ModelKind::counterexample:
      j["parameters"] = {{"cb", vector_to_json(s.counterexample.cb)},
                         {"d", vector_to_json(s.counterexample.d)}};
      break;
  }
  j["t_s"] = s.t_s;
  j["t_f"] = s.t_f;
  j["u_max"] = s.u_max;
  j["y_max"] = s.y_max;
  if (s.x0) j["x0"] = *s.x0;
  j["strategy"] = to_string(s.strategy);
  json opts;
  json sel;
  sel["tol_root"] = s.selector.tol_root;
  sel["max_iter"] = s.selector.max_iter;
  if (s.selector.u_min) sel["u_min"] = *s.selector.u_min;
  opts["selector"] = sel;
  if (!s.pid_gains.empty()) {
    json gains = json::array();
    for (const auto& g : s.pid_gains)
      gains.push_back({{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}, {"kw", g.kw}});
    opts["pid"] = {{"gains", gains}};
  }
  if (s.grid.configured)
    opts["grid"] = {{"u_lo", s.grid.u_lo},
                    {"u_hi", s.grid.u_hi},
                    {"points", s.grid.points},
                    {"budget", s.grid.budget}};
  j["options"] = opts;
  if (!s.trace_path.empty() || !s.metrics_path.empty()) {
    json out;
    if (!s.trace_path.empty()) out["trace"] = s.trace_path;
    if (!s.metrics_path.empty()) out["metrics"] = s.metrics_path;
    j["output"] = out;
  }
  j["seed"] = s.seed;
  j["tol_active"] = s.tol_active;
  return j;
}

Problem build_problem(const Scenario& s) {
  try {
    LinearSystem sys;
    switch (s.model) {
      case ModelKind::ecm:
        sys = build_ecm(s.ecm, s.t_s).system;
        break;
      case ModelKind::spm:
        sys = build_spm(s.spm, s.t_s, spm_flag_horizon(s.t_f)).system;
        break;
      case ModelKind::linear_generic:
        sys = s.linear.system;
        break;
      case ModelKind::counterexample: {
        const int p = static_cast<int>(s.counterexample.cb.size());
        sys.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
        sys.B = Eigen::VectorXd::Constant(1, 1.0);
        sys.C = s.counterexample.cb;
        sys.D = s.counterexample.d;
        sys.E = Eigen::RowVectorXd::Zero(1);
        sys.F = 1.0;
        if (p < 1) throw ConfigError("parameters.cb: must not be empty");
        break;
      }
    }
    Problem pb;
    pb.system = SystemModel(sys);
    const int n = pb.system.state_dim();
    const int p = pb.system.output_dim();
    if (s.x0) {
      if (static_cast<int>(s.x0->size()) != n) {
        std::ostringstream msg;
        msg << "config.x0: has length " << s.x0->size() << ", expected " << n;
        throw ConfigError(msg.str());
      }
      pb.x0 = Eigen::Map<const Eigen::VectorXd>(s.x0->data(), n);
    } else {
      pb.x0 = Eigen::VectorXd::Zero(n);
    }
    pb.t_f = s.t_f;
    pb.u_max = s.u_max;
    if (static_cast<int>(s.y_max.size()) != p) {
      std::ostringstream msg;
      msg << "config.y_max: has length " << s.y_max.size() << ", expected " << p;
      throw ConfigError(msg.str());
    }
    pb.y_max = Eigen::Map<const Eigen::VectorXd>(s.y_max.data(), p);
    pb.validate();
    return pb;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::vector<SwitchEvent> detect_switches(const std::vector<int>& min_active,
                                         double t_s, int hold) {
  if (hold < 1) throw std::invalid_argument("detect_switches: hold must be at least 1");
  std::vector<SwitchEvent> events;
  const int steps = static_cast<int>(min_active.size());
  if (steps == 0) return events;
  int current = min_active[0];
  for (int t = 1; t < steps; ++t) {
    if (min_active[t] == current) continue;
    bool held = t + hold <= steps;
    for (int k = t; held && k < t + hold; ++k) held = min_active[k] == min_active[t];
    if (held) {
      events.push_back({t, t * t_s, current, min_active[t]});
      current = min_active[t];
    }
  }
  return events;
}

std::vector<SwitchEvent> detect_switches(const Trajectory& trajectory,
                                         double t_s, int hold) {
  std::vector<int> idx(trajectory.length());
  for (int t = 0; t < trajectory.length(); ++t) idx[t] = min_active_index(trajectory, t);
  return detect_switches(idx, t_s, hold);
}

RunMetrics compute_metrics(const Problem& problem, const Trajectory& trajectory,
                           double t_s, int hold) {
  RunMetrics m;
  m.final_cost = trajectory.cost;
  const int p = problem.system.output_dim();
  m.max_violation.assign(p + 1, 0.0);
  m.gap_per_step.reserve(trajectory.length());
  for (int t = 0; t < trajectory.length(); ++t) {
    m.max_violation[0] =
        std::max(m.max_violation[0], trajectory.u[t] - problem.u_max);
    const auto& y = trajectory.y[t];
    for (int i = 0; i < p; ++i)
      m.max_violation[i + 1] =
          std::max(m.max_violation[i + 1], y(i) - problem.y_max(i));
    const int a = min_active_index(trajectory, t);
    double gap;
    if (a == 0) {
      gap = std::abs(problem.u_max - trajectory.u[t]);
    } else if (a >= 1) {
      gap = std::abs(problem.y_max(a - 1) - y(a - 1));
    } else {
      gap = std::numeric_limits<double>::infinity();
      for (int i = 0; i < p; ++i) gap = std::min(gap, std::abs(problem.y_max(i) - y(i)));
    }
    m.gap_per_step.push_back(gap);
    m.gap_peak = std::max(m.gap_peak, gap);
  }
  for (auto& v : m.max_violation) v = std::max(v, 0.0);
  m.switches = detect_switches(trajectory, t_s, hold);
  return m;
}

double peak_post_switch_error(const Problem& problem,
                              const Trajectory& trajectory,
                              const std::vector<SwitchEvent>& events) {
  int start = 0;
  bool found = false;
  for (const auto& e : events)
    if (e.from == 0) {
      start = e.t;
      found = true;
      break;
    }
  if (!found && !events.empty()) start = events.front().t;
  double peak = 0.0;
  for (int t = start; t < trajectory.length(); ++t)
    for (int i = 0; i < problem.system.output_dim(); ++i)
      peak = std::max(peak, std::abs(problem.y_max(i) - trajectory.y[t](i)));
  return peak;
}

ScenarioRun execute_scenario(const Scenario& s, int hold) {
  ScenarioRun run;
  run.scenario = s;
  run.problem = build_problem(s);
  const int p = run.problem.system.output_dim();
  switch (s.strategy) {
    case StrategyKind::selector: {
      SelectorOptions opts;
      opts.tol_active = s.tol_active;
      opts.root.tol = s.selector.tol_root;
      opts.root.max_iter = s.selector.max_iter;
      opts.u_min = s.selector.u_min;
      run.trajectory = run_selector(run.problem, opts);
      break;
    }
    case StrategyKind::pid: {
      if (static_cast<int>(s.pid_gains.size()) != p) {
        std::ostringstream msg;
        msg << "options.pid.gains: got " << s.pid_gains.size()
            << " gain sets for " << p << " outputs";
        throw ConfigError(msg.str());
      }
      run.trajectory = run_pid_selector(run.problem, s.pid_gains, s.tol_active).trajectory;
      break;
    }
    case StrategyKind::greedy:
      run.trajectory = greedy_maximal(run.problem, s.tol_active);
      break;
    case StrategyKind::oracle: {
      if (!s.grid.configured)
        throw ConfigError("options.grid: required for the oracle strategy");
      GridSpec grid;
      grid.u_lo = s.grid.u_lo;
      grid.u_hi = s.grid.u_hi;
      grid.points = s.grid.points;
      grid.t_f = s.t_f;
      grid.budget = s.grid.budget;
      auto res = grid_oracle(run.problem, grid, 0.0);
      if (!res.found_feasible)
        throw std::runtime_error("grid_oracle: no feasible sequence on the grid");
      run.trajectory = simulate(run.problem, res.best_inputs, s.tol_active);
      run.oracle = std::move(res);
      break;
    }
  }
  run.metrics = compute_metrics(run.problem, run.trajectory, s.t_s, hold);
  return run;
}

namespace {

std::vector<double> cumulative_cost(const Problem& problem,
                                    const Trajectory& trajectory) {
  std::vector<double> cum;
  cum.reserve(trajectory.length());
  double acc = 0.0;
  for (int t = 0; t < trajectory.length(); ++t) {
    acc += problem.system.running_cost(trajectory.x[t], trajectory.u[t]);
    cum.push_back(acc);
  }
  return cum;
}

}  // namespace

void write_trace_csv(const fs::path& path, const Problem& problem,
                     const Trajectory& trajectory, double t_s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open trace file for writing: " + path.string());
  const int p = problem.system.output_dim();
  const int n = problem.system.state_dim();
  out << "t,time_s,u";
  for (int i = 1; i <= p; ++i) out << ",y" << i;
  for (int i = 1; i <= n; ++i) out << ",x" << i;
  out << ",active_idx,cost_cum\n";
  const auto cum = cumulative_cost(problem, trajectory);
  for (int t = 0; t < trajectory.length(); ++t) {
    out << t << ',' << fmt_double(t * t_s) << ',' << fmt_double(trajectory.u[t]);
    for (int i = 0; i < p; ++i) out << ',' << fmt_double(trajectory.y[t](i));
    for (int i = 0; i < n; ++i) out << ',' << fmt_double(trajectory.x[t](i));
    out << ',' << min_active_index(trajectory, t) << ',' << fmt_double(cum[t]) << '\n';
  }
  if (!out) throw std::runtime_error("failed while writing trace file: " + path.string());
}

TraceFile read_trace_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trace file is empty: " + path.string());

  auto split = [](const std::string& text) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(text);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };

  const auto header = split(line);
  TraceFile tf;
  std::size_t col = 3;
  if (header.size() < 6 || header[0] != "t" || header[1] != "time_s" || header[2] != "u")
    throw ConfigError("trace header must start with t,time_s,u");
  while (col < header.size() && header[col].rfind('y', 0) == 0) {
    ++tf.p;
    ++col;
  }
  while (col < header.size() && header[col].rfind('x', 0) == 0) {
    ++tf.n;
    ++col;
  }
  if (tf.p < 1 || tf.n < 1 || col + 2 != header.size() ||
      header[col] != "active_idx" || header[col + 1] != "cost_cum")
    throw ConfigError("trace header does not match t,time_s,u,y*,x*,active_idx,cost_cum");

  const std::size_t expected = header.size();
  int row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != expected) {
      std::ostringstream msg;
      msg << "trace row " << row << " has " << cells.size() << " cells, expected "
          << expected;
      throw ConfigError(msg.str());
    }
    std::size_t c = 0;
    auto next_double = [&]() { return std::stod(cells.at(c++)); };
    tf.t.push_back(std::stoi(cells.at(c++)));
    tf.time_s.push_back(next_double());
    tf.u.push_back(next_double());
    std::vector<double> y(tf.p), x(tf.n);
    for (int i = 0; i < tf.p; ++i) y[i] = next_double();
    for (int i = 0; i < tf.n; ++i) x[i] = next_double();
    tf.y.push_back(std::move(y));
    tf.x.push_back(std::move(x));
    tf.active_idx.push_back(std::stoi(cells.at(c++)));
    tf.cost_cum.push_back(next_double());
    ++row;
  }
  return tf;
}

json assumption_report_to_json(const AssumptionReport& report) {
  json j;
  j["cost_monotone"] = report.cost_monotone;
  j["dynamics_monotone"] = report.dynamics_monotone;
  j["output_strictly_increasing_in_u"] = report.output_strictly_increasing_in_u;
  j["impulse_decreasing"] = report.impulse_decreasing;
  j["first_violation_index"] =
      report.first_violation_index ? json(*report.first_violation_index) : json(nullptr);
  json w = json::array();
  for (const auto& witness : report.witnesses)
    w.push_back({{"location", witness.location}, {"condition", witness.condition}});
  j["witnesses"] = w;
  j["all_hold"] = report.all_hold();
  return j;
}

json metrics_to_json(const ScenarioRun& run) {
  const Scenario& s = run.scenario;
  json j;
  j["name"] = s.name;
  j["model"] = to_string(s.model);
  j["strategy"] = to_string(s.strategy);
  j["t_s"] = s.t_s;
  j["steps"] = run.trajectory.length();
  j["seed"] = s.seed;
  j["final_cost"] = run.metrics.final_cost;
  j["max_violation"] = run.metrics.max_violation;
  json events = json::array();
  for (const auto& e : run.metrics.switches)
    events.push_back({{"t", e.t}, {"time_s", e.time_s}, {"from", e.from}, {"to", e.to}});
  j["switch_events"] = events;
  j["optimality_gap"] = {{"per_step", run.metrics.gap_per_step},
                         {"peak", run.metrics.gap_peak}};
  if (run.oracle) {
    j["oracle"] = {{"best_cost", run.oracle->best_cost},
                   {"best_inputs", run.oracle->best_inputs},
                   {"feasible_count", run.oracle->feasible_count},
                   {"evaluated", run.oracle->evaluated}};
  }
  if (s.model == ModelKind::counterexample) {
    const auto gap =
        counterexample_gap(s.counterexample.cb, s.counterexample.d, s.u_max);
    j["counterexample"] = {{"gamma", gap.gamma},
                           {"j_bangride", gap.j_bangride},
                           {"j_alternative", gap.j_alternative}};
  }
  return j;
}

json pid_bank_to_json(const PidBank& bank) {
  json loops = json::array();
  for (const auto& loop : bank.loops()) {
    loops.push_back({{"gains",
                      {{"kp", loop.gains().kp},
                       {"ki", loop.gains().ki},
                       {"kd", loop.gains().kd},
                       {"kw", loop.gains().kw}}},
                     {"integral_sum", loop.integral_sum()},
                     {"prev_error", loop.prev_error()},
                     {"windup_sum", loop.windup_sum()}});
  }
  return {{"u_max", bank.u_max()}, {"loops", loops}};
}

PidBank pid_bank_from_json(const json& j) {
  require_keys(j, {"u_max", "loops"}, "pid_bank");
  const json& loops = require_field(j, "loops", "pid_bank");
  if (!loops.is_array() || loops.empty())
    throw ConfigError("pid_bank.loops: expected a non-empty array");
  std::vector<PidGains> gains;
  for (const auto& l : loops) {
    const json& g = require_field(l, "gains", "pid_bank.loops");
    gains.push_back({get_number(g, "kp", "pid_bank.gains"),
                     get_number(g, "ki", "pid_bank.gains"),
                     get_number(g, "kd", "pid_bank.gains"),
                     get_number(g, "kw", "pid_bank.gains")});
  }
  PidBank bank(gains, get_number(j, "u_max", "pid_bank"));
  for (std::size_t i = 0; i < loops.size(); ++i) {
    const json& l = loops.at(i);
    bank.loops()[i].restore(get_number(l, "integral_sum", "pid_bank.loops"),
                            get_number(l, "prev_error", "pid_bank.loops"),
                            get_number(l, "windup_sum", "pid_bank.loops"));
  }
  return bank;
}

namespace {

void apply_flags(Scenario& s, const CommonFlags& flags) {
  if (flags.seed) s.seed = *flags.seed;
  if (flags.tol_active) {
    if (*flags.tol_active < 0.0) throw ConfigError("--tol-active: must be nonnegative");
    s.tol_active = *flags.tol_active;
  }
}

fs::path resolve_out(const std::string& configured, const fs::path& out_dir,
                     const std::string& fallback) {
  fs::path p = configured.empty() ? fs::path(fallback) : fs::path(configured);
  return p.is_absolute() ? p : out_dir / p;
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed while writing: " + path.string());
}

int run_one(const std::string& config_path, const CommonFlags& flags,
            std::optional<StrategyKind> force_strategy, ScenarioRun* out_run) {
  Scenario s = load_scenario(config_path);
  apply_flags(s, flags);
  if (force_strategy) s.strategy = *force_strategy;

  const auto t0 = std::chrono::steady_clock::now();
  ScenarioRun run = execute_scenario(s, flags.hold);
  run.metrics.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path out_dir(flags.out_dir);
  fs::create_directories(out_dir);
  const fs::path trace = resolve_out(s.trace_path, out_dir, s.name + "_trace.csv");
  const fs::path metrics = resolve_out(s.metrics_path, out_dir, s.name + "_metrics.json");
  write_trace_csv(trace, run.problem, run.trajectory, s.t_s);
  write_json_file(metrics, metrics_to_json(run));

  const auto feas = check_feasible(run.problem, run.trajectory, s.tol_active);
  if (!flags.quiet) {
    std::cout << s.name << ": strategy=" << to_string(s.strategy)
              << " steps=" << run.trajectory.length()
              << " final_cost=" << fmt_double(run.metrics.final_cost)
              << " max_violation=" << fmt_double(feas.max_violation)
              << " wall_time_s=" << fmt_double(run.metrics.wall_time_s) << '\n';
    for (const auto& e : run.metrics.switches)
      std::cout << "  switch at t=" << e.t << " (" << fmt_double(e.time_s)
                << " s): " << e.from << " -> " << e.to << '\n';
    std::cout << "  trace: " << trace.string() << "\n  metrics: " << metrics.string()
              << '\n';
  }
  if (out_run) *out_run = std::move(run);
  return feas.feasible ? exit_ok : exit_infeasible;
}

bool same_linear(const LinearSystem& a, const LinearSystem& b) {
  return a.A == b.A && a.B == b.B && a.C == b.C && a.D == b.D && a.E == b.E &&
         a.F == b.F;
}

}  // namespace

int cmd_check(const std::string& config_path, const CommonFlags& flags) {
  try {
    Scenario s = load_scenario(config_path);
    apply_flags(s, flags);
    const Problem pb = build_problem(s);
    const LinearSystem& sys = pb.system.linear();
    const auto report = check_linear_assumptions(sys, s.t_f);

    json j;
    j["name"] = s.name;
    j["model"] = to_string(s.model);
    j["t_f"] = s.t_f;
    j["assumptions"] = assumption_report_to_json(report);
    const auto g = impulse_response(sys, std::min(s.t_f, 1));
    j["impulse"]["g0"] = vector_to_json(g[0]);
    if (g.size() > 1) j["impulse"]["g1"] = vector_to_json(g[1]);

    if (s.model == ModelKind::ecm) {
      const auto built = build_ecm(s.ecm, s.t_s);
      j["sampling"] = {{"t_s", s.t_s},
                       {"ts1", built.ts1},
                       {"ts2", built.ts2},
                       {"within_bounds", s.t_s <= std::min(built.ts1, built.ts2)}};
    } else if (s.model == ModelKind::spm) {
      const auto built = build_spm(s.spm, s.t_s, spm_flag_horizon(s.t_f));
      j["sampling"] = {{"t_s", s.t_s},
                       {"bound", built.ts_bound},
                       {"within_bound", built.ts_ok},
                       {"lifted_feedthrough", built.system.D(0)}};
    }

    const fs::path out_dir(flags.out_dir);
    fs::create_directories(out_dir);
    const fs::path out_path = out_dir / (s.name + "_check.json");
    write_json_file(out_path, j);

    if (!flags.quiet) {
      std::cout << s.name << ": assumptions "
                << (report.all_hold() ? "hold" : "do NOT hold") << '\n';
      if (s.model == ModelKind::ecm)
        std::cout << "  ts1 = " << fmt_double(j["sampling"]["ts1"].get<double>())
                  << " s, ts2 = " << fmt_double(j["sampling"]["ts2"].get<double>())
                  << " s, t_s = " << fmt_double(s.t_s) << " s\n";
      for (const auto& w : report.witnesses)
        std::cout << "  witness: " << w.location << ": " << w.condition << '\n';
      std::cout << "  report: " << out_path.string() << '\n';
    }
    return exit_ok;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime_error;
  }
}

int cmd_simulate(const std::string& config_path, const CommonFlags& flags,
                 std::optional<StrategyKind> force_strategy) {
  try {
    return run_one(config_path, flags, force_strategy, nullptr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime_error;
  }
}

int cmd_compare(const std::vector<std::string>& config_paths,
                const CommonFlags& flags) {
  try {
    if (config_paths.size() < 2)
      throw ConfigError("compare needs at least two scenario configs");

    // Validate alignment before any (possibly long) run.
    std::vector<Scenario> scenarios;
    std::vector<Problem> problems;
    for (const auto& path : config_paths) {
      Scenario s = load_scenario(path);
      apply_flags(s, flags);
      problems.push_back(build_problem(s));
      scenarios.push_back(std::move(s));
    }
    for (std::size_t k = 0; k < scenarios.size(); ++k)
      for (std::size_t l = k + 1; l < scenarios.size(); ++l)
        if (scenarios[k].name == scenarios[l].name)
          throw ConfigError("compare: scenario names must be distinct, got '" +
                            scenarios[k].name + "' twice");
    for (std::size_t k = 1; k < scenarios.size(); ++k) {
      if (scenarios[k].t_f != scenarios[0].t_f || scenarios[k].t_s != scenarios[0].t_s)
        throw ConfigError("compare: scenarios have misaligned horizons (t_s/t_f differ)");
      if (scenarios[k].model != scenarios[0].model ||
          !same_linear(problems[k].system.linear(), problems[0].system.linear()) ||
          problems[k].u_max != problems[0].u_max ||
          problems[k].y_max != problems[0].y_max || problems[k].x0 != problems[0].x0)
        throw ConfigError("compare: scenarios must share the same model and bounds");
    }

    std::vector<ScenarioRun> runs(config_paths.size());
    for (std::size_t k = 0; k < config_paths.size(); ++k) {
      CommonFlags sub = flags;
      sub.quiet = true;
      run_one(config_paths[k], sub, {}, &runs[k]);
    }
    const ScenarioRun& ref = runs[0];

    const fs::path out_dir(flags.out_dir);
    fs::create_directories(out_dir);
    const int p = ref.problem.system.output_dim();
    const int steps = ref.trajectory.length();

    json report;
    report["reference"] = ref.scenario.name;
    report["t_s"] = ref.scenario.t_s;
    report["t_f"] = ref.scenario.t_f;
    json run_summaries = json::array();
    for (const auto& r : runs) {
      json events = json::array();
      for (const auto& e : r.metrics.switches)
        events.push_back({{"t", e.t}, {"time_s", e.time_s}, {"from", e.from}, {"to", e.to}});
      run_summaries.push_back(
          {{"name", r.scenario.name},
           {"strategy", to_string(r.scenario.strategy)},
           {"final_cost", r.metrics.final_cost},
           {"switch_events", events},
           {"max_violation", r.metrics.max_violation},
           {"peak_post_switch_error",
            peak_post_switch_error(r.problem, r.trajectory, r.metrics.switches)}});
    }
    report["runs"] = run_summaries;

    json deltas = json::array();
    for (std::size_t k = 1; k < runs.size(); ++k) {
      const ScenarioRun& r = runs[k];
      const auto cum_ref = cumulative_cost(ref.problem, ref.trajectory);
      const auto cum_r = cumulative_cost(r.problem, r.trajectory);
      double max_du = 0.0;
      std::vector<double> max_dy(p, 0.0);
      const fs::path pair_csv =
          out_dir / ("compare_" + ref.scenario.name + "_vs_" + r.scenario.name + ".csv");
      std::ofstream out(pair_csv);
      if (!out)
        throw std::runtime_error("cannot open file for writing: " + pair_csv.string());
      out << "t,time_s,u_a,u_b,du";
      for (int i = 1; i <= p; ++i) out << ",y" << i << "_a,y" << i << "_b,dy" << i;
      out << ",cost_a,cost_b,dcost\n";
      for (int t = 0; t < steps; ++t) {
        const double du = r.trajectory.u[t] - ref.trajectory.u[t];
        max_du = std::max(max_du, std::abs(du));
        out << t << ',' << fmt_double(t * ref.scenario.t_s) << ','
            << fmt_double(ref.trajectory.u[t]) << ',' << fmt_double(r.trajectory.u[t])
            << ',' << fmt_double(du);
        for (int i = 0; i < p; ++i) {
          const double dy = r.trajectory.y[t](i) - ref.trajectory.y[t](i);
          max_dy[i] = std::max(max_dy[i], std::abs(dy));
          out << ',' << fmt_double(ref.trajectory.y[t](i)) << ','
              << fmt_double(r.trajectory.y[t](i)) << ',' << fmt_double(dy);
        }
        out << ',' << fmt_double(cum_ref[t]) << ',' << fmt_double(cum_r[t]) << ','
            << fmt_double(cum_r[t] - cum_ref[t]) << '\n';
      }
      deltas.push_back({{"name", r.scenario.name},
                        {"max_abs_du", max_du},
                        {"max_abs_dy", max_dy},
                        {"final_cost_delta", r.metrics.final_cost - ref.metrics.final_cost},
                        {"csv", pair_csv.filename().string()}});
    }
    report["deltas"] = deltas;

    const fs::path report_path = out_dir / "compare_report.json";
    write_json_file(report_path, report);
    if (!flags.quiet) {
      std::cout << "compared " << runs.size() << " runs against " << ref.scenario.name
                << '\n';
      for (const auto& d : deltas)
        std::cout << "  " << d["name"].get<std::string>()
                  << ": max|du| = " << fmt_double(d["max_abs_du"].get<double>())
                  << ", dJ = " << fmt_double(d["final_cost_delta"].get<double>()) << '\n';
      std::cout << "  report: " << report_path.string() << '\n';
    }
    return exit_ok;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime_error;
  }
}

int cmd_switches(const std::string& trace_path, const CommonFlags& flags) {
  try {
    const TraceFile tf = read_trace_csv(trace_path);
    auto events = detect_switches(tf.active_idx, 0.0, flags.hold);
    for (auto& e : events) e.time_s = tf.time_s.at(static_cast<std::size_t>(e.t));
    json out = json::array();
    for (const auto& e : events)
      out.push_back({{"t", e.t}, {"time_s", e.time_s}, {"from", e.from}, {"to", e.to}});
    std::cout << out.dump(2) << '\n';
    return exit_ok;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime_error;
  }
}

}  // namespace bangride
