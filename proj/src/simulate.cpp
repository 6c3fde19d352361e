#include "bangride/simulate.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bangride {

std::vector<int> active_constraints(const Problem& problem, double u,
                                    const Eigen::VectorXd& y, double tol) {
  std::vector<int> act;
  if (u >= problem.u_max - tol) act.push_back(0);
  for (int i = 0; i < y.size(); ++i)
    if (y(i) >= problem.y_max(i) - tol) act.push_back(i + 1);
  return act;
}

int min_active_index(const Trajectory& trajectory, int t) {
  const auto& a = trajectory.active.at(static_cast<std::size_t>(t));
  return a.empty() ? -1 : a.front();
}

Trajectory rollout(const Problem& problem,
                   const std::function<double(int, const Eigen::VectorXd&)>& control,
                   double tol_active) {
  problem.validate();
  const int steps = problem.t_f + 1;

  Trajectory tr;
  tr.x.reserve(steps);
  tr.u.reserve(steps);
  tr.y.reserve(steps);
  tr.active.reserve(steps);

  Eigen::VectorXd x = problem.x0;
  double cost = 0.0;
  for (int t = 0; t < steps; ++t) {
    const double u = control(t, x);
    const Eigen::VectorXd y = problem.system.output(x, u);
    const double l = problem.system.running_cost(x, u);
    if (y.size() != problem.system.output_dim()) {
      std::ostringstream msg;
      msg << "rollout: output has length " << y.size() << " at step " << t
          << ", expected " << problem.system.output_dim();
      throw std::runtime_error(msg.str());
    }
    if (!std::isfinite(u) || !y.allFinite() || !std::isfinite(l)) {
      std::ostringstream msg;
      msg << "rollout: non-finite value at step " << t
          << " (model blow-up or invalid input)";
      throw std::runtime_error(msg.str());
    }
    cost += l;
    tr.u.push_back(u);
    tr.y.push_back(y);
    tr.active.push_back(active_constraints(problem, u, y, tol_active));
    tr.x.push_back(x);
    if (t < problem.t_f) {
      x = problem.system.next_state(x, u);
      if (x.size() != problem.system.state_dim() || !x.allFinite()) {
        std::ostringstream msg;
        msg << "rollout: non-finite or mis-sized state after step " << t;
        throw std::runtime_error(msg.str());
      }
    }
  }
  tr.cost = cost;
  return tr;
}

Trajectory simulate(const Problem& problem, std::span<const double> inputs,
                    double tol_active) {
  if (static_cast<int>(inputs.size()) != problem.t_f + 1) {
    std::ostringstream msg;
    msg << "simulate: got " << inputs.size() << " inputs for a horizon of "
        << problem.t_f + 1 << " steps";
    throw std::invalid_argument(msg.str());
  }
  for (double u : inputs)
    if (!std::isfinite(u)) throw std::invalid_argument("simulate: inputs must be finite");
  return rollout(
      problem, [&inputs](int t, const Eigen::VectorXd&) { return inputs[t]; },
      tol_active);
}

double evaluate_cost(const Problem& problem, const Trajectory& trajectory) {
  const int steps = problem.t_f + 1;
  if (trajectory.length() != steps || static_cast<int>(trajectory.x.size()) != steps) {
    throw std::invalid_argument("evaluate_cost: trajectory length does not match the horizon");
  }
  double cost = 0.0;
  for (int t = 0; t < steps; ++t) {
    if (trajectory.x[t].size() != problem.system.state_dim())
      throw std::invalid_argument("evaluate_cost: state dimension mismatch");
    cost += problem.system.running_cost(trajectory.x[t], trajectory.u[t]);
  }
  return cost;
}

FeasibilityReport check_feasible(const Problem& problem,
                                 const Trajectory& trajectory, double tol) {
  if (tol < 0.0) throw std::invalid_argument("check_feasible: tol must be nonnegative");
  FeasibilityReport report;
  for (int t = 0; t < trajectory.length(); ++t) {
    const double u_excess = trajectory.u[t] - problem.u_max;
    report.max_violation = std::max(report.max_violation, u_excess);
    if (u_excess > tol) report.violations.push_back({t, 0, u_excess});
    const auto& y = trajectory.y[t];
    for (int i = 0; i < y.size(); ++i) {
      const double y_excess = y(i) - problem.y_max(i);
      report.max_violation = std::max(report.max_violation, y_excess);
      if (y_excess > tol) report.violations.push_back({t, i + 1, y_excess});
    }
  }
  report.max_violation = std::max(report.max_violation, 0.0);
  report.feasible = report.violations.empty();
  return report;
}

}  // namespace bangride
