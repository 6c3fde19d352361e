#pragma once

#include <functional>
#include <span>
#include <vector>

#include "bangride/system.hpp"

namespace bangride {

// Absolute tolerance for treating a constraint as sitting on its bound.
inline constexpr double default_tol_active = 1e-9;

// Time-indexed record of an open- or closed-loop run. active[t] lists the
// constraints on their bounds at step t, ascending: 0 is the input
// constraint, i >= 1 is output i-1. Membership is one-sided
// (value >= bound - tol), so violating steps also count as active.
struct Trajectory {
  std::vector<Eigen::VectorXd> x;
  std::vector<double> u;
  std::vector<Eigen::VectorXd> y;
  std::vector<std::vector<int>> active;
  double cost = 0.0;

  int length() const { return static_cast<int>(u.size()); }
};

struct ConstraintViolation {
  int t = 0;
  int constraint = 0;  // 0 = input, i >= 1 = output i-1
  double amount = 0.0;  // excess above the bound
};

struct FeasibilityReport {
  bool feasible = true;
  double max_violation = 0.0;  // largest excess over any bound, clamped at 0
  std::vector<ConstraintViolation> violations;
};

std::vector<int> active_constraints(const Problem& problem, double u,
                                    const Eigen::VectorXd& y, double tol);

// Smallest active index at step t, or -1 when no constraint is active.
int min_active_index(const Trajectory& trajectory, int t);

// Runs the closed loop u[t] = control(t, x[t]) over the problem horizon.
// Throws std::runtime_error when the recursion produces a non-finite state,
// output or cost (model blow-up), naming the offending step.
Trajectory rollout(const Problem& problem,
                   const std::function<double(int, const Eigen::VectorXd&)>& control,
                   double tol_active = default_tol_active);

// Open-loop simulation of a fixed input sequence of length t_f+1.
// Feasibility is recorded, never enforced.
Trajectory simulate(const Problem& problem, std::span<const double> inputs,
                    double tol_active = default_tol_active);

// Recomputes the accumulated running reward of a recorded trajectory.
double evaluate_cost(const Problem& problem, const Trajectory& trajectory);

// Reports every constraint exceeded by more than tol, with magnitudes.
FeasibilityReport check_feasible(const Problem& problem,
                                 const Trajectory& trajectory, double tol);

}  // namespace bangride
