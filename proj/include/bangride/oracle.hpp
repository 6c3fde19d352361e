#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bangride/simulate.hpp"

namespace bangride {

// Per-step candidate set for the exhaustive open-loop search: an evenly
// spaced grid over [u_lo, u_hi] plus any forced extra values (kept exact).
struct GridSpec {
  double u_lo = 0.0;
  double u_hi = 0.0;
  int points = 2;
  int t_f = 0;
  std::vector<double> extra_values;
  std::uint64_t budget = 2'000'000;  // max simulations per search

  std::vector<double> values() const;  // sorted, deduplicated
};

struct OracleResult {
  std::vector<double> best_inputs;
  double best_cost = 0.0;
  std::uint64_t feasible_count = 0;
  std::uint64_t evaluated = 0;
  bool found_feasible = false;
};

// Enumerates every input sequence on the grid, simulates each, and keeps
// the feasible one with the largest cost. Ties resolve to the
// lexicographically largest sequence, so the result does not depend on
// enumeration order. feas_tol is the slack allowed on each constraint when
// classifying a sequence as feasible.
OracleResult grid_oracle(const Problem& problem, const GridSpec& grid,
                         double feas_tol = 0.0);

// At each step applies the largest input that keeps the current step's
// constraints satisfied, found by bisection on the feasibility predicate.
// An implementation of the one-step maximality rule that is independent of
// the selector's boundary formulas.
Trajectory greedy_maximal(const Problem& problem,
                          double tol_active = default_tol_active);

struct BangRideCheck {
  bool bang_ride = true;
  std::optional<int> first_inactive_step;
};

// True iff every step has u >= u_max - tol or some y_i >= y_max_i - tol.
BangRideCheck verify_bangride(const Trajectory& trajectory,
                              const Problem& problem, double tol);

// Cost gap of the two-step instance with x0 = 0, t_f = 1, E = 0, F = 1 and
// y_max = D u_max, where the greedy bang-ride sequence scores
// (1+gamma) u_max against u_max for the sequence {0, u_max}; gamma < 0
// makes the bang-ride strictly suboptimal.
struct CounterexampleGap {
  double gamma = 0.0;
  double j_bangride = 0.0;
  double j_alternative = 0.0;
};

CounterexampleGap counterexample_gap(const Eigen::VectorXd& cb,
                                     const Eigen::VectorXd& d, double u_max);

// The built-in instance of that family: n = 1, A = [1], B = [1], C = [2],
// D = [1], E = 0, F = 1, u_max = 1, y_max = 1, t_f = 1.
Problem counterexample_problem();

}  // namespace bangride
