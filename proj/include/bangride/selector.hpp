#pragma once

#include <optional>

#include "bangride/simulate.hpp"

namespace bangride {

struct RootSolverConfig {
  double tol = 1e-10;         // relative bracket width on u at termination
  int max_iter = 200;
  double bracket_limit = 0.0; // <= 0 picks 1e9 (the policy scales by u_max)
  double initial_step = 1.0;  // first geometric expansion step from u = 0
};

struct SelectorOptions {
  RootSolverConfig root;
  double tol_active = default_tol_active;
  std::optional<double> u_min;  // optional lower clamp, off by default
};

// Input that puts output i exactly on its bound for a linear system:
// (y_max_i - C_i x) / D_i. Requires D_i > 0.
double selector_gain_linear(const LinearSystem& sys, const Eigen::VectorXd& x,
                            int i, const Eigen::VectorXd& y_max);

// Solves h_i(x, u) = y_max_i for u by geometric bracket expansion from 0
// followed by bisection. Requires h_i increasing in u. Returns +infinity
// when h_i(x, u) stays below the bound for every u up to the bracket limit;
// throws when the bound is exceeded for every u down to -limit (the state
// admits no feasible input) or when h is seen to decrease across the
// bracket. If h_i is flat at the bound over an interval, the solution set
// is that interval and the bisection limit inside it is returned.
double solve_constraint_equation(const NonlinearSystem& sys,
                                 const Eigen::VectorXd& x, int i,
                                 const Eigen::VectorXd& y_max,
                                 const RootSolverConfig& cfg);

// State feedback u = min{u_max, K_1(x), ..., K_p(x)} where K_i holds output
// i on its bound. The u_max term keeps the law finite everywhere.
class SelectorPolicy {
 public:
  explicit SelectorPolicy(Problem problem, SelectorOptions opts = {});

  struct Decision {
    double u = 0.0;
    int active_index = 0;  // 0 = input constraint, i >= 1 = output i-1
    bool clamped = false;  // the optional u_min clamp was binding
  };

  // Ties resolve to the lowest index.
  Decision decide(const Eigen::VectorXd& x) const;

  const Problem& problem() const { return problem_; }
  const SelectorOptions& options() const { return opts_; }

 private:
  Problem problem_;
  SelectorOptions opts_;
};

// Closed-loop run of the selector: every step ends with the input bound or
// some output bound active (within tol_active).
Trajectory run_selector(const SelectorPolicy& policy);
Trajectory run_selector(const Problem& problem, SelectorOptions opts = {});

}  // namespace bangride
