#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bangride/system.hpp"

namespace bangride {

// Entries of D below this threshold do not count as strictly positive
// feedthrough.
inline constexpr double strict_feedthrough_tol = 1e-12;

struct Witness {
  std::string location;
  std::string condition;
};

// Outcome of the structural hypotheses behind the bang-ride optimality
// results. For sampled (nonlinear) checks a true flag only means that no
// counterexample was found.
struct AssumptionReport {
  bool cost_monotone = false;
  bool dynamics_monotone = false;
  bool output_strictly_increasing_in_u = false;
  bool impulse_decreasing = false;
  std::optional<int> first_violation_index;  // first step where g increases
  std::vector<Witness> witnesses;

  bool all_hold() const {
    return cost_monotone && dynamics_monotone &&
           output_strictly_increasing_in_u && impulse_decreasing;
  }
};

// g[0] = D, g[t] = C A^{t-1} B for t >= 1, built by repeated matrix-vector
// products.
std::vector<Eigen::VectorXd> impulse_response(const LinearSystem& sys, int t_f);

struct MonotoneCheck {
  bool nonincreasing = true;
  std::optional<int> step;    // smallest t with g[t+1] > g[t] in some output
  std::optional<int> output;  // output index of that violation
};

// Nonincreasing test of a vector sequence over t in [0, t_f].
MonotoneCheck is_decreasing(const std::vector<Eigen::VectorXd>& g, int t_f);

// Entrywise sign conditions on A, B (dynamics), E, F (reward), strict
// positivity of D (output), plus the impulse test over [0, t_f].
AssumptionReport check_linear_assumptions(const LinearSystem& sys, int t_f);

struct SampleBox {
  Eigen::VectorXd x_lo;
  Eigen::VectorXd x_hi;
  double u_lo = 0.0;
  double u_hi = 0.0;
};

// Randomized falsification of the monotonicity hypotheses of a nonlinear
// model over the given box. Draws ordered pairs and looks for violations;
// flags stay true when no counterexample was found among `samples` trials.
// The impulse flag is not sampled and is reported true.
AssumptionReport probe_nonlinear_monotonicity(const NonlinearSystem& sys,
                                              const SampleBox& box, int samples,
                                              std::uint64_t seed);

// -1 when the output already has direct feedthrough; otherwise the smallest
// d in [0, n-1] with C_i A^d B != 0. nullopt when the output is completely
// decoupled from the input.
std::optional<int> relative_degree(const LinearSystem& sys, int output);

// Replaces output row i (which must have zero feedthrough and finite
// relative degree d) by its (d+1)-step-ahead value:
//   C_i -> C_i A^{d+1},  D_i -> C_i A^d B.
// Along any trajectory the new output at t equals the old output at t+d+1.
LinearSystem lift_output(const LinearSystem& sys, int output);

}  // namespace bangride
