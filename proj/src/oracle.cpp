#include "bangride/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace bangride {

namespace {

// Cost and feasibility of one candidate sequence without building a full
// Trajectory; the enumeration calls this millions of times.
struct LeanResult {
  double cost = 0.0;
  bool feasible = true;
};

LeanResult simulate_lean(const Problem& pb, const std::vector<double>& seq,
                         double feas_tol) {
  LeanResult r;
  Eigen::VectorXd x = pb.x0;
  for (int t = 0; t <= pb.t_f; ++t) {
    const double u = seq[t];
    if (u > pb.u_max + feas_tol) r.feasible = false;
    const Eigen::VectorXd y = pb.system.output(x, u);
    if (!y.allFinite())
      throw std::runtime_error("grid_oracle: non-finite output during enumeration");
    for (int i = 0; i < y.size(); ++i)
      if (y(i) > pb.y_max(i) + feas_tol) {
        r.feasible = false;
        break;
      }
    r.cost += pb.system.running_cost(x, u);
    if (t < pb.t_f) x = pb.system.next_state(x, u);
  }
  if (!x.allFinite() || !std::isfinite(r.cost))
    throw std::runtime_error("grid_oracle: non-finite value during enumeration");
  return r;
}

bool lex_greater(const std::vector<double>& a, const std::vector<double>& b) {
  return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

std::vector<double> GridSpec::values() const {
  if (points < 2) throw std::invalid_argument("GridSpec: points must be at least 2");
  if (!(u_lo < u_hi)) throw std::invalid_argument("GridSpec: u_lo must be below u_hi");
  if (!std::isfinite(u_lo) || !std::isfinite(u_hi))
    throw std::invalid_argument("GridSpec: bounds must be finite");
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(points) + extra_values.size());
  const double span = u_hi - u_lo;
  for (int k = 0; k < points - 1; ++k)
    v.push_back(u_lo + span * (static_cast<double>(k) / (points - 1)));
  v.push_back(u_hi);
  for (double e : extra_values) {
    if (!std::isfinite(e)) throw std::invalid_argument("GridSpec: extra values must be finite");
    v.push_back(e);
  }
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

OracleResult grid_oracle(const Problem& problem, const GridSpec& grid,
                         double feas_tol) {
  problem.validate();
  if (feas_tol < 0.0) throw std::invalid_argument("grid_oracle: feas_tol must be nonnegative");
  if (grid.t_f != problem.t_f)
    throw std::invalid_argument("grid_oracle: grid horizon must match the problem horizon");
  if (grid.u_hi > problem.u_max)
    throw std::invalid_argument("grid_oracle: grid upper bound exceeds u_max");
  const auto vals = grid.values();
  const std::size_t m = vals.size();
  const int steps = problem.t_f + 1;

  std::uint64_t total = 1;
  bool over_budget = false;
  for (int t = 0; t < steps && !over_budget; ++t) {
    if (total > grid.budget / m)
      over_budget = true;
    else
      total *= m;
  }
  if (over_budget || total > grid.budget) {
    std::ostringstream msg;
    msg << "grid_oracle: " << m << "^" << steps
        << " sequences exceed the enumeration budget of " << grid.budget;
    throw std::runtime_error(msg.str());
  }

  OracleResult res;
  res.best_cost = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(steps, 0);
  std::vector<double> seq(steps, vals[0]);
  while (true) {
    for (int t = 0; t < steps; ++t) seq[t] = vals[idx[t]];
    const LeanResult lr = simulate_lean(problem, seq, feas_tol);
    ++res.evaluated;
    if (lr.feasible) {
      ++res.feasible_count;
      if (!res.found_feasible || lr.cost > res.best_cost ||
          (lr.cost == res.best_cost && lex_greater(seq, res.best_inputs))) {
        res.found_feasible = true;
        res.best_cost = lr.cost;
        res.best_inputs = seq;
      }
    }
    int pos = steps - 1;
    while (pos >= 0 && ++idx[pos] == m) {
      idx[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return res;
}

Trajectory greedy_maximal(const Problem& problem, double tol_active) {
  problem.validate();
  auto feasible = [&problem](const Eigen::VectorXd& x, double u) {
    if (u > problem.u_max) return false;
    const Eigen::VectorXd y = problem.system.output(x, u);
    if (!y.allFinite())
      throw std::runtime_error("greedy_maximal: non-finite output while probing");
    return (y.array() <= problem.y_max.array()).all();
  };
  auto control = [&](int t, const Eigen::VectorXd& x) {
    if (feasible(x, problem.u_max)) return problem.u_max;
    double hi = problem.u_max;  // infeasible side
    double span = std::max(1.0, std::abs(problem.u_max));
    double lo = problem.u_max - span;
    int guard = 0;
    while (!feasible(x, lo)) {
      span *= 2.0;
      lo = problem.u_max - span;
      if (++guard > 200) {
        std::ostringstream msg;
        msg << "greedy_maximal: no feasible input found at step " << t;
        throw std::runtime_error(msg.str());
      }
    }
    // Bisection down to float resolution; lo stays feasible.
    for (int it = 0; it < 400; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (feasible(x, mid))
        lo = mid;
      else
        hi = mid;
    }
    return lo;
  };
  return rollout(problem, control, tol_active);
}

BangRideCheck verify_bangride(const Trajectory& trajectory,
                              const Problem& problem, double tol) {
  if (tol < 0.0) throw std::invalid_argument("verify_bangride: tol must be nonnegative");
  for (int t = 0; t < trajectory.length(); ++t) {
    bool active = trajectory.u[t] >= problem.u_max - tol;
    const auto& y = trajectory.y[t];
    for (int i = 0; !active && i < y.size(); ++i)
      active = y(i) >= problem.y_max(i) - tol;
    if (!active) return {false, t};
  }
  return {true, std::nullopt};
}

CounterexampleGap counterexample_gap(const Eigen::VectorXd& cb,
                                     const Eigen::VectorXd& d, double u_max) {
  if (cb.size() != d.size() || d.size() == 0)
    throw std::invalid_argument("counterexample_gap: CB and D must have equal, nonzero length");
  if (u_max <= 0.0) throw std::invalid_argument("counterexample_gap: u_max must be positive");
  double gamma = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d.size(); ++i) {
    if (d(i) <= 0.0)
      throw std::invalid_argument("counterexample_gap: D entries must be positive");
    gamma = std::min(gamma, (d(i) - cb(i)) / d(i));
  }
  return {gamma, (1.0 + gamma) * u_max, u_max};
}

Problem counterexample_problem() {
  LinearSystem sys;
  sys.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
  sys.B = Eigen::VectorXd::Constant(1, 1.0);
  sys.C = Eigen::MatrixXd::Constant(1, 1, 2.0);
  sys.D = Eigen::VectorXd::Constant(1, 1.0);
  sys.E = Eigen::RowVectorXd::Zero(1);
  sys.F = 1.0;
  Problem pb;
  pb.system = SystemModel(sys);
  pb.x0 = Eigen::VectorXd::Zero(1);
  pb.t_f = 1;
  pb.u_max = 1.0;
  pb.y_max = Eigen::VectorXd::Constant(1, 1.0);
  return pb;
}

}  // namespace bangride
