#include "bangride/selector.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace bangride {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double monotone_guard(double ref) { return 1e-12 * (1.0 + std::abs(ref)); }

}  // namespace

double selector_gain_linear(const LinearSystem& sys, const Eigen::VectorXd& x,
                            int i, const Eigen::VectorXd& y_max) {
  if (i < 0 || i >= sys.p())
    throw std::invalid_argument("selector_gain_linear: output index out of range");
  if (y_max.size() != sys.p())
    throw std::invalid_argument("selector_gain_linear: y_max length mismatch");
  if (sys.D(i) <= 0.0) {
    std::ostringstream msg;
    msg << "selector_gain_linear: feedthrough D(" << i << ") = " << sys.D(i)
        << " must be positive (lift the output first if it is zero)";
    throw std::invalid_argument(msg.str());
  }
  return (y_max(i) - sys.C.row(i).dot(x)) / sys.D(i);
}

double solve_constraint_equation(const NonlinearSystem& sys,
                                 const Eigen::VectorXd& x, int i,
                                 const Eigen::VectorXd& y_max,
                                 const RootSolverConfig& cfg) {
  sys.validate();
  if (i < 0 || i >= sys.p)
    throw std::invalid_argument("solve_constraint_equation: output index out of range");
  if (y_max.size() != sys.p)
    throw std::invalid_argument("solve_constraint_equation: y_max length mismatch");
  const double limit = cfg.bracket_limit > 0.0 ? cfg.bracket_limit : 1e9;
  if (cfg.initial_step <= 0.0)
    throw std::invalid_argument("solve_constraint_equation: initial_step must be positive");

  const double target = y_max(i);
  auto phi = [&](double u) {
    const Eigen::VectorXd y = sys.h(x, u);
    if (y.size() != sys.p)
      throw std::runtime_error("solve_constraint_equation: output length mismatch");
    const double v = y(i) - target;
    if (!std::isfinite(v))
      throw std::runtime_error("solve_constraint_equation: non-finite output");
    return v;
  };

  double lo = 0.0, hi = 0.0;
  const double phi0 = phi(0.0);
  if (phi0 == 0.0) return 0.0;

  if (phi0 < 0.0) {
    // The bound lies above u = 0; expand upward.
    double prev_u = 0.0, prev_phi = phi0;
    double u = cfg.initial_step;
    while (true) {
      const double pv = phi(u);
      if (pv < prev_phi - monotone_guard(prev_phi)) {
        std::ostringstream msg;
        msg << "solve_constraint_equation: output " << i
            << " decreased across the bracket (not increasing in u)";
        throw std::runtime_error(msg.str());
      }
      if (pv >= 0.0) {
        lo = prev_u;
        hi = u;
        break;
      }
      if (u >= limit) return kInf;  // bound unreachable from below
      prev_u = u;
      prev_phi = pv;
      u = std::min(u * 2.0, limit);
    }
  } else {
    // The bound lies below u = 0; expand downward.
    double prev_u = 0.0, prev_phi = phi0;
    double u = -cfg.initial_step;
    while (true) {
      const double pv = phi(u);
      if (pv > prev_phi + monotone_guard(prev_phi)) {
        std::ostringstream msg;
        msg << "solve_constraint_equation: output " << i
            << " increased as u decreased (not increasing in u)";
        throw std::runtime_error(msg.str());
      }
      if (pv <= 0.0) {
        lo = u;
        hi = prev_u;
        break;
      }
      if (u <= -limit) {
        std::ostringstream msg;
        msg << "solve_constraint_equation: output " << i
            << " exceeds its bound for every input down to " << -limit;
        throw std::runtime_error(msg.str());
      }
      prev_u = u;
      prev_phi = pv;
      u = std::max(u * 2.0, -limit);
    }
  }

  // Bisection keeps phi(lo) < 0 <= phi(hi).
  for (int it = 0; it < cfg.max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) return mid;  // interval at float resolution
    if (phi(mid) >= 0.0)
      hi = mid;
    else
      lo = mid;
    if (hi - lo <= cfg.tol * std::max(1.0, std::min(std::abs(lo), std::abs(hi))))
      return 0.5 * (lo + hi);
  }
  throw std::runtime_error("solve_constraint_equation: exceeded max iterations");
}

SelectorPolicy::SelectorPolicy(Problem problem, SelectorOptions opts)
    : problem_(std::move(problem)), opts_(opts) {
  problem_.validate();
  if (problem_.system.is_linear()) {
    const auto& sys = problem_.system.linear();
    for (int i = 0; i < sys.p(); ++i)
      if (sys.D(i) <= 0.0) {
        std::ostringstream msg;
        msg << "SelectorPolicy: feedthrough D(" << i
            << ") must be positive; lift outputs without feedthrough first";
        throw std::invalid_argument(msg.str());
      }
  }
  if (opts_.u_min && *opts_.u_min > problem_.u_max)
    throw std::invalid_argument("SelectorPolicy: u_min clamp exceeds u_max");
  if (opts_.root.bracket_limit <= 0.0)
    opts_.root.bracket_limit = 1e9 * std::max(1.0, std::abs(problem_.u_max));
}

SelectorPolicy::Decision SelectorPolicy::decide(const Eigen::VectorXd& x) const {
  double best = problem_.u_max;
  int index = 0;
  const int p = problem_.system.output_dim();
  for (int i = 0; i < p; ++i) {
    const double k =
        problem_.system.is_linear()
            ? selector_gain_linear(problem_.system.linear(), x, i, problem_.y_max)
            : solve_constraint_equation(problem_.system.nonlinear(), x, i,
                                        problem_.y_max, opts_.root);
    if (k < best) {
      best = k;
      index = i + 1;
    }
  }
  Decision d{best, index, false};
  if (opts_.u_min && best < *opts_.u_min) {
    d.u = *opts_.u_min;
    d.clamped = true;
  }
  return d;
}

Trajectory run_selector(const SelectorPolicy& policy) {
  return rollout(
      policy.problem(),
      [&policy](int, const Eigen::VectorXd& x) { return policy.decide(x).u; },
      policy.options().tol_active);
}

Trajectory run_selector(const Problem& problem, SelectorOptions opts) {
  return run_selector(SelectorPolicy(problem, opts));
}

}  // namespace bangride
