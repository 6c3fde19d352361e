#include "bangride/pid.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bangride {

PidBank::PidBank(std::vector<PidGains> gains, double u_max) : u_max_(u_max) {
  if (gains.empty()) throw std::invalid_argument("PidBank: needs at least one loop");
  for (const auto& g : gains)
    if (!std::isfinite(g.kp) || !std::isfinite(g.ki) || !std::isfinite(g.kd) ||
        !std::isfinite(g.kw))
      throw std::invalid_argument("PidBank: gains must be finite");
  if (!std::isfinite(u_max)) throw std::invalid_argument("PidBank: u_max must be finite");
  loops_.reserve(gains.size());
  for (const auto& g : gains) loops_.emplace_back(g);
}

PidBank::StepResult PidBank::step(const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& y_max) {
  const int p = static_cast<int>(loops_.size());
  if (y.size() != p || y_max.size() != p)
    throw std::invalid_argument("PidBank::step: output length must match the loop count");

  StepResult r;
  r.errors.resize(p);
  r.candidates.resize(p);
  double best = u_max_;
  int winner = 0;
  for (int i = 0; i < p; ++i) {
    const double e = y_max(i) - y(i);
    const double c = loops_[i].candidate(e);
    r.errors[i] = e;
    r.candidates[i] = c;
    if (c < best) {
      best = c;
      winner = i + 1;
    }
  }
  for (int i = 0; i < p; ++i) loops_[i].commit(r.errors[i], best, r.candidates[i]);
  r.u = best;
  r.winner = winner;
  return r;
}

PidRunResult run_pid_selector(const Problem& problem,
                              const std::vector<PidGains>& gains,
                              double tol_active) {
  problem.validate();
  const int p = problem.system.output_dim();
  if (static_cast<int>(gains.size()) != p) {
    std::ostringstream msg;
    msg << "run_pid_selector: got " << gains.size() << " gain sets for " << p
        << " outputs";
    throw std::invalid_argument(msg.str());
  }

  PidRunResult out{Trajectory{}, {}, {}, {}, PidBank(gains, problem.u_max)};
  out.errors.assign(p, {});
  out.candidates.assign(p, {});
  const int steps = problem.t_f + 1;
  for (auto& v : out.errors) v.reserve(steps);
  for (auto& v : out.candidates) v.reserve(steps);
  out.winners.reserve(steps);

  double u_prev = 0.0;
  auto control = [&](int, const Eigen::VectorXd& x) {
    const Eigen::VectorXd y_meas = problem.system.output(x, u_prev);
    const auto st = out.bank.step(y_meas, problem.y_max);
    for (int i = 0; i < p; ++i) {
      out.errors[i].push_back(st.errors[i]);
      out.candidates[i].push_back(st.candidates[i]);
    }
    out.winners.push_back(st.winner);
    u_prev = st.u;
    return st.u;
  };
  out.trajectory = rollout(problem, control, tol_active);
  return out;
}

}  // namespace bangride
