#pragma once

#include <vector>

#include "bangride/simulate.hpp"

namespace bangride {

struct PidGains {
  double kp = 0.0;  // proportional
  double ki = 0.0;  // integral, per step
  double kd = 0.0;  // derivative, per step
  double kw = 0.0;  // anti-windup back-calculation; 0 disables it
};

// One discrete PID loop with back-calculation anti-windup:
//   u(t) = kp e(t) + ki sum_{k<t} e(k) + kd (e(t) - e(t-1))
//        + kw sum_{k<t} (u_applied(k) - u(k))
// The accumulators run up to t-1, so candidate() must be called before
// commit() at every step. e(-1) is taken as 0.
class PidLoop {
 public:
  PidLoop() = default;
  explicit PidLoop(PidGains gains) : gains_(gains) {}

  double candidate(double error) const {
    return gains_.kp * error + gains_.ki * integral_sum_ +
           gains_.kd * (error - prev_error_) + gains_.kw * windup_sum_;
  }

  void commit(double error, double applied_u, double candidate_u) {
    integral_sum_ += error;
    prev_error_ = error;
    windup_sum_ += applied_u - candidate_u;
  }

  const PidGains& gains() const { return gains_; }
  double integral_sum() const { return integral_sum_; }
  double prev_error() const { return prev_error_; }
  double windup_sum() const { return windup_sum_; }

  // Restores accumulator state (checkpoint loading).
  void restore(double integral_sum, double prev_error, double windup_sum) {
    integral_sum_ = integral_sum;
    prev_error_ = prev_error;
    windup_sum_ = windup_sum;
  }

 private:
  PidGains gains_{};
  double integral_sum_ = 0.0;
  double prev_error_ = 0.0;
  double windup_sum_ = 0.0;
};

// p PID loops feeding a min selector together with the input bound.
class PidBank {
 public:
  PidBank(std::vector<PidGains> gains, double u_max);

  struct StepResult {
    double u = 0.0;
    int winner = 0;  // 0 = input bound, i >= 1 = loop i-1
    std::vector<double> errors;
    std::vector<double> candidates;
  };

  // Computes all candidates from the measured output, applies the min rule,
  // then updates every loop with the selected input.
  StepResult step(const Eigen::VectorXd& y, const Eigen::VectorXd& y_max);

  const std::vector<PidLoop>& loops() const { return loops_; }
  std::vector<PidLoop>& loops() { return loops_; }
  double u_max() const { return u_max_; }

 private:
  std::vector<PidLoop> loops_;
  double u_max_ = 0.0;
};

struct PidRunResult {
  Trajectory trajectory;
  std::vector<std::vector<double>> errors;      // per loop, then per step
  std::vector<std::vector<double>> candidates;  // per loop, then per step
  std::vector<int> winners;                     // per step
  PidBank bank;                                 // final controller state
};

// Closed-loop run of the PID selector. The measurement fed to the bank at
// step t uses the previously applied input (the sensor is read before the
// actuator moves); the recorded trajectory uses the applied input, so it
// satisfies y[t] = h(x[t], u[t]).
PidRunResult run_pid_selector(const Problem& problem,
                              const std::vector<PidGains>& gains,
                              double tol_active = default_tol_active);

}  // namespace bangride
