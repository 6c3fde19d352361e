#pragma once

#include <Eigen/Dense>

#include <functional>
#include <variant>

namespace bangride {

// Discrete-time system with a scalar input, p outputs and a linear running
// reward:
//   x[t+1] = A x[t] + B u[t]
//   y[t]   = C x[t] + D u[t]
//   L(x,u) = E x + F u
struct LinearSystem {
  Eigen::MatrixXd A;     // n x n state transition
  Eigen::VectorXd B;     // n x 1 input map
  Eigen::MatrixXd C;     // p x n output map
  Eigen::VectorXd D;     // p x 1 feedthrough
  Eigen::RowVectorXd E;  // 1 x n running-reward state weights
  double F = 0.0;        // running-reward input weight

  int n() const { return static_cast<int>(A.rows()); }
  int p() const { return static_cast<int>(C.rows()); }

  // Throws std::invalid_argument on inconsistent dimensions or non-finite
  // entries.
  void validate() const;
};

// Nonlinear counterpart. h must return a vector of length p for every
// evaluation; f must return a state vector of length n.
struct NonlinearSystem {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> f;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> h;
  std::function<double(const Eigen::VectorXd&, double)> L;
  int n = 0;
  int p = 0;

  void validate() const;
};

// Wraps a linear system in the callable form, for code paths that only
// accept the nonlinear interface.
NonlinearSystem as_nonlinear(const LinearSystem& sys);

// Holds either model form and dispatches the three maps.
class SystemModel {
 public:
  SystemModel() = default;
  SystemModel(LinearSystem sys) : model_(std::move(sys)) {}
  SystemModel(NonlinearSystem sys) : model_(std::move(sys)) {}

  bool is_linear() const { return std::holds_alternative<LinearSystem>(model_); }
  const LinearSystem& linear() const;
  const NonlinearSystem& nonlinear() const;

  int state_dim() const;
  int output_dim() const;

  Eigen::VectorXd next_state(const Eigen::VectorXd& x, double u) const;
  Eigen::VectorXd output(const Eigen::VectorXd& x, double u) const;
  double running_cost(const Eigen::VectorXd& x, double u) const;

  void validate() const;

 private:
  std::variant<LinearSystem, NonlinearSystem> model_;
};

// One constrained maximization instance: maximize the accumulated running
// reward over t = 0..t_f subject to u[t] <= u_max and y[t] <= y_max.
// The input sequence has length t_f+1; u[t_f] affects y[t_f] and the cost
// but has no successor state.
struct Problem {
  SystemModel system;
  Eigen::VectorXd x0;
  int t_f = 0;
  double u_max = 0.0;
  Eigen::VectorXd y_max;

  void validate() const;
};

}  // namespace bangride
