#include "bangride/system.hpp"

#include <sstream>
#include <stdexcept>

namespace bangride {

namespace {

void fail(const std::string& what) { throw std::invalid_argument(what); }

}  // namespace

void LinearSystem::validate() const {
  const auto rows = A.rows();
  if (rows < 1 || A.cols() != rows) fail("LinearSystem: A must be square and non-empty");
  if (B.size() != rows) fail("LinearSystem: B must have one entry per state");
  if (C.rows() < 1 || C.cols() != rows) fail("LinearSystem: C must be p x n with p >= 1");
  if (D.size() != C.rows()) fail("LinearSystem: D must have one entry per output");
  if (E.size() != rows) fail("LinearSystem: E must have one entry per state");
  if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite() ||
      !E.allFinite() || !std::isfinite(F))
    fail("LinearSystem: matrices must be finite");
}

void NonlinearSystem::validate() const {
  if (n < 1 || p < 1) fail("NonlinearSystem: n and p must be at least 1");
  if (!f || !h || !L) fail("NonlinearSystem: f, h and L must all be set");
}

NonlinearSystem as_nonlinear(const LinearSystem& sys) {
  sys.validate();
  NonlinearSystem out;
  out.n = sys.n();
  out.p = sys.p();
  out.f = [sys](const Eigen::VectorXd& x, double u) -> Eigen::VectorXd {
    return sys.A * x + u * sys.B;
  };
  out.h = [sys](const Eigen::VectorXd& x, double u) -> Eigen::VectorXd {
    return sys.C * x + u * sys.D;
  };
  out.L = [sys](const Eigen::VectorXd& x, double u) -> double {
    return sys.E.dot(x) + sys.F * u;
  };
  return out;
}

const LinearSystem& SystemModel::linear() const {
  if (!is_linear()) throw std::logic_error("SystemModel: not a linear model");
  return std::get<LinearSystem>(model_);
}

const NonlinearSystem& SystemModel::nonlinear() const {
  if (is_linear()) throw std::logic_error("SystemModel: not a nonlinear model");
  return std::get<NonlinearSystem>(model_);
}

int SystemModel::state_dim() const {
  return is_linear() ? linear().n() : nonlinear().n;
}

int SystemModel::output_dim() const {
  return is_linear() ? linear().p() : nonlinear().p;
}

Eigen::VectorXd SystemModel::next_state(const Eigen::VectorXd& x, double u) const {
  if (is_linear()) {
    const auto& sys = linear();
    return sys.A * x + u * sys.B;
  }
  return nonlinear().f(x, u);
}

Eigen::VectorXd SystemModel::output(const Eigen::VectorXd& x, double u) const {
  if (is_linear()) {
    const auto& sys = linear();
    return sys.C * x + u * sys.D;
  }
  return nonlinear().h(x, u);
}

double SystemModel::running_cost(const Eigen::VectorXd& x, double u) const {
  if (is_linear()) {
    const auto& sys = linear();
    return sys.E.dot(x) + sys.F * u;
  }
  return nonlinear().L(x, u);
}

void SystemModel::validate() const {
  if (is_linear())
    linear().validate();
  else
    nonlinear().validate();
}

void Problem::validate() const {
  system.validate();
  const int n = system.state_dim();
  const int p = system.output_dim();
  if (x0.size() != n) {
    std::ostringstream msg;
    msg << "Problem: x0 has length " << x0.size() << ", expected " << n;
    fail(msg.str());
  }
  if (!x0.allFinite()) fail("Problem: x0 must be finite");
  if (t_f < 0) fail("Problem: t_f must be nonnegative");
  if (!std::isfinite(u_max)) fail("Problem: u_max must be finite");
  if (y_max.size() != p) {
    std::ostringstream msg;
    msg << "Problem: y_max has length " << y_max.size() << ", expected " << p;
    fail(msg.str());
  }
  if (!y_max.allFinite()) fail("Problem: y_max must be finite");
}

}  // namespace bangride
