#include "bangride/battery.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bangride/checks.hpp"

namespace bangride {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << name << " must be positive and finite, got " << v;
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

void SpmParams::validate() const {
  require_positive(a1, "a1");
  require_positive(a2, "a2");
  require_positive(b1, "b1");
  require_positive(b2, "b2");
  require_positive(b3, "b3");
  require_positive(c1, "c1");
  require_positive(c2, "c2");
  require_positive(c3, "c3");
}

SpmBuildResult build_spm(const SpmParams& params, double t_s,
                         int impulse_horizon) {
  params.validate();
  require_positive(t_s, "t_s");
  if (impulse_horizon < 1)
    throw std::invalid_argument("build_spm: impulse_horizon must be at least 1");

  LinearSystem sys;
  sys.A = Eigen::Vector3d(1.0 - params.a1 * t_s, 1.0 - params.a2 * t_s, 1.0)
              .asDiagonal();
  sys.B = t_s * Eigen::Vector3d(params.b1, params.b2, params.b3);
  sys.C = Eigen::RowVector3d(params.c1, params.c2, params.c3);
  sys.D = Eigen::VectorXd::Zero(1);
  sys.E = Eigen::RowVector3d(0.0, 0.0, 1.0);
  sys.F = 0.0;

  SpmBuildResult r;
  r.system = lift_output(sys, 0);
  r.ts_bound = 1.0 / std::max(params.a1, params.a2);
  r.ts_ok = t_s <= r.ts_bound;
  r.impulse_decreasing =
      is_decreasing(impulse_response(r.system, impulse_horizon), impulse_horizon)
          .nonincreasing;
  return r;
}

void EcmParams::validate() const {
  require_positive(R0, "R0");
  require_positive(R1, "R1");
  require_positive(R2, "R2");
  require_positive(C1, "C1");
  require_positive(C2, "C2");
  require_positive(Q, "Q");
  require_positive(beta, "beta");
}

EcmBuildResult build_ecm(const EcmParams& params, double t_s) {
  params.validate();
  require_positive(t_s, "t_s");

  LinearSystem sys;
  sys.A = Eigen::Vector3d(1.0 - t_s / (params.R1 * params.C1),
                          1.0 - t_s / (params.R2 * params.C2), 1.0)
              .asDiagonal();
  sys.B = t_s * Eigen::Vector3d(1.0 / params.C1, 1.0 / params.C2, 1.0 / params.Q);
  sys.C = Eigen::RowVector3d(1.0, 1.0, params.beta);
  sys.D = Eigen::VectorXd::Constant(1, params.R0);
  sys.E = Eigen::RowVector3d(0.0, 0.0, 1.0);
  sys.F = 0.0;

  EcmBuildResult r;
  r.system = sys;
  r.ts1 = std::min(params.R1 * params.C1, params.R2 * params.C2);
  r.ts2 = params.R0 /
          (1.0 / params.C1 + 1.0 / params.C2 + params.beta / params.Q);
  return r;
}

EcmScenario reference_ecm_scenario() {
  EcmParams params;
  params.R0 = 1e-3;
  params.R1 = 1.5e-3;
  params.R2 = 1e-3;
  params.C1 = 2e6;
  params.C2 = 5e5;
  params.Q = 50.0 * seconds_per_hour;
  params.beta = 0.1;
  const double t_s = 0.05;

  Problem pb;
  pb.system = SystemModel(build_ecm(params, t_s).system);
  pb.x0 = Eigen::VectorXd::Zero(3);
  pb.t_f = 60000;
  pb.u_max = 100.0;
  pb.y_max = Eigen::VectorXd::Constant(1, 0.2);
  return {pb, params, t_s};
}

}  // namespace bangride
