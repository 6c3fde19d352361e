#pragma once

#include "bangride/system.hpp"

namespace bangride {

inline constexpr double seconds_per_hour = 3600.0;

// Reduced-order electrochemical cell: two first-order diffusion modes plus
// an integrator for the bulk concentration, surface concentration as the
// output. All coefficients are positive.
struct SpmParams {
  double a1 = 0.0, a2 = 0.0;            // diffusion poles, 1/s
  double b1 = 0.0, b2 = 0.0, b3 = 0.0;  // input gains
  double c1 = 0.0, c2 = 0.0, c3 = 0.0;  // output weights

  void validate() const;
};

struct SpmBuildResult {
  LinearSystem system;      // surface-concentration output lifted one step
  double ts_bound = 0.0;    // largest t_s keeping the dynamics monotone
  bool ts_ok = false;       // t_s <= ts_bound
  bool impulse_decreasing = false;  // over the requested horizon
};

// Forward-Euler discretization with the charging-current sign convention:
//   A = diag(1 - a1 t_s, 1 - a2 t_s, 1),  B = t_s [b1; b2; b3],
//   output row [c1 c2 c3] with no feedthrough.
// The output is lifted one step so the input acts on it directly; the
// reward maximizes the bulk concentration (E = [0 0 1], F = 0). A t_s
// beyond the monotonicity bound fails the flag rather than throwing.
SpmBuildResult build_spm(const SpmParams& params, double t_s,
                         int impulse_horizon = 100);

// Equivalent-circuit cell: series resistance, two RC links and a state of
// charge integrator, over-potential voltage as the output. Base units
// throughout (ohm, farad, ampere-second, volt).
struct EcmParams {
  double R0 = 0.0, R1 = 0.0, R2 = 0.0;  // ohm
  double C1 = 0.0, C2 = 0.0;            // farad
  double Q = 0.0;                       // ampere-second
  double beta = 0.0;                    // volt per unit state of charge

  void validate() const;
};

struct EcmBuildResult {
  LinearSystem system;
  double ts1 = 0.0;  // min RC constant: t_s <= ts1 keeps the dynamics monotone
  double ts2 = 0.0;  // t_s <= ts2 keeps the first impulse step nonincreasing
};

// Forward-Euler discretization:
//   A = diag(1 - t_s/(R1 C1), 1 - t_s/(R2 C2), 1),
//   B = t_s [1/C1; 1/C2; 1/Q],  C = [1 1 beta],  D = [R0],
// reward E = [0 0 1], F = 0 (maximize the stored charge).
EcmBuildResult build_ecm(const EcmParams& params, double t_s);

struct EcmScenario {
  Problem problem;
  EcmParams params;
  double t_s = 0.0;
};

// Bundled fast-charging benchmark: 50 Ah cell, u_max = 100 A,
// y_max = 0.2 V, x0 = 0, t_s = 0.05 s, 60 000 steps (3000 s).
EcmScenario reference_ecm_scenario();

}  // namespace bangride
