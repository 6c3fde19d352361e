#include "bangride/checks.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace bangride {

namespace {

std::string entry_location(const char* name, int r, int c) {
  std::ostringstream s;
  s << name << "(" << r << "," << c << ")";
  return s.str();
}

std::string describe_value(double v, const char* cond) {
  std::ostringstream s;
  s << "entry " << v << " " << cond;
  return s.str();
}

}  // namespace

std::vector<Eigen::VectorXd> impulse_response(const LinearSystem& sys, int t_f) {
  sys.validate();
  if (t_f < 0) throw std::invalid_argument("impulse_response: t_f must be nonnegative");
  std::vector<Eigen::VectorXd> g;
  g.reserve(static_cast<std::size_t>(t_f) + 1);
  g.push_back(sys.D);
  Eigen::VectorXd v = sys.B;  // A^{t-1} B for the current t
  for (int t = 1; t <= t_f; ++t) {
    g.push_back(sys.C * v);
    v = sys.A * v;
  }
  return g;
}

MonotoneCheck is_decreasing(const std::vector<Eigen::VectorXd>& g, int t_f) {
  if (static_cast<int>(g.size()) < t_f + 1)
    throw std::invalid_argument("is_decreasing: sequence shorter than t_f+1");
  for (int t = 0; t < t_f; ++t) {
    for (int i = 0; i < g[t].size(); ++i) {
      if (g[t + 1](i) > g[t](i)) return {false, t, i};
    }
  }
  return {true, std::nullopt, std::nullopt};
}

AssumptionReport check_linear_assumptions(const LinearSystem& sys, int t_f) {
  sys.validate();
  AssumptionReport r;

  r.dynamics_monotone = true;
  for (int i = 0; i < sys.A.rows(); ++i)
    for (int j = 0; j < sys.A.cols(); ++j)
      if (sys.A(i, j) < 0.0) {
        r.dynamics_monotone = false;
        r.witnesses.push_back({entry_location("A", i, j),
                               describe_value(sys.A(i, j), "is negative")});
      }
  for (int i = 0; i < sys.B.size(); ++i)
    if (sys.B(i) < 0.0) {
      r.dynamics_monotone = false;
      r.witnesses.push_back({entry_location("B", i, 0),
                             describe_value(sys.B(i), "is negative")});
    }

  r.cost_monotone = sys.F >= 0.0;
  if (sys.F < 0.0)
    r.witnesses.push_back({"F", describe_value(sys.F, "is negative")});
  for (int j = 0; j < sys.E.size(); ++j)
    if (sys.E(j) < 0.0) {
      r.cost_monotone = false;
      r.witnesses.push_back({entry_location("E", 0, j),
                             describe_value(sys.E(j), "is negative")});
    }

  r.output_strictly_increasing_in_u = true;
  for (int i = 0; i < sys.D.size(); ++i)
    if (sys.D(i) <= strict_feedthrough_tol) {
      r.output_strictly_increasing_in_u = false;
      r.witnesses.push_back({entry_location("D", i, 0),
                             describe_value(sys.D(i), "is not strictly positive")});
    }

  const auto g = impulse_response(sys, t_f);
  const auto mono = is_decreasing(g, t_f);
  r.impulse_decreasing = mono.nonincreasing;
  r.first_violation_index = mono.step;
  if (!mono.nonincreasing) {
    std::ostringstream loc, cond;
    loc << "g[" << *mono.step + 1 << "](" << *mono.output << ")";
    cond << "impulse response increases from " << g[*mono.step](*mono.output)
         << " to " << g[*mono.step + 1](*mono.output);
    r.witnesses.push_back({loc.str(), cond.str()});
  }
  return r;
}

AssumptionReport probe_nonlinear_monotonicity(const NonlinearSystem& sys,
                                              const SampleBox& box, int samples,
                                              std::uint64_t seed) {
  sys.validate();
  if (samples < 1) throw std::invalid_argument("probe: samples must be at least 1");
  if (box.x_lo.size() != sys.n || box.x_hi.size() != sys.n)
    throw std::invalid_argument("probe: box dimensions must match the state dimension");
  if ((box.x_hi - box.x_lo).minCoeff() < 0.0 || box.u_hi < box.u_lo)
    throw std::invalid_argument("probe: box must be nonempty");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw_x = [&]() {
    Eigen::VectorXd v(sys.n);
    for (int i = 0; i < sys.n; ++i)
      v(i) = box.x_lo(i) + unit(rng) * (box.x_hi(i) - box.x_lo(i));
    return v;
  };
  auto draw_u = [&]() { return box.u_lo + unit(rng) * (box.u_hi - box.u_lo); };
  auto guard = [](double ref) { return 1e-12 * (1.0 + std::abs(ref)); };

  AssumptionReport r;
  r.cost_monotone = true;
  r.dynamics_monotone = true;
  r.output_strictly_increasing_in_u = true;
  r.impulse_decreasing = true;  // not sampled here
  // Strictness is only probed across gaps this wide; the hypotheses allow
  // equality on sets of measure zero.
  const double strict_gap = 1e-3 * (box.u_hi - box.u_lo);

  for (int s = 0; s < samples; ++s) {
    const Eigen::VectorXd xa = draw_x(), xb = draw_x();
    const Eigen::VectorXd x_lo = xa.cwiseMin(xb), x_hi = xa.cwiseMax(xb);
    const double ua = draw_u(), ub = draw_u();
    const double u_lo = std::min(ua, ub), u_hi = std::max(ua, ub);

    const Eigen::VectorXd f_lo = sys.f(x_lo, u_lo), f_hi = sys.f(x_hi, u_hi);
    for (int i = 0; i < sys.n; ++i) {
      if (f_hi(i) < f_lo(i) - guard(f_lo(i))) {
        r.dynamics_monotone = false;
        std::ostringstream loc, cond;
        loc << "f, sample " << s << ", component " << i;
        cond << "f decreased from " << f_lo(i) << " to " << f_hi(i)
             << " on the ordered pair x=[" << x_lo.transpose() << "] u=" << u_lo
             << " vs x=[" << x_hi.transpose() << "] u=" << u_hi;
        r.witnesses.push_back({loc.str(), cond.str()});
        break;
      }
    }

    const double l_lo = sys.L(x_lo, u_lo), l_hi = sys.L(x_hi, u_hi);
    if (l_hi < l_lo - guard(l_lo)) {
      r.cost_monotone = false;
      std::ostringstream loc, cond;
      loc << "L, sample " << s;
      cond << "running reward decreased from " << l_lo << " to " << l_hi
           << " on an ordered pair";
      r.witnesses.push_back({loc.str(), cond.str()});
    }

    // Output strictness is tested at a shared state.
    const Eigen::VectorXd x_shared = draw_x();
    const Eigen::VectorXd h_lo = sys.h(x_shared, u_lo), h_hi = sys.h(x_shared, u_hi);
    for (int i = 0; i < sys.p; ++i) {
      const bool decreased = h_hi(i) < h_lo(i) - guard(h_lo(i));
      const bool flat = u_hi - u_lo > strict_gap && h_hi(i) <= h_lo(i);
      if (decreased || flat) {
        r.output_strictly_increasing_in_u = false;
        std::ostringstream loc, cond;
        loc << "h, sample " << s << ", output " << i;
        cond << (decreased ? "output decreased" : "output failed to increase")
             << " from " << h_lo(i) << " to " << h_hi(i) << " over u in ["
             << u_lo << ", " << u_hi << "]";
        r.witnesses.push_back({loc.str(), cond.str()});
        break;
      }
    }
  }
  return r;
}

std::optional<int> relative_degree(const LinearSystem& sys, int output) {
  sys.validate();
  if (output < 0 || output >= sys.p())
    throw std::invalid_argument("relative_degree: output index out of range");
  if (sys.D(output) != 0.0) return -1;
  Eigen::RowVectorXd w = sys.C.row(output);  // C_i A^d as d advances
  for (int d = 0; d <= sys.n() - 1; ++d) {
    if (w.dot(sys.B) != 0.0) return d;
    w = w * sys.A;
  }
  return std::nullopt;
}

LinearSystem lift_output(const LinearSystem& sys, int output) {
  const auto d = relative_degree(sys, output);
  if (!d) {
    std::ostringstream msg;
    msg << "lift_output: output " << output << " is decoupled from the input";
    throw std::invalid_argument(msg.str());
  }
  if (*d < 0) {
    std::ostringstream msg;
    msg << "lift_output: output " << output << " already has direct feedthrough";
    throw std::invalid_argument(msg.str());
  }
  Eigen::RowVectorXd w = sys.C.row(output);
  for (int k = 0; k < *d; ++k) w = w * sys.A;  // C_i A^d
  LinearSystem out = sys;
  out.D(output) = w.dot(sys.B);
  out.C.row(output) = w * sys.A;
  return out;
}

}  // namespace bangride
