// SPDX-License-Identifier: MIT
//
// Monte Carlo cost evaluation J(u) = E[ int l dt + h(T) ], Gateaux
// derivatives of J (analytic via the variational processes, or paired
// finite differences with Richardson extrapolation), and the first-order
// variational-inequality check.

#pragma once

#include "emdelay/svie.hpp"

namespace emd {

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int n_paths = 0;
};

// Pathwise left-rule cost: sum_k l(t_k, args_k) dt + h(x(T),y(T),z(T),k(T)).
double path_cost(const DelaySystem& sys, const StateTrajectory& traj);

McEstimate evaluate_cost(const DelaySystem& sys, const ControlProcess& control,
                         const BrownianEnsemble& noise);

// Per-path difference of costs under the paired (common random numbers)
// ensemble; mean/std_error of J(u2) - J(u1).
McEstimate cost_difference(const DelaySystem& sys, const ControlProcess& u1,
                           const ControlProcess& u2,
                           const BrownianEnsemble& noise);

enum class GateauxMethod { Analytic, FiniteDifference };

struct GateauxOptions {
  GateauxMethod method = GateauxMethod::Analytic;
  double rho = 1e-2;        // finite-difference step
  bool richardson = true;   // combine rho and rho/2 estimates
};

// d/drho J(u + rho v) at rho = 0.  v: m x (n_steps+1), zero initial
// segment.  Analytic mode evaluates the first-order expansion of the cost
// along the variational processes; finite-difference mode uses pathwise
// paired differences.
McEstimate gateaux(const DelaySystem& sys, const ControlProcess& u,
                   const Eigen::MatrixXd& v, const BrownianEnsemble& noise,
                   const GateauxOptions& opt = {});

struct DirectionVerdict {
  double derivative = 0.0;
  double std_error = 0.0;
  bool violated = false;
};

struct ViReport {
  bool pass = true;
  std::vector<DirectionVerdict> directions;
};

// First-order optimality: for a Minimize instance every admissible
// direction must satisfy dJ >= -stat_mult * SE; for Maximize, <= +.
ViReport variational_inequality_check(const DelaySystem& sys,
                                      const ControlProcess& u,
                                      const std::vector<Eigen::MatrixXd>& dirs,
                                      const BrownianEnsemble& noise,
                                      double stat_mult = 3.0,
                                      const GateauxOptions& opt = {});

// Deterministic direction bank: piecewise-smooth seeded directions with
// zero initial segment, sup-normalized.
std::vector<Eigen::MatrixXd> direction_bank(const TimeGrid& grid, int m,
                                            int count, std::uint64_t seed);

}  // namespace emd
