// SPDX-License-Identifier: MIT
//
// Linearization along a nominal pair, the variational (first-order) delay
// equation, and its delay-free Volterra (SVIE) transformation
//
//   X(t) = int_{t0}^t [A(t,s) X(s) + B(t,s)] ds
//        + int_{t0}^t [C(t,s) X(s) + D(t,s)] dW(s),
//
// where X = [xhat; yhat; zhat; khat] stacks four n-blocks and each block row
// i of A (resp. C) is the coefficient row [b_x b_y b_z b_kappa](s) (resp.
// sigma) scaled by the row weight
//   w_1 = 1,  w_2 = 1_{(delta,inf)}(t-s),  w_3 = E1(t,s),  w_4 = E2(t,s).
// B and D carry the control-perturbation forcing scaled by the same weights.

#pragma once

#include "emdelay/forward.hpp"

namespace emd {

// Deterministic coefficient processes of the variational equation, sampled
// on the grid (index k).  For linear systems these are the system matrices
// themselves; for callables they are central finite differences along the
// supplied nominal trajectory.
struct Linearization {
  TimeGrid grid;
  int n = 1, m = 1;
  std::vector<Eigen::MatrixXd> bx, by, bz, bk, sx, sy, sz, sk;      // n x n
  std::vector<Eigen::MatrixXd> bu, bmu, bnu, bl, su, smu, snu, sl;  // n x m
  std::vector<Eigen::RowVectorXd> lx, ly, lz, lk;                   // 1 x n
  std::vector<Eigen::RowVectorXd> lu, lmu, lnu, ll;                 // 1 x m
  Eigen::RowVectorXd hx, hy, hz, hk;  // terminal-cost gradients at T

  bool deterministic = true;  // tracked for the adjoint solvers
};

Linearization linearize(const DelaySystem& sys, const StateTrajectory& nominal);

// One path of the variational equation (3.2-style, Euler-Maruyama): the
// nominal trajectory supplies the linearization point step by step, so
// per-path (stochastic) linearizations are handled naturally.
struct VariationalPath {
  Eigen::MatrixXd xhat, yhat, zhat, khat;  // n x (n_steps+1)
  Eigen::MatrixXd vnu, vlam;               // m x (n_steps+1): v-memories
};

// v: m x (n_steps+1) open-loop direction values, zero initial segment.
VariationalPath simulate_variational(const DelaySystem& sys,
                                     const StateTrajectory& nominal,
                                     const Eigen::MatrixXd& v,
                                     const double* dw);

struct SvieOptions {
  // Strict reading 1_{(delta,inf)}(t-s) of the row-2 weight (default);
  // false uses 1_{[delta,inf)}.
  bool strict_delay_indicator = true;
};

struct SvieSystem {
  Linearization lin;
  KernelSpec phi1, psi1;
  KernelSpec phi2, psi2;
  E1Field e1;
  SvieOptions options;
};

SvieSystem assemble_svie(Linearization lin, const KernelSpec& phi1,
                         const KernelSpec& psi1, const KernelSpec& phi2,
                         const KernelSpec& psi2,
                         const SvieOptions& options = {});

// One path of the Volterra-Euler scheme (left-point sums throughout).
// X: 4n x (n_steps+1); phi(t) = int B ds + int D dW (the forcing-only
// response used by the duality principle), also 4n x (n_steps+1).
struct SviePath {
  Eigen::MatrixXd X;
  Eigen::MatrixXd phi;
};

SviePath simulate_svie(const SvieSystem& svie, const Eigen::MatrixXd& v,
                       const double* dw, bool with_phi = false);

// Taylor-expansion gap of the convex variation:
//   gap(rho) = mean_paths sup_k |(x^rho - x*)/rho - xhat|^2(t_k).
// Returns one gap per rho.
std::vector<double> expansion_gap(const DelaySystem& sys,
                                  const ControlProcess& u_star,
                                  const Eigen::MatrixXd& v,
                                  const BrownianEnsemble& noise,
                                  const std::vector<double>& rhos);

// L2 (over paths) discrepancy sup_k |X_1(t_k) - xhat(t_k)| between the
// Volterra-Euler first block and the direct variational Euler scheme.
double svie_equivalence_gap(const DelaySystem& sys,
                            const ControlProcess& u_star,
                            const Eigen::MatrixXd& v,
                            const BrownianEnsemble& noise,
                            const SvieOptions& options = {});

}  // namespace emd
