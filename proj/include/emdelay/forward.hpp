// SPDX-License-Identifier: MIT
//
// Euler-Maruyama forward simulation of the delay system (left-point Ito
// convention throughout: drift/diffusion frozen at the left endpoint,
// ds-memories by left rectangles, dW-memories by left-point sums), plus the
// Picard fixed-point solver that exhibits the contraction structure of the
// well-posedness argument.

#pragma once

#include <vector>

#include "emdelay/system.hpp"

namespace emd {

struct NoConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// All processes sampled on the grid, one path.  Columns are grid points.
struct StateTrajectory {
  Eigen::MatrixXd x, y, z, kappa;      // n x (n_steps+1)
  Eigen::MatrixXd u, mu, nu, lambda;   // m x (n_steps+1)
  void resize(int n, int m, int n_points);
};

// Precomputes coefficient tables and kernel strategies once; run_path is
// then allocation-light and reusable across paths and control perturbations.
class ForwardSimulator {
 public:
  ForwardSimulator(const DelaySystem& sys, const ControlProcess& control);

  // dw: n_steps increments of one path.
  void run_path(const double* dw, StateTrajectory& out) const;

  const DelaySystem& system() const { return *sys_; }
  const ControlProcess& control() const { return *control_; }

 private:
  void run_path_scalar(const double* dw, StateTrajectory& out) const;
  void run_path_generic(const double* dw, StateTrajectory& out) const;

  const DelaySystem* sys_;
  const ControlProcess* control_;
  bool scalar_fast_ = false;
  // Scalar linear tables, index k = 0..n_steps.
  struct ScalarTab {
    std::vector<double> x, y, z, kappa, u, mu, nu, lambda, affine;
  };
  ScalarTab b_, s_;
  std::vector<double> u_init_;   // varsigma(t_k - delta) for k < delay_steps
  std::vector<double> xi_init_;  // xi(t_k - delta) for k <= delay_steps
};

// Memory-sum helper shared by the forward, variational and SVIE schemes.
// Accumulates m(t_k) = sum_{j<k} kernel(t_k,t_j) * v_j * w_j where w_j is dt
// (ds-memory) or dW_j (dW-memory).  O(1) updates for Zero/Constant/
// Exponential, O(k) row recomputation otherwise.
class MemoryAccumulator {
 public:
  MemoryAccumulator() = default;
  MemoryAccumulator(const KernelSpec* kernel, const TimeGrid* grid, int dim);
  void reset();
  // Value at t_k given that push() was called for j = 0..k-1.
  const Eigen::VectorXd& value(int k);
  // Record v_j with weight w_j (call after reading value(j)).
  void push(int j, const Eigen::VectorXd& v, double w);

 private:
  enum class Kind { Zero, Constant, Exponential, Generic } kind_ = Kind::Zero;
  const KernelSpec* kernel_ = nullptr;
  const TimeGrid* grid_ = nullptr;
  double c_ = 0.0, decay_ = 1.0;
  Eigen::VectorXd acc_;
  Eigen::MatrixXd hist_;              // dim x k, generic only
  std::vector<double> weights_;       // generic only
  int pushed_ = 0;
};

std::vector<StateTrajectory> simulate(const DelaySystem& sys,
                                      const ControlProcess& control,
                                      const BrownianEnsemble& noise);

struct PicardOptions {
  int max_iter = 50;
  double tol = 1e-10;
  double L = 1.0;        // user-supplied Lipschitz constant
  double L_hat = 1.0;    // delay change-of-variable constant
  double L_bar = -1.0;   // diffusion Lipschitz constant; -1 => use L
};

struct PicardReport {
  double beta = 0.0;               // weight exponent from the proof recipe
  std::vector<double> gaps;        // successive weighted-L2 gaps
  bool converged = false;
  int iterations = 0;
  std::vector<double> ratios() const;  // gaps[i+1]/gaps[i]
};

// Iterates the Picard map (all state arguments frozen at the previous
// iterate) until the weighted gap falls below tol; throws NoConvergence
// after max_iter.  The weighted norm is
//   gap^2 = mean_paths sum_k exp(-beta t_k) |x_new - x_old|^2(t_k) dt
// with beta = 16 L^2 (1 + L_hat + 2 L_bar^2 T) + 1.
PicardReport picard_solve(const DelaySystem& sys,
                          const ControlProcess& control,
                          const BrownianEnsemble& noise,
                          const PicardOptions& opt = {},
                          std::vector<StateTrajectory>* out = nullptr);

}  // namespace emd
