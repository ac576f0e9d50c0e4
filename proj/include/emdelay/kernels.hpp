// SPDX-License-Identifier: MIT
//
// Memory kernels k(t,s) on the triangle t0 <= s <= t <= T, and the two
// derived fields
//   E1(t,s) = int_s^t phi1(t,r) dr          (deterministic, lower triangular)
//   E2(t,s) = int_s^t psi1(t,r) dW(r)       (per path, left-point Ito sum)
// Kernels are scalar valued and act isotropically (value * identity) on
// vector states.

#pragma once

#include <Eigen/Core>
#include <memory>
#include <stdexcept>

#include "emdelay/grid.hpp"

namespace emd {

struct OutOfDomain : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class KernelForm { Zero, Constant, Exponential, Windowed, Tabulated };

// Two readings of the windowed-kernel indicator in t:
//   Shifted: 1_{[t0, t0+delta)}(t) + 1_{[t0+delta, T]}(t) * 1_{[t-delta, t)}(s)
//   Literal: 1_{[t0, t0+delta)}(t) + 1_{[t+delta, T]}(t)  * 1_{[t-delta, t)}(s)
// The literal second indicator is vacuous for delta > 0, so the kernel then
// lives only on t in [t0, t0+delta).
enum class WindowReading { Shifted, Literal };

class KernelSpec {
 public:
  KernelSpec() = default;  // Zero

  static KernelSpec zero();
  static KernelSpec constant(double c);
  static KernelSpec exponential(double c, double lambda);  // c*exp(lambda*(t-s))
  static KernelSpec windowed(KernelSpec base, double delta,
                             WindowReading reading = WindowReading::Shifted);
  // table(k, j) = k(t_k, t_j) on the (n_steps+1)^2 grid, lower triangle used.
  static KernelSpec tabulated(Eigen::MatrixXd table, TimeGrid grid);

  KernelForm form() const { return form_; }
  double c() const { return c_; }
  double lambda() const { return lambda_; }
  double window_delta() const { return window_delta_; }
  WindowReading reading() const { return reading_; }
  const KernelSpec* base() const { return base_.get(); }
  const Eigen::MatrixXd& table() const { return table_; }

  bool is_zero() const;
  // True when eval depends on (t,s) only through deterministic data (always,
  // for every supported form; kept for interface clarity).
  bool is_deterministic() const { return true; }

  // Evaluate k(t,s); throws OutOfDomain when s > t (+1e-12 slack) or when
  // [t,s] fall outside [t0, T].  t0/T are needed for Windowed and domain
  // checks.
  double eval(double t, double s, double t0, double T) const;

  // Grid-point evaluation: k(t_k, t_j), j <= k.
  double eval_grid(const TimeGrid& g, int k, int j) const;

 private:
  KernelForm form_ = KernelForm::Zero;
  double c_ = 0.0;
  double lambda_ = 0.0;
  double window_delta_ = 0.0;
  WindowReading reading_ = WindowReading::Shifted;
  std::shared_ptr<const KernelSpec> base_;
  Eigen::MatrixXd table_;
  TimeGrid table_grid_;
};

// E1(t_k, t_j) for all 0 <= j <= k <= n_steps, left-rectangle rule:
//   E1(t_k, t_j) = sum_{i=j}^{k-1} phi1(t_k, t_i) dt,   E1(t_k, t_k) = 0.
// For Constant(c) the left rule is exact: E1 = c*(t-s).
struct E1Field {
  Eigen::MatrixXd values;  // (n_steps+1) x (n_steps+1), lower triangular
  double operator()(int k, int j) const { return values(k, j); }
  // True when all strict-lower-triangle entries agree within tol; C receives
  // the common value (the constant-E1 regime of the anticipated solver).
  bool is_constant(double tol, double* C) const;
};

E1Field build_e1(const KernelSpec& phi1, const TimeGrid& grid);

// One t-row of E2 for one path:
//   row[j] = E2(t_k, t_j) = sum_{i=j}^{k-1} psi1(t_k, t_i) dW_i,  j = 0..k.
// Materialized a row at a time (backward recurrence, O(k)) so the full
// O(N^2) field never needs to be stored.
void build_e2_row(const KernelSpec& psi1, const TimeGrid& grid,
                  const double* dw_path, int k, std::vector<double>& row);

// Full per-path field (tests / small N only).
Eigen::MatrixXd build_e2_path(const KernelSpec& psi1, const TimeGrid& grid,
                              const double* dw_path);

}  // namespace emd
