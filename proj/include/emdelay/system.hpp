// SPDX-License-Identifier: MIT
//
// Problem data for the controlled delay system
//
//   dx(t) = b(t, x, y, z, kappa, u, mu, nu, lambda) dt
//         + sigma(t, x, y, z, kappa, u, mu, nu, lambda) dW(t)
//
// with the extended mixed-delay arguments
//   y(t)      = x(t - delta)                      (discrete state delay)
//   z(t)      = int_{t0}^t phi1(t,s) x(s) ds      (distributed state memory)
//   kappa(t)  = int_{t0}^t psi1(t,s) x(s) dW(s)   (noisy state memory)
//   mu(t)     = u(t - delta)                      (discrete control delay)
//   nu(t)     = int_{t0}^t phi2(t,s) u(s) ds
//   lambda(t) = int_{t0}^t psi2(t,s) u(s) dW(s)
// and initial paths x = xi, u = varsigma on [t0 - delta, t0].

#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "emdelay/grid.hpp"
#include "emdelay/kernels.hpp"

namespace emd {

enum class Arg { X, Y, Z, Kappa, U, Mu, Nu, Lambda };
inline constexpr int kNumArgs = 8;
inline bool is_state_arg(Arg a) { return static_cast<int>(a) < 4; }

struct StateArgs {
  double t = 0.0;
  Eigen::VectorXd x, y, z, kappa;      // n-dimensional
  Eigen::VectorXd u, mu, nu, lambda;   // m-dimensional

  const Eigen::VectorXd& get(Arg a) const {
    switch (a) {
      case Arg::X: return x;
      case Arg::Y: return y;
      case Arg::Z: return z;
      case Arg::Kappa: return kappa;
      case Arg::U: return u;
      case Arg::Mu: return mu;
      case Arg::Nu: return nu;
      case Arg::Lambda: return lambda;
    }
    return x;
  }
  Eigen::VectorXd& get(Arg a) {
    return const_cast<Eigen::VectorXd&>(
        static_cast<const StateArgs&>(*this).get(a));
  }
  void resize(int n, int m) {
    x.setZero(n); y.setZero(n); z.setZero(n); kappa.setZero(n);
    u.setZero(m); mu.setZero(m); nu.setZero(m); lambda.setZero(m);
  }
};

// Deterministic time-dependent matrix; nullptr-like when absent (=> zero).
using TimeMat = std::function<Eigen::MatrixXd(double)>;
using TimeVec = std::function<Eigen::VectorXd(double)>;

// b(t, args) = Ax(t) x + Ay(t) y + Az(t) z + Ak(t) kappa
//            + Bu(t) u + Bmu(t) mu + Bnu(t) nu + Bl(t) lambda + a0(t)
struct LinearCoeffs {
  TimeMat x, y, z, kappa;       // n x n
  TimeMat u, mu, nu, lambda;    // n x m
  TimeVec affine;               // n

  const TimeMat& term(Arg a) const {
    switch (a) {
      case Arg::X: return x;
      case Arg::Y: return y;
      case Arg::Z: return z;
      case Arg::Kappa: return kappa;
      case Arg::U: return u;
      case Arg::Mu: return mu;
      case Arg::Nu: return nu;
      case Arg::Lambda: return lambda;
    }
    return x;
  }
};

// Helper: constant-matrix TimeMat (empty matrix => absent/zero).
TimeMat const_mat(const Eigen::MatrixXd& m);
TimeMat const_scalar_mat(double v);  // 1x1 convenience
TimeMat scalar_mat(std::function<double(double)> f);  // 1x1, time dependent

// Drift or diffusion coefficient: linear-with-derivatives, or a general
// callable differentiated by central finite differences with step
// h = 1e-4 * (1 + |component|).
class VectorCoefficient {
 public:
  VectorCoefficient() = default;

  static VectorCoefficient linear(LinearCoeffs c);
  static VectorCoefficient callable(
      std::function<Eigen::VectorXd(const StateArgs&)> f);

  bool is_linear() const { return linear_.has_value(); }
  const LinearCoeffs& linear_coeffs() const { return *linear_; }

  Eigen::VectorXd eval(const StateArgs& a, int n) const;
  // Jacobian with respect to one argument; n rows, dim(arg) columns.
  Eigen::MatrixXd deriv(Arg which, const StateArgs& a, int n) const;

 private:
  std::optional<LinearCoeffs> linear_;
  std::function<Eigen::VectorXd(const StateArgs&)> fn_;
};

// Running cost l(t, args) -> scalar, with gradients (row vectors).
class ScalarCoefficient {
 public:
  ScalarCoefficient() = default;

  static ScalarCoefficient zero();
  // l = Lx(t) x + ... + Ll(t) lambda  with 1 x dim row-vector weights.
  static ScalarCoefficient linear(LinearCoeffs rows);
  static ScalarCoefficient callable(
      std::function<double(const StateArgs&)> f,
      std::function<Eigen::RowVectorXd(Arg, const StateArgs&)> grad = nullptr);

  double eval(const StateArgs& a) const;
  Eigen::RowVectorXd grad(Arg which, const StateArgs& a, int dim) const;
  bool is_linear() const { return linear_.has_value(); }
  const LinearCoeffs& linear_rows() const { return *linear_; }

 private:
  std::optional<LinearCoeffs> linear_;
  std::function<double(const StateArgs&)> fn_;
  std::function<Eigen::RowVectorXd(Arg, const StateArgs&)> grad_;
};

// Terminal cost h(x(T), y(T), z(T), kappa(T)) -> scalar.
class TerminalCost {
 public:
  TerminalCost() = default;

  static TerminalCost zero();
  // h = hx x + hy y + hz z + hk kappa (row vectors).
  static TerminalCost linear(Eigen::RowVectorXd hx, Eigen::RowVectorXd hy,
                             Eigen::RowVectorXd hz, Eigen::RowVectorXd hk);
  static TerminalCost callable(
      std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&,
                           const Eigen::VectorXd&, const Eigen::VectorXd&)> f,
      std::function<Eigen::RowVectorXd(Arg, const Eigen::VectorXd&,
                                       const Eigen::VectorXd&,
                                       const Eigen::VectorXd&,
                                       const Eigen::VectorXd&)> grad = nullptr);

  double eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
              const Eigen::VectorXd& z, const Eigen::VectorXd& kappa) const;
  // which must be a state argument.
  Eigen::RowVectorXd grad(Arg which, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& kappa) const;
  bool is_linear() const { return linear_; }

 private:
  bool linear_ = false;
  Eigen::RowVectorXd hx_, hy_, hz_, hk_;
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&,
                       const Eigen::VectorXd&, const Eigen::VectorXd&)> fn_;
  std::function<Eigen::RowVectorXd(Arg, const Eigen::VectorXd&,
                                   const Eigen::VectorXd&,
                                   const Eigen::VectorXd&,
                                   const Eigen::VectorXd&)> grad_;
};

enum class Orientation { Minimize, Maximize };

struct DelaySystem {
  TimeGrid grid;
  int n = 1;  // state dimension
  int m = 1;  // control dimension

  VectorCoefficient drift;
  VectorCoefficient diffusion;
  ScalarCoefficient running_cost;
  TerminalCost terminal_cost;

  KernelSpec phi1, psi1;  // state memory kernels
  KernelSpec phi2, psi2;  // control memory kernels

  TimeVec xi;  // initial state path on [t0 - delta, t0]

  Orientation orientation = Orientation::Minimize;
};

// Open-loop values by default; an optional adapted feedback callback makes
// adaptedness hold by construction: at step k the callback only ever sees
// W(t_0..t_k).
class ControlProcess {
 public:
  using AdaptedFn =
      std::function<Eigen::VectorXd(int k, const double* w, int len)>;

  ControlProcess() = default;

  // values: m x (n_steps + 1); initial = varsigma on [t0 - delta, t0).
  static ControlProcess open_loop(Eigen::MatrixXd values, TimeVec initial);
  static ControlProcess constant(double v, const TimeGrid& g, int m = 1);
  static ControlProcess from_function(std::function<double(double)> f,
                                      const TimeGrid& g,
                                      std::function<double(double)> initial);
  static ControlProcess adapted(AdaptedFn f, TimeVec initial, int m = 1);

  bool is_open_loop() const { return !adapted_; }
  int dim() const { return m_; }
  const Eigen::MatrixXd& values() const { return values_; }
  Eigen::MatrixXd& mutable_values() { return values_; }

  // Value at grid index k (k >= 0).  w = W(t_0..t_k) for adapted controls.
  Eigen::VectorXd at(int k, const double* w, int len) const;
  // Initial-segment value at time t in [t0 - delta, t0).
  Eigen::VectorXd initial(double t) const;

  // u + rho * v for open-loop controls (shared initial segment).
  ControlProcess perturbed(const Eigen::MatrixXd& v, double rho) const;

 private:
  int m_ = 1;
  Eigen::MatrixXd values_;
  AdaptedFn adapted_;
  TimeVec initial_;
};

}  // namespace emd
