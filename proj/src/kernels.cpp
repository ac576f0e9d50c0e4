// SPDX-License-Identifier: MIT

#include "emdelay/kernels.hpp"

#include <cmath>

namespace emd {

KernelSpec KernelSpec::zero() { return KernelSpec(); }

KernelSpec KernelSpec::constant(double c) {
  KernelSpec k;
  k.form_ = KernelForm::Constant;
  k.c_ = c;
  return k;
}

KernelSpec KernelSpec::exponential(double c, double lambda) {
  KernelSpec k;
  k.form_ = KernelForm::Exponential;
  k.c_ = c;
  k.lambda_ = lambda;
  return k;
}

KernelSpec KernelSpec::windowed(KernelSpec base, double delta,
                                WindowReading reading) {
  KernelSpec k;
  k.form_ = KernelForm::Windowed;
  k.window_delta_ = delta;
  k.reading_ = reading;
  k.base_ = std::make_shared<const KernelSpec>(std::move(base));
  return k;
}

KernelSpec KernelSpec::tabulated(Eigen::MatrixXd table, TimeGrid grid) {
  KernelSpec k;
  k.form_ = KernelForm::Tabulated;
  k.table_ = std::move(table);
  k.table_grid_ = grid;
  return k;
}

bool KernelSpec::is_zero() const {
  switch (form_) {
    case KernelForm::Zero:
      return true;
    case KernelForm::Constant:
    case KernelForm::Exponential:
      return c_ == 0.0;
    case KernelForm::Windowed:
      return base_->is_zero();
    case KernelForm::Tabulated:
      return table_.size() == 0 || table_.cwiseAbs().maxCoeff() == 0.0;
  }
  return false;
}

double KernelSpec::eval(double t, double s, double t0, double T) const {
  const double slack = 1e-12 * (1.0 + std::abs(T - t0));
  if (s > t + slack) {
    throw OutOfDomain("kernel eval: s=" + std::to_string(s) +
                      " > t=" + std::to_string(t));
  }
  if (s < t0 - slack || t > T + slack) {
    throw OutOfDomain("kernel eval: (t,s) outside [t0,T] triangle");
  }
  switch (form_) {
    case KernelForm::Zero:
      return 0.0;
    case KernelForm::Constant:
      return c_;
    case KernelForm::Exponential:
      return c_ * std::exp(lambda_ * (t - s));
    case KernelForm::Windowed: {
      const double d = window_delta_;
      double w = 0.0;
      if (t >= t0 && t < t0 + d) {
        w = 1.0;
      } else if (reading_ == WindowReading::Shifted) {
        if (t >= t0 + d && s >= t - d && s < t) w = 1.0;
      } else {  // Literal: 1_{[t+delta, T]}(t) is empty for d > 0
        if (d <= 0.0 && s >= t - d && s < t) w = 1.0;
      }
      return w == 0.0 ? 0.0 : base_->eval(t, s, t0, T);
    }
    case KernelForm::Tabulated: {
      const TimeGrid& g = table_grid_;
      const int k =
          static_cast<int>(std::llround((t - g.t0) / g.dt));
      const int j =
          static_cast<int>(std::llround((s - g.t0) / g.dt));
      if (k < 0 || k > g.n_steps || j < 0 || j > k) {
        throw OutOfDomain("tabulated kernel eval: off-grid (t,s)");
      }
      return table_(k, j);
    }
  }
  return 0.0;
}

double KernelSpec::eval_grid(const TimeGrid& g, int k, int j) const {
  return eval(g.time(k), g.time(j), g.t0, g.T);
}

bool E1Field::is_constant(double tol, double* C) const {
  const int n = static_cast<int>(values.rows()) - 1;
  bool have = false;
  double c0 = 0.0;
  for (int k = 1; k <= n; ++k) {
    for (int j = 0; j < k; ++j) {
      if (!have) {
        c0 = values(k, j);
        have = true;
      } else if (std::abs(values(k, j) - c0) > tol) {
        return false;
      }
    }
  }
  if (C) *C = have ? c0 : 0.0;
  return true;
}

E1Field build_e1(const KernelSpec& phi1, const TimeGrid& grid) {
  const int np = grid.n_points();
  E1Field f;
  f.values = Eigen::MatrixXd::Zero(np, np);
  if (phi1.is_zero()) return f;
  for (int k = 1; k < np; ++k) {
    // Backward prefix over the row: E1(t_k,t_j) = E1(t_k,t_{j+1}) +
    // phi1(t_k,t_j)*dt, exact for the left-rectangle rule.
    double acc = 0.0;
    for (int j = k - 1; j >= 0; --j) {
      acc += phi1.eval_grid(grid, k, j) * grid.dt;
      f.values(k, j) = acc;
    }
  }
  return f;
}

void build_e2_row(const KernelSpec& psi1, const TimeGrid& grid,
                  const double* dw_path, int k, std::vector<double>& row) {
  row.assign(static_cast<std::size_t>(k) + 1, 0.0);
  if (psi1.is_zero()) return;
  double acc = 0.0;
  for (int j = k - 1; j >= 0; --j) {
    acc += psi1.eval_grid(grid, k, j) * dw_path[j];
    row[j] = acc;
  }
}

Eigen::MatrixXd build_e2_path(const KernelSpec& psi1, const TimeGrid& grid,
                              const double* dw_path) {
  const int np = grid.n_points();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(np, np);
  std::vector<double> row;
  for (int k = 0; k < np; ++k) {
    build_e2_row(psi1, grid, dw_path, k, row);
    for (int j = 0; j <= k; ++j) m(k, j) = row[j];
  }
  return m;
}

}  // namespace emd
