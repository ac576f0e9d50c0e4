// SPDX-License-Identifier: MIT

#include "emdelay/system.hpp"

#include <cmath>

namespace emd {

TimeMat const_mat(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return nullptr;
  return [m](double) { return m; };
}

TimeMat const_scalar_mat(double v) {
  Eigen::MatrixXd m(1, 1);
  m(0, 0) = v;
  return [m](double) { return m; };
}

TimeMat scalar_mat(std::function<double(double)> f) {
  return [f = std::move(f)](double t) {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = f(t);
    return m;
  };
}

VectorCoefficient VectorCoefficient::linear(LinearCoeffs c) {
  VectorCoefficient v;
  v.linear_ = std::move(c);
  return v;
}

VectorCoefficient VectorCoefficient::callable(
    std::function<Eigen::VectorXd(const StateArgs&)> f) {
  VectorCoefficient v;
  v.fn_ = std::move(f);
  return v;
}

Eigen::VectorXd VectorCoefficient::eval(const StateArgs& a, int n) const {
  if (linear_) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < kNumArgs; ++i) {
      const Arg arg = static_cast<Arg>(i);
      const TimeMat& tm = linear_->term(arg);
      if (tm) out.noalias() += tm(a.t) * a.get(arg);
    }
    if (linear_->affine) out += linear_->affine(a.t);
    return out;
  }
  if (fn_) return fn_(a);
  return Eigen::VectorXd::Zero(n);
}

Eigen::MatrixXd VectorCoefficient::deriv(Arg which, const StateArgs& a,
                                         int n) const {
  const int dim = static_cast<int>(a.get(which).size());
  if (linear_) {
    const TimeMat& tm = linear_->term(which);
    if (tm) return tm(a.t);
    return Eigen::MatrixXd::Zero(n, dim);
  }
  if (!fn_) return Eigen::MatrixXd::Zero(n, dim);
  // Central finite differences, h = 1e-4 * (1 + |component|).
  Eigen::MatrixXd jac(n, dim);
  StateArgs work = a;
  Eigen::VectorXd& v = work.get(which);
  for (int j = 0; j < dim; ++j) {
    const double orig = v(j);
    const double h = 1e-4 * (1.0 + std::abs(orig));
    v(j) = orig + h;
    const Eigen::VectorXd fp = fn_(work);
    v(j) = orig - h;
    const Eigen::VectorXd fm = fn_(work);
    v(j) = orig;
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

ScalarCoefficient ScalarCoefficient::zero() {
  // The zero map is linear; advertising that keeps deterministic instances on
  // the resolvent solvers.
  return linear(LinearCoeffs{});
}

ScalarCoefficient ScalarCoefficient::linear(LinearCoeffs rows) {
  ScalarCoefficient s;
  s.linear_ = std::move(rows);
  return s;
}

ScalarCoefficient ScalarCoefficient::callable(
    std::function<double(const StateArgs&)> f,
    std::function<Eigen::RowVectorXd(Arg, const StateArgs&)> grad) {
  ScalarCoefficient s;
  s.fn_ = std::move(f);
  s.grad_ = std::move(grad);
  return s;
}

double ScalarCoefficient::eval(const StateArgs& a) const {
  if (linear_) {
    double out = 0.0;
    for (int i = 0; i < kNumArgs; ++i) {
      const Arg arg = static_cast<Arg>(i);
      const TimeMat& tm = linear_->term(arg);
      if (tm) out += (tm(a.t) * a.get(arg)).value();
    }
    if (linear_->affine) out += linear_->affine(a.t).value();
    return out;
  }
  if (fn_) return fn_(a);
  return 0.0;
}

Eigen::RowVectorXd ScalarCoefficient::grad(Arg which, const StateArgs& a,
                                           int dim) const {
  if (linear_) {
    const TimeMat& tm = linear_->term(which);
    if (tm) return tm(a.t);
    return Eigen::RowVectorXd::Zero(dim);
  }
  if (grad_) return grad_(which, a);
  if (!fn_) return Eigen::RowVectorXd::Zero(dim);
  Eigen::RowVectorXd g(dim);
  StateArgs work = a;
  Eigen::VectorXd& v = work.get(which);
  for (int j = 0; j < dim; ++j) {
    const double orig = v(j);
    const double h = 1e-4 * (1.0 + std::abs(orig));
    v(j) = orig + h;
    const double fp = fn_(work);
    v(j) = orig - h;
    const double fm = fn_(work);
    v(j) = orig;
    g(j) = (fp - fm) / (2.0 * h);
  }
  return g;
}

TerminalCost TerminalCost::zero() { return TerminalCost(); }

TerminalCost TerminalCost::linear(Eigen::RowVectorXd hx, Eigen::RowVectorXd hy,
                                  Eigen::RowVectorXd hz,
                                  Eigen::RowVectorXd hk) {
  TerminalCost t;
  t.linear_ = true;
  t.hx_ = std::move(hx);
  t.hy_ = std::move(hy);
  t.hz_ = std::move(hz);
  t.hk_ = std::move(hk);
  return t;
}

TerminalCost TerminalCost::callable(
    std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&,
                         const Eigen::VectorXd&, const Eigen::VectorXd&)> f,
    std::function<Eigen::RowVectorXd(Arg, const Eigen::VectorXd&,
                                     const Eigen::VectorXd&,
                                     const Eigen::VectorXd&,
                                     const Eigen::VectorXd&)> grad) {
  TerminalCost t;
  t.fn_ = std::move(f);
  t.grad_ = std::move(grad);
  return t;
}

double TerminalCost::eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& z,
                          const Eigen::VectorXd& kappa) const {
  if (linear_) {
    double out = 0.0;
    if (hx_.size()) out += hx_.dot(x);
    if (hy_.size()) out += hy_.dot(y);
    if (hz_.size()) out += hz_.dot(z);
    if (hk_.size()) out += hk_.dot(kappa);
    return out;
  }
  if (fn_) return fn_(x, y, z, kappa);
  return 0.0;
}

Eigen::RowVectorXd TerminalCost::grad(Arg which, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& z,
                                      const Eigen::VectorXd& kappa) const {
  const int dim = static_cast<int>(x.size());
  if (linear_) {
    switch (which) {
      case Arg::X: return hx_.size() ? hx_ : Eigen::RowVectorXd::Zero(dim);
      case Arg::Y: return hy_.size() ? hy_ : Eigen::RowVectorXd::Zero(dim);
      case Arg::Z: return hz_.size() ? hz_ : Eigen::RowVectorXd::Zero(dim);
      case Arg::Kappa:
        return hk_.size() ? hk_ : Eigen::RowVectorXd::Zero(dim);
      default: return Eigen::RowVectorXd::Zero(dim);
    }
  }
  if (grad_) return grad_(which, x, y, z, kappa);
  if (!fn_) return Eigen::RowVectorXd::Zero(dim);
  Eigen::RowVectorXd g(dim);
  Eigen::VectorXd xx = x, yy = y, zz = z, kk = kappa;
  Eigen::VectorXd* tgt = &xx;
  if (which == Arg::Y) tgt = &yy;
  if (which == Arg::Z) tgt = &zz;
  if (which == Arg::Kappa) tgt = &kk;
  for (int j = 0; j < dim; ++j) {
    const double orig = (*tgt)(j);
    const double h = 1e-4 * (1.0 + std::abs(orig));
    (*tgt)(j) = orig + h;
    const double fp = fn_(xx, yy, zz, kk);
    (*tgt)(j) = orig - h;
    const double fm = fn_(xx, yy, zz, kk);
    (*tgt)(j) = orig;
    g(j) = (fp - fm) / (2.0 * h);
  }
  return g;
}

ControlProcess ControlProcess::open_loop(Eigen::MatrixXd values,
                                         TimeVec initial) {
  ControlProcess c;
  c.m_ = static_cast<int>(values.rows());
  c.values_ = std::move(values);
  c.initial_ = std::move(initial);
  return c;
}

ControlProcess ControlProcess::constant(double v, const TimeGrid& g, int m) {
  Eigen::MatrixXd vals = Eigen::MatrixXd::Constant(m, g.n_points(), v);
  Eigen::VectorXd iv = Eigen::VectorXd::Constant(m, v);
  return open_loop(std::move(vals), [iv](double) { return iv; });
}

ControlProcess ControlProcess::from_function(
    std::function<double(double)> f, const TimeGrid& g,
    std::function<double(double)> initial) {
  Eigen::MatrixXd vals(1, g.n_points());
  for (int k = 0; k < g.n_points(); ++k) vals(0, k) = f(g.time(k));
  TimeVec init = nullptr;
  if (initial) {
    init = [initial](double t) {
      Eigen::VectorXd v(1);
      v(0) = initial(t);
      return v;
    };
  }
  return open_loop(std::move(vals), std::move(init));
}

ControlProcess ControlProcess::adapted(AdaptedFn f, TimeVec initial, int m) {
  ControlProcess c;
  c.m_ = m;
  c.adapted_ = std::move(f);
  c.initial_ = std::move(initial);
  return c;
}

Eigen::VectorXd ControlProcess::at(int k, const double* w, int len) const {
  if (adapted_) return adapted_(k, w, len);
  return values_.col(k);
}

Eigen::VectorXd ControlProcess::initial(double t) const {
  if (initial_) return initial_(t);
  return Eigen::VectorXd::Zero(m_);
}

ControlProcess ControlProcess::perturbed(const Eigen::MatrixXd& v,
                                         double rho) const {
  ControlProcess c = *this;
  c.values_ = values_ + rho * v;
  return c;
}

}  // namespace emd
