// SPDX-License-Identifier: MIT
//
// Least-squares Monte Carlo (regression) utilities for conditional
// expectations E[target | F_t], in the Longstaff-Schwartz style: a
// polynomial basis in a small set of adapted features, ridge-regularized
// normal equations.

#pragma once

#include <Eigen/Dense>

namespace emd {

struct RegressionOptions {
  int degree = 3;
  double ridge = 1e-8;  // relative to trace(A^T A)/cols
};

// Total-degree monomial design matrix: rows = samples, columns = monomials
// of total degree <= degree in the feature columns (the constant term
// included).
Eigen::MatrixXd poly_design(const Eigen::MatrixXd& features, int degree);

// Fitted values of the regression of targets onto the basis (the LSMC
// estimate of E[target | features]).  targets may have several columns.
Eigen::MatrixXd regress_fitted(const Eigen::MatrixXd& features,
                               const Eigen::MatrixXd& targets,
                               const RegressionOptions& opt = {});

// Fit once, returning coefficients usable on other feature sets.
struct PolyFit {
  int degree = 3;
  Eigen::MatrixXd coeffs;  // basis x target-cols
  Eigen::MatrixXd predict(const Eigen::MatrixXd& features) const;
};

PolyFit regress_fit(const Eigen::MatrixXd& features,
                    const Eigen::MatrixXd& targets,
                    const RegressionOptions& opt = {});

}  // namespace emd
