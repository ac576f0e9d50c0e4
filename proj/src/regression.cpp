// SPDX-License-Identifier: MIT

#include "emdelay/regression.hpp"

#include <vector>

namespace emd {

namespace {

// Enumerate exponent multi-indices of total degree <= degree over f features.
void enumerate(int f, int degree, std::vector<int>& cur,
               std::vector<std::vector<int>>& out) {
  if (static_cast<int>(cur.size()) == f) {
    out.push_back(cur);
    return;
  }
  int used = 0;
  for (int e : cur) used += e;
  for (int e = 0; e <= degree - used; ++e) {
    cur.push_back(e);
    enumerate(f, degree, cur, out);
    cur.pop_back();
  }
}

}  // namespace

Eigen::MatrixXd poly_design(const Eigen::MatrixXd& features, int degree) {
  const int rows = static_cast<int>(features.rows());
  const int f = static_cast<int>(features.cols());
  std::vector<std::vector<int>> exps;
  std::vector<int> cur;
  enumerate(f, degree, cur, exps);
  Eigen::MatrixXd A(rows, static_cast<int>(exps.size()));
  for (std::size_t c = 0; c < exps.size(); ++c) {
    Eigen::VectorXd col = Eigen::VectorXd::Ones(rows);
    for (int j = 0; j < f; ++j) {
      for (int e = 0; e < exps[c][j]; ++e) col.array() *= features.col(j).array();
    }
    A.col(static_cast<int>(c)) = col;
  }
  return A;
}

PolyFit regress_fit(const Eigen::MatrixXd& features,
                    const Eigen::MatrixXd& targets,
                    const RegressionOptions& opt) {
  const Eigen::MatrixXd A = poly_design(features, opt.degree);
  Eigen::MatrixXd G = A.transpose() * A;
  const double scale = G.trace() / G.cols();
  G.diagonal().array() += opt.ridge * (scale > 0 ? scale : 1.0);
  PolyFit fit;
  fit.degree = opt.degree;
  fit.coeffs = G.ldlt().solve(A.transpose() * targets);
  return fit;
}

Eigen::MatrixXd PolyFit::predict(const Eigen::MatrixXd& features) const {
  return poly_design(features, degree) * coeffs;
}

Eigen::MatrixXd regress_fitted(const Eigen::MatrixXd& features,
                               const Eigen::MatrixXd& targets,
                               const RegressionOptions& opt) {
  return regress_fit(features, targets, opt).predict(features);
}

}  // namespace emd
