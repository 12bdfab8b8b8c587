// Copyright 2026 The lgdgcn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "lgd/error.hpp"

namespace lgd {

/// Dense row-major f64 matrix; the single numeric container of the library.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

inline std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

/// In-place lower Cholesky of a symmetric matrix. Returns the index of the
/// first non-positive-definite leading minor, or -1 on success.
inline Index cholesky_lower(const Mat& a, Mat& l) {
  const Index n = a.rows();
  l = Mat::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) {
      double s = a(i, j);
      for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      if (i == j) {
        if (s <= 0.0 || !std::isfinite(s)) return i;
        l(i, i) = std::sqrt(s);
      } else {
        l(i, j) = s / l(j, j);
      }
    }
  }
  return -1;
}

/// Symmetric positive-definite matrix with its cached Cholesky factor and
/// log-determinant. Built once, then used for Mahalanobis solves.
struct SpdFactor {
  Mat matrix;    // the (ridged) SPD matrix itself
  Mat cholesky;  // lower triangular, matrix = L L^T
  double log_det = 0.0;

  static SpdFactor from(const Mat& sym, double ridge = 0.0) {
    if (sym.rows() != sym.cols())
      throw ShapeError("SpdFactor: matrix must be square, got " + shape_str(sym));
    SpdFactor f;
    f.matrix = 0.5 * (sym + Mat(sym.transpose()));
    if (ridge != 0.0) f.matrix += ridge * Mat::Identity(sym.rows(), sym.cols());
    Index bad = cholesky_lower(f.matrix, f.cholesky);
    if (bad >= 0)
      throw NumericalError("SpdFactor: Cholesky failed at leading minor " +
                           std::to_string(bad + 1));
    f.log_det = 2.0 * f.cholesky.diagonal().array().log().sum();
    return f;
  }

  Index dim() const { return matrix.rows(); }

  /// Solves matrix * X = B (i.e. X = Sigma^{-1} B) via two triangular solves.
  Mat solve(const Mat& b) const {
    Mat y = cholesky.triangularView<Eigen::Lower>().solve(b);
    return cholesky.transpose().triangularView<Eigen::Upper>().solve(y);
  }

  /// Inverse, used where a full Sigma^{-1} is cheaper than repeated solves.
  Mat inverse() const { return solve(Mat::Identity(dim(), dim())); }
};

}  // namespace lgd
