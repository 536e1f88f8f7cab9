// Copyright 2026 The GraphMERT KG Authors.
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

// Dense building blocks with explicit backward passes. Everything runs in
// double precision so analytic gradients can be checked against finite
// differences.

#pragma once

#include <cmath>

#include <Eigen/Dense>

namespace graphmert {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }
inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
}

// Exact GELU, x * Phi(x).
inline double gelu(double x) { return x * normal_cdf(x); }
inline double gelu_grad(double x) { return normal_cdf(x) + x * normal_pdf(x); }

inline Matrix gelu(const Matrix& x) { return x.unaryExpr([](double v) { return gelu(v); }); }

inline Matrix gelu_backward(const Matrix& x, const Matrix& dy) {
  return dy.cwiseProduct(x.unaryExpr([](double v) { return gelu_grad(v); }));
}

inline double leaky_relu(double x, double slope) { return x >= 0.0 ? x : slope * x; }
inline double leaky_relu_grad(double x, double slope) { return x >= 0.0 ? 1.0 : slope; }

// y = x * w + b, with b a 1 x out row.
inline Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

inline Matrix linear_backward(const Matrix& x, const Matrix& w, const Matrix& dy,
                              Matrix& dw, Matrix& db) {
  dw.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
  return dy * w.transpose();
}

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  Matrix xhat;
  Vector inv_std;
};

inline Matrix layer_norm(const Matrix& x, const Matrix& gamma, const Matrix& beta,
                         LayerNormCache* cache) {
  const Eigen::Index n = x.rows(), h = x.cols();
  Matrix xhat(n, h);
  Vector inv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    inv(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = (x.row(i).array() - mean) * inv(i);
  }
  Matrix y = xhat.array().rowwise() * gamma.row(0).array();
  y.rowwise() += beta.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
  }
  return y;
}

inline Matrix layer_norm_backward(const Matrix& dy, const Matrix& gamma,
                                  const LayerNormCache& c, Matrix& dgamma,
                                  Matrix& dbeta) {
  const Eigen::Index n = dy.rows(), h = dy.cols();
  dgamma.row(0) += dy.cwiseProduct(c.xhat).colwise().sum();
  dbeta.row(0) += dy.colwise().sum();
  Matrix dxhat = dy.array().rowwise() * gamma.row(0).array();
  Matrix dx(n, h);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s1 = dxhat.row(i).sum();
    const double s2 = dxhat.row(i).dot(c.xhat.row(i));
    dx.row(i) = (c.inv_std(i) / static_cast<double>(h)) *
                (static_cast<double>(h) * dxhat.row(i).array() - s1 -
                 c.xhat.row(i).array() * s2);
  }
  return dx;
}

inline void softmax_rows_inplace(Matrix& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
}

// Gradient through a row softmax given its output `a`.
inline Matrix softmax_rows_backward(const Matrix& a, const Matrix& da) {
  Matrix ds = a.cwiseProduct(da);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double dot = ds.row(i).sum();
    ds.row(i) -= a.row(i) * dot;
  }
  return ds;
}

}  // namespace graphmert
