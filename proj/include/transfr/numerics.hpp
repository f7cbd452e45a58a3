// Copyright 2026 The transfr Authors
// SPDX-License-Identifier: Apache-2.0

// Dense row-major linear algebra and the small set of optimization kernels
// shared by the encoder, distillation and federated modules. Everything is
// 64-bit; sizes are desk-scale so the kernels favour clarity over speed.

#ifndef TRANSFR_NUMERICS_HPP_
#define TRANSFR_NUMERICS_HPP_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace transfr {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Matrix transpose() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Standard product. Throws ShapeError when a.cols != b.rows.
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T * b and a * b^T without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// Row vector times matrix: x (1 x n) * m (n x k).
Vector vecmat(std::span<const double> x, const Matrix& m);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

// Saturating logistic function. Always strictly inside (0, 1).
double sigmoid(double x);
// log(1 + exp(x)) without overflow.
double softplus(double x);

Matrix softmax_rows(const Matrix& m);

Vector sgd_step(std::span<const double> params, std::span<const double> grads,
                double lr);

using ScalarFn = std::function<double(const Vector&)>;

// Central differences, one coordinate at a time. This is the gradient oracle
// used by the test suites; it must stay independent of the analytic paths.
Vector finite_difference_gradient(const ScalarFn& f, const Vector& x,
                                  double h);

bool all_finite(std::span<const double> v);

// Max-abs entry of a - b.
double max_abs_diff(std::span<const double> a, std::span<const double> b);

// ||a - b|| / max(||a||, ||b||), the measure used by the gradient checks.
// Two zero vectors compare as 0.
double relative_error(std::span<const double> a, std::span<const double> b);

}  // namespace transfr

#endif  // TRANSFR_NUMERICS_HPP_
