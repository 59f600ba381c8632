/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace tempex {

using Shape = std::vector<std::size_t>;

/// Dense row-major tensor of doubles. Rank 1 is a vector, rank 2 a matrix.
///
/// Every constructor and public op rejects non-finite values with
/// ErrorCode::NonFiniteValue, so a Tensor that exists is always finite.
/// Mutable access through data() is for parameter owners (the optimizer);
/// callers that write through it are responsible for keeping values finite.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  /// Rows/cols of a matrix; a vector reports rows() == length, cols() == 1.
  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const noexcept { return shape_.size() < 2 ? 1 : shape_[1]; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> data() noexcept { return values_; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }

  double squared_norm() const noexcept;
  bool all_finite() const noexcept;
  void fill(double v) noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matvec(const Tensor& a, const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
/// Concatenates rank-1 tensors.
Tensor concat(std::initializer_list<const Tensor*> parts);
Tensor concat(const Tensor& a, const Tensor& b);
double inner(const Tensor& a, const Tensor& b);
double inner(std::span<const double> a, std::span<const double> b);

double sigmoid(double x) noexcept;

/// Raises NonFiniteValue if any value is NaN or infinite.
void require_finite(std::span<const double> values, const char* where);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.

struct ValueAndGradient {
  double value = 0.0;
  std::vector<double> gradient;
};

using DifferentiableFn = std::function<ValueAndGradient(std::span<const double>)>;

struct GradCheckOptions {
  double step = 1e-5;
  /// Number of coordinates to probe; 0 probes every coordinate.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

/// Largest |analytic - central difference| / max(1, |analytic|) over the
/// probed coordinates of theta.
double grad_check(const DifferentiableFn& f, std::span<const double> theta,
                  const GradCheckOptions& options = {});

}  // namespace tempex
