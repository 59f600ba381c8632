/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "tempex/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "tempex/error.hpp"

namespace tempex {

namespace {

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::ShapeMismatch, std::string(op) + " " + shape_str(a) + " vs " + shape_str(b));
}

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  auto dst = out.data();
  auto src = a.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(product(shape_), fill) {
  require_finite(std::span<const double>(&fill, 1), "Tensor");
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != product(shape_)) {
    throw Error(ErrorCode::ShapeMismatch,
                "Tensor " + shape_str(shape_) + " given " + std::to_string(values_.size()) + " values");
  }
  require_finite(values_, "Tensor");
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n});
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

double Tensor::squared_norm() const noexcept {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) noexcept { std::fill(values_.begin(), values_.end(), v); }

void require_finite(std::span<const double> values, const char* where) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, where);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) mismatch("matmul", a.shape(), b.shape());
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a(i, p);
      for (std::size_t j = 0; j < m; ++j) out(i, j) += aip * b(p, j);
    }
  }
  require_finite(out.values(), "matmul");
  return out;
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  if (a.rank() != 2 || x.rank() != 1 || a.cols() != x.size()) mismatch("matvec", a.shape(), x.shape());
  Tensor out({a.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = inner(a.row(i), x.values());
  require_finite(out.values(), "matvec");
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("add", a.shape(), b.shape());
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  require_finite(out.values(), "add");
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("hadamard", a.shape(), b.shape());
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  require_finite(out.values(), "hadamard");
  return out;
}

double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }

Tensor sigmoid(const Tensor& a) { return map(a, [](double v) { return sigmoid(v); }); }

Tensor tanh(const Tensor& a) { return map(a, [](double v) { return std::tanh(v); }); }

Tensor concat(std::initializer_list<const Tensor*> parts) {
  std::vector<double> values;
  for (const Tensor* p : parts) {
    if (p->rank() != 1) mismatch("concat", p->shape(), Shape{});
    values.insert(values.end(), p->values().begin(), p->values().end());
  }
  return Tensor::vector(std::move(values));
}

Tensor concat(const Tensor& a, const Tensor& b) { return concat({&a, &b}); }

double inner(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) mismatch("inner", Shape{a.size()}, Shape{b.size()});
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inner(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("inner", a.shape(), b.shape());
  return inner(a.values(), b.values());
}

double grad_check(const DifferentiableFn& f, std::span<const double> theta, const GradCheckOptions& options) {
  if (!(options.step >= 1e-6 && options.step <= 1e-3)) {
    throw Error(ErrorCode::ConfigInvalid, "grad_check step must lie in [1e-6, 1e-3]");
  }
  std::vector<double> point(theta.begin(), theta.end());
  const ValueAndGradient base = f(point);
  if (base.gradient.size() != point.size()) {
    mismatch("grad_check", Shape{base.gradient.size()}, Shape{point.size()});
  }
  require_finite(std::span<const double>(&base.value, 1), "grad_check value");
  require_finite(base.gradient, "grad_check gradient");

  std::vector<std::size_t> coords(point.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coords != 0 && options.max_coords < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  double worst = 0.0;
  for (std::size_t k : coords) {
    const double saved = point[k];
    point[k] = saved + options.step;
    const double up = f(point).value;
    point[k] = saved - options.step;
    const double down = f(point).value;
    point[k] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    if (!std::isfinite(numeric)) throw Error(ErrorCode::NonFiniteValue, "grad_check central difference");
    const double analytic = base.gradient[k];
    worst = std::max(worst, std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic)));
  }
  return worst;
}

}  // namespace tempex
