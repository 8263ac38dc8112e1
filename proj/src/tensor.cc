// Copyright 2026 The MI-RNN Authors.
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

#include "mirnn/tensor.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "mirnn/errors.h"

namespace mirnn {
namespace {

void check_finite(std::span<const double> values, const char* op) {
  if (!all_finite(values)) {
    throw DivergenceError(std::string(op) + " produced a non-finite value");
  }
}

void check_same_size(size_t a, size_t b, const char* op) {
  if (a != b) {
    throw InvalidArgument(std::string(op) + ": length mismatch " +
                          std::to_string(a) + " vs " + std::to_string(b));
  }
}

uint64_t splitmix64(uint64_t& x) {
  uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

void Vector::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix::Matrix(size_t rows, size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidArgument("Matrix: data length " + std::to_string(data_.size()) +
                          " != " + std::to_string(rows_) + "x" +
                          std::to_string(cols_));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw InvalidArgument("Matrix: ragged rows");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::Identity(size_t n) {
  Matrix m(n, n);
  for (size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double dot(std::span<const double> a, std::span<const double> b) {
  check_same_size(a.size(), b.size(), "dot");
  // Four independent partial sums let the compiler keep the FMA pipes busy.
  double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  const size_t n = a.size();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

Vector matvec(const Matrix& m, const Vector& v) {
  if (m.cols() != v.size()) {
    throw InvalidArgument("matvec: matrix has " + std::to_string(m.cols()) +
                          " columns but vector has length " +
                          std::to_string(v.size()));
  }
  Vector out(m.rows());
  for (size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), v.span());
  check_finite(out.span(), "matvec");
  return out;
}

Vector matvec_transposed(const Matrix& m, const Vector& v) {
  if (m.rows() != v.size()) {
    throw InvalidArgument("matvec_transposed: matrix has " +
                          std::to_string(m.rows()) +
                          " rows but vector has length " +
                          std::to_string(v.size()));
  }
  Vector out(m.cols());
  double* o = out.data();
  for (size_t i = 0; i < m.rows(); ++i) {
    const double s = v[i];
    if (s == 0.0) continue;
    const double* r = m.row(i).data();
    for (size_t j = 0; j < m.cols(); ++j) o[j] += s * r[j];
  }
  check_finite(out.span(), "matvec_transposed");
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw InvalidArgument("matmul: inner dims differ");
  Matrix out(a.rows(), b.cols());
  for (size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    for (size_t k = 0; k < a.cols(); ++k) {
      const double s = a(i, k);
      const double* r = b.row(k).data();
      for (size_t j = 0; j < b.cols(); ++j) o[j] += s * r[j];
    }
  }
  check_finite(out.span(), "matmul");
  return out;
}

Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (size_t i = 0; i < m.rows(); ++i)
    for (size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Vector column(const Matrix& m, size_t j) {
  if (j >= m.cols()) {
    throw InvalidArgument("column: index " + std::to_string(j) +
                          " out of range for " + std::to_string(m.cols()) +
                          " columns");
  }
  Vector out(m.rows());
  for (size_t i = 0; i < m.rows(); ++i) out[i] = m(i, j);
  return out;
}

Vector hadamard(const Vector& a, const Vector& b) {
  check_same_size(a.size(), b.size(), "hadamard");
  Vector out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  check_finite(out.span(), "hadamard");
  return out;
}

Vector add(const Vector& a, const Vector& b) {
  check_same_size(a.size(), b.size(), "add");
  Vector out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vector subtract(const Vector& a, const Vector& b) {
  check_same_size(a.size(), b.size(), "subtract");
  Vector out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vector scale(const Vector& a, double s) {
  Vector out(a.size());
  for (size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

void axpy(double a, const Vector& x, Vector& y) {
  check_same_size(x.size(), y.size(), "axpy");
  for (size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

void axpy(double a, const Matrix& x, Matrix& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols())
    throw InvalidArgument("axpy: matrix shape mismatch");
  double* yd = y.data();
  const double* xd = x.data();
  for (size_t i = 0; i < x.size(); ++i) yd[i] += a * xd[i];
}

void add_outer(Matrix& m, const Vector& u, const Vector& v, double s) {
  if (m.rows() != u.size() || m.cols() != v.size())
    throw InvalidArgument("add_outer: shape mismatch");
  for (size_t i = 0; i < u.size(); ++i) {
    const double ui = s * u[i];
    if (ui == 0.0) continue;
    double* r = m.row(i).data();
    for (size_t j = 0; j < v.size(); ++j) r[j] += ui * v[j];
  }
}

void add_to_column(Matrix& m, size_t j, const Vector& v) {
  if (m.rows() != v.size() || j >= m.cols())
    throw InvalidArgument("add_to_column: shape mismatch");
  for (size_t i = 0; i < v.size(); ++i) m(i, j) += v[i];
}

double norm2(const Vector& v) { return std::sqrt(dot(v.span(), v.span())); }

double max_abs(std::span<const double> values) {
  double m = 0.0;
  for (double x : values) m = std::max(m, std::abs(x));
  return m;
}

bool all_finite(std::span<const double> values) {
  for (double x : values)
    if (!std::isfinite(x)) return false;
  return true;
}

Rng::Rng(uint64_t seed) {
  uint64_t x = seed;
  for (auto& s : state_) s = splitmix64(x);
}

Rng Rng::FromState(const State& state) {
  Rng rng;
  rng.state_ = state;
  return rng;
}

uint64_t Rng::next() {
  const uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform01() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  const double x = lo + (hi - lo) * uniform01();
  // Rounding can land exactly on hi; fold it back into the half-open range.
  return x < hi ? x : lo;
}

uint64_t Rng::below(uint64_t n) {
  if (n == 0) throw InvalidArgument("Rng::below: n must be positive");
  // Rejection sampling keeps the result unbiased.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % n;
}

void validate_range(const UniformRange& range) {
  if (!(range.lo < range.hi) || !std::isfinite(range.lo) ||
      !std::isfinite(range.hi)) {
    throw ConfigError("uniform range requires lo < hi, got [" +
                      std::to_string(range.lo) + ", " +
                      std::to_string(range.hi) + ")");
  }
}

Matrix sample_matrix(const RngConfig& config, size_t rows, size_t cols) {
  Rng rng(config.seed);
  return sample_matrix(rng, config.range, rows, cols);
}

Matrix sample_matrix(Rng& rng, const UniformRange& range, size_t rows,
                     size_t cols) {
  validate_range(range);
  if (rows == 0 || cols == 0)
    throw InvalidArgument("sample_matrix: rows and cols must be >= 1");
  Matrix m(rows, cols);
  for (double& x : m.span()) x = rng.uniform(range.lo, range.hi);
  return m;
}

Vector sample_vector(Rng& rng, const UniformRange& range, size_t size) {
  validate_range(range);
  Vector v(size);
  for (double& x : v.span()) x = rng.uniform(range.lo, range.hi);
  return v;
}

}  // namespace mirnn
