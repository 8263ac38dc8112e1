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

// Dense 64-bit vectors and row-major matrices, plus the seeded sampler used
// for weight initialization. Sizes here are desk scale (a few thousand at
// most), so every kernel is a plain loop.

#ifndef MIRNN_TENSOR_H_
#define MIRNN_TENSOR_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace mirnn {

class Vector {
 public:
  Vector() = default;
  explicit Vector(size_t size, double value = 0.0) : data_(size, value) {}
  explicit Vector(std::vector<double> data) : data_(std::move(data)) {}
  Vector(std::initializer_list<double> values) : data_(values) {}

  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](size_t i) { return data_[i]; }
  double operator[](size_t i) const { return data_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  void fill(double value);

  bool operator==(const Vector& other) const = default;

 private:
  std::vector<double> data_;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}
  // Takes ownership of row-major |data|; throws InvalidArgument on a size
  // mismatch.
  Matrix(size_t rows, size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix Identity(size_t n);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  double& operator()(size_t i, size_t j) { return data_[i * cols_ + j]; }
  double operator()(size_t i, size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }

  void fill(double value);

  bool operator==(const Matrix& other) const = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

// result[i] = sum_j m(i, j) * v[j].
Vector matvec(const Matrix& m, const Vector& v);
// result[j] = sum_i m(i, j) * v[i], i.e. m^T v without forming m^T.
Vector matvec_transposed(const Matrix& m, const Vector& v);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
// Column |j| of |m|; this is m * e_j for a one-hot e_j.
Vector column(const Matrix& m, size_t j);

Vector hadamard(const Vector& a, const Vector& b);
Vector add(const Vector& a, const Vector& b);
Vector subtract(const Vector& a, const Vector& b);
Vector scale(const Vector& a, double s);

// y += a * x.
void axpy(double a, const Vector& x, Vector& y);
void axpy(double a, const Matrix& x, Matrix& y);
// m += s * u v^T.
void add_outer(Matrix& m, const Vector& u, const Vector& v, double s = 1.0);
// m(:, j) += v.
void add_to_column(Matrix& m, size_t j, const Vector& v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(const Vector& v);
double max_abs(std::span<const double> values);
bool all_finite(std::span<const double> values);

// xoshiro256** seeded through splitmix64. The full state is exposed so that
// checkpoints can resume a stream exactly.
class Rng {
 public:
  using State = std::array<uint64_t, 4>;

  explicit Rng(uint64_t seed);
  static Rng FromState(const State& state);

  uint64_t next();
  // Uniform in [0, 1) with 53 random bits.
  double uniform01();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  uint64_t below(uint64_t n);

  const State& state() const { return state_; }

 private:
  Rng() = default;
  State state_{};
};

struct UniformRange {
  double lo = -0.02;
  double hi = 0.02;

  // Symmetric range [-r, r).
  static UniformRange Symmetric(double r) { return {-r, r}; }
};

struct RngConfig {
  uint64_t seed = 0;
  UniformRange range;
};

// Throws ConfigError unless lo < hi.
void validate_range(const UniformRange& range);

Matrix sample_matrix(const RngConfig& rng, size_t rows, size_t cols);
Matrix sample_matrix(Rng& rng, const UniformRange& range, size_t rows,
                     size_t cols);
Vector sample_vector(Rng& rng, const UniformRange& range, size_t size);

}  // namespace mirnn

#endif  // MIRNN_TENSOR_H_
