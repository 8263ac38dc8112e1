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

#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "mirnn/errors.h"
#include "test_util.h"

namespace mirnn {
namespace {

using testing::max_diff;
using testing::random_matrix;
using testing::random_vector;

TEST_CASE("matvec small cases") {
  CHECK(matvec(Matrix::Identity(3), Vector{1, 2, 3}) == Vector{1, 2, 3});
  CHECK(matvec(Matrix(2, 2), Vector{5, 7}) == Vector{0, 0});
  CHECK(matvec(Matrix{{1, 2}, {3, 4}}, Vector{1, 1}) == Vector{3, 7});
}

TEST_CASE("matvec rejects mismatched shapes") {
  CHECK_THROWS_AS(matvec(Matrix(2, 3), Vector{1, 2}), InvalidArgument);
  CHECK_THROWS_AS(matvec_transposed(Matrix(2, 3), Vector{1, 2, 3}),
                  InvalidArgument);
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), InvalidArgument);
}

TEST_CASE("matvec distributes over vector addition") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t r = 1 + rng.below(9), c = 1 + rng.below(9);
    const Matrix m = random_matrix(rng, r, c);
    const Vector a = random_vector(rng, c), b = random_vector(rng, c);
    const Vector lhs = matvec(m, add(a, b));
    const Vector rhs = add(matvec(m, a), matvec(m, b));
    CHECK(max_diff(lhs.span(), rhs.span()) <= 1e-12);
  }
}

TEST_CASE("transposed products agree with explicit transposes") {
  Rng rng(8);
  const Matrix m = random_matrix(rng, 4, 6);
  const Vector v = random_vector(rng, 4);
  CHECK(max_diff(matvec_transposed(m, v).span(),
                 matvec(transpose(m), v).span()) <= 1e-15);
  const Matrix a = random_matrix(rng, 3, 4), b = random_matrix(rng, 4, 5);
  const Matrix ab = matmul(a, b);
  for (size_t i = 0; i < 3; ++i)
    for (size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (size_t k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      CHECK(ab(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("hadamard small cases and algebra") {
  CHECK(hadamard(Vector{1, 1, 1}, Vector{4, 5, 6}) == Vector{4, 5, 6});
  CHECK(hadamard(Vector{0, 0}, Vector{9, 9}) == Vector{0, 0});
  CHECK(hadamard(Vector{2, 3}, Vector{3, 2}) == Vector{6, 6});
  CHECK_THROWS_AS(hadamard(Vector{1}, Vector{1, 2}), InvalidArgument);

  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t n = 1 + rng.below(16);
    const Vector a = random_vector(rng, n), b = random_vector(rng, n),
                 c = random_vector(rng, n);
    CHECK(max_diff(hadamard(a, b).span(), hadamard(b, a).span()) <= 1e-15);
    CHECK(max_diff(hadamard(hadamard(a, b), c).span(),
                   hadamard(a, hadamard(b, c)).span()) <= 1e-15);
  }
}

TEST_CASE("column selection equals multiplying by a one-hot vector") {
  Rng rng(10);
  const Matrix m = random_matrix(rng, 5, 4);
  for (size_t j = 0; j < 4; ++j) {
    Vector e(4);
    e[j] = 1.0;
    CHECK(column(m, j) == matvec(m, e));
  }
  CHECK_THROWS_AS(column(m, 4), InvalidArgument);
}

TEST_CASE("add_to_column matches a rank-one update with a one-hot vector") {
  Rng rng(11);
  Matrix a = random_matrix(rng, 3, 4);
  Matrix b = a;
  const Vector v = random_vector(rng, 3);
  Vector e(4);
  e[2] = 1.0;
  add_to_column(a, 2, v);
  add_outer(b, v, e);
  CHECK(a == b);
}

TEST_CASE("add_outer and axpy") {
  Matrix m(2, 3);
  add_outer(m, Vector{1, 2}, Vector{1, 0, -1}, 2.0);
  CHECK(m == Matrix{{2, 0, -2}, {4, 0, -4}});
  Vector y{1, 1};
  axpy(3.0, Vector{1, 2}, y);
  CHECK(y == Vector{4, 7});
  Matrix z(2, 3, 1.0);
  axpy(-1.0, Matrix(2, 3, 1.0), z);
  CHECK(z == Matrix(2, 3));
}

TEST_CASE("reductions") {
  CHECK(dot(Vector{1, 2, 3}.span(), Vector{4, 5, 6}.span()) == 32.0);
  CHECK(norm2(Vector{3, 4}) == 5.0);
  CHECK(max_abs(Vector{-7, 2}.span()) == 7.0);
  CHECK(all_finite(Vector{1, 2}.span()));
  CHECK_FALSE(all_finite(Vector{1, std::numeric_limits<double>::infinity()}.span()));
  CHECK_FALSE(all_finite(Vector{std::nan("")}.span()));
}

TEST_CASE("dot matches a naive sum on random lengths") {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const size_t n = rng.below(40);
    const Vector a = random_vector(rng, n), b = random_vector(rng, n);
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += a[i] * b[i];
    CHECK(dot(a.span(), b.span()) == doctest::Approx(s).epsilon(1e-13));
  }
}

TEST_CASE("non-finite products raise divergence") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(matvec(Matrix{{1.0, 1.0}}, Vector{inf, 0.0}), DivergenceError);
  CHECK_THROWS_AS(hadamard(Vector{inf}, Vector{0.0}), DivergenceError);
  CHECK_THROWS_AS(matvec(Matrix{{1e308, 1e308}}, Vector{10, 10}), DivergenceError);
}

TEST_CASE("matrix construction validates shapes") {
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), InvalidArgument);
  CHECK_THROWS_AS((Matrix{{1, 2}, {3}}), InvalidArgument);
  const Matrix m(2, 2, std::vector<double>{1, 2, 3, 4});
  CHECK(m(1, 0) == 3.0);
  CHECK(m.row(1)[1] == 4.0);
}

TEST_CASE("rng is deterministic and restorable") {
  Rng a(123), b(123), c(124);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const uint64_t x = a.next();
    CHECK(x == b.next());
    differs = differs || x != c.next();
  }
  CHECK(differs);
  Rng d = Rng::FromState(a.state());
  for (int i = 0; i < 10; ++i) CHECK(a.next() == d.next());
}

TEST_CASE("rng ranges") {
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    CHECK((u >= 0.0 && u < 1.0));
    const double v = rng.uniform(-0.02, 0.02);
    CHECK((v >= -0.02 && v < 0.02));
  }
  std::set<uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const uint64_t k = rng.below(7);
    CHECK(k < 7);
    seen.insert(k);
  }
  CHECK(seen.size() == 7);
  CHECK_THROWS_AS(rng.below(0), InvalidArgument);
}

TEST_CASE("sample_matrix") {
  CHECK_THROWS_AS(sample_matrix(RngConfig{42, {0.0, 0.0}}, 2, 2), ConfigError);
  CHECK_THROWS_AS(sample_matrix(RngConfig{42, {0.1, -0.1}}, 2, 2), ConfigError);
  const Matrix a = sample_matrix(RngConfig{42, {}}, 2, 2);
  const Matrix b = sample_matrix(RngConfig{42, {}}, 2, 2);
  const Matrix c = sample_matrix(RngConfig{43, {}}, 2, 2);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (double x : a.span()) CHECK((x >= -0.02 && x < 0.02));
  Rng rng(1);
  CHECK_THROWS_AS(sample_matrix(rng, UniformRange{}, 0, 3), InvalidArgument);
}

}  // namespace
}  // namespace mirnn
