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

#include "mirnn/optim.h"

#include <cmath>
#include <limits>

#include "doctest.h"
#include "mirnn/errors.h"

namespace mirnn {
namespace {

using Views = std::vector<std::span<double>>;
using ConstViews = std::vector<std::span<const double>>;

TEST_CASE("make_adam shapes moments and validates lr") {
  std::vector<double> a(3), b(5);
  const AdamState s = make_adam(Views{a, b}, 1e-3);
  CHECK(s.m.size() == 2);
  CHECK(s.v[1].size() == 5);
  CHECK(s.beta1 == 0.9);
  CHECK(s.beta2 == 0.999);
  CHECK(s.eps == 1e-8);
  CHECK_THROWS_AS(make_adam(Views{a}, 0.0), ConfigError);
  CHECK_THROWS_AS(make_adam(Views{a}, -1.0), ConfigError);
}

TEST_CASE("zero gradients leave parameters unchanged") {
  std::vector<double> p{1.0, -2.0, 3.0};
  const std::vector<double> g(3, 0.0);
  AdamState s = make_adam(Views{p}, 0.1);
  for (int i = 0; i < 100; ++i) adam_apply(s, Views{p}, ConstViews{g});
  CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
  CHECK(s.step == 100);
}

TEST_CASE("first step moves by lr against the gradient sign") {
  std::vector<double> p{0.0, 0.0, 0.0, 0.0};
  const std::vector<double> g{1.0, -1.0, 3.0, -0.25};
  AdamState s = make_adam(Views{p}, 1e-3);
  adam_apply(s, Views{p}, ConstViews{g});
  CHECK(p[0] == doctest::Approx(-1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
  for (size_t i = 0; i < 4; ++i) CHECK(std::signbit(p[i]) == !std::signbit(g[i]));
}

TEST_CASE("first step direction is invariant to gradient scale") {
  for (double c : {1e-3, 0.5, 7.0, 1e4}) {
    std::vector<double> p(3, 0.0), q(3, 0.0);
    const std::vector<double> g{0.3, -0.7, 0.01};
    std::vector<double> gc(3);
    for (size_t i = 0; i < 3; ++i) gc[i] = c * g[i];
    AdamState a = make_adam(Views{p}, 1e-2), b = make_adam(Views{q}, 1e-2);
    adam_apply(a, Views{p}, ConstViews{g});
    adam_apply(b, Views{q}, ConstViews{gc});
    for (size_t i = 0; i < 3; ++i) CHECK(std::signbit(p[i]) == std::signbit(q[i]));
  }
}

TEST_CASE("adam matches a hand-rolled reference over several steps") {
  std::vector<double> p{0.5, -0.5};
  AdamState s = make_adam(Views{p}, 0.01);
  double ref[2] = {0.5, -0.5}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 5; ++t) {
    const std::vector<double> g{ref[0] * 2.0, std::sin(ref[1])};
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      ref[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
    adam_apply(s, Views{p}, ConstViews{g});
    CHECK(p[0] == doctest::Approx(ref[0]).epsilon(1e-13));
    CHECK(p[1] == doctest::Approx(ref[1]).epsilon(1e-13));
  }
}

TEST_CASE("non-finite gradient raises before updating") {
  std::vector<double> p{1.0, 2.0};
  AdamState s = make_adam(Views{p}, 0.1);
  const std::vector<double> g{0.5, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(adam_apply(s, Views{p}, ConstViews{g}), DivergenceError);
  CHECK(p == std::vector<double>{1.0, 2.0});
  CHECK(s.step == 0);
  CHECK(s.m[0][0] == 0.0);
}

TEST_CASE("adam rejects mismatched shapes") {
  std::vector<double> p(2);
  AdamState s = make_adam(Views{p}, 0.1);
  const std::vector<double> g(3);
  CHECK_THROWS_AS(adam_apply(s, Views{p}, ConstViews{g}), InvalidArgument);
}

TEST_CASE("schedule: improving sequence keeps lr") {
  LrSchedule s;
  double lr = 1e-3;
  for (double bpc : {3.0, 2.5, 2.4, 2.0, 1.9}) CHECK_FALSE(schedule_step(s, bpc, lr));
  CHECK(lr == 1e-3);
}

TEST_CASE("schedule: flat sequence halves after the third epoch") {
  LrSchedule s;
  double lr = 1.0;
  CHECK_FALSE(schedule_step(s, 2.0, lr));
  CHECK_FALSE(schedule_step(s, 2.0, lr));
  CHECK(schedule_step(s, 2.0, lr));
  CHECK(lr == 0.5);
}

TEST_CASE("schedule: regression after improvement") {
  LrSchedule s;
  double lr = 1.0;
  CHECK_FALSE(schedule_step(s, 2.0, lr));
  CHECK_FALSE(schedule_step(s, 1.9, lr));
  CHECK_FALSE(schedule_step(s, 2.5, lr));
  CHECK(schedule_step(s, 2.5, lr));
  CHECK(lr == 0.5);
  CHECK(s.halvings == 1);
}

TEST_CASE("schedule: repeated halvings are exact") {
  LrSchedule s;
  double lr = 0.75;
  CHECK_FALSE(schedule_step(s, 1.0, lr));
  for (int k = 1; k <= 10; ++k) {
    CHECK_FALSE(schedule_step(s, 1.0, lr));
    CHECK(schedule_step(s, 1.0, lr));
    CHECK(lr == std::ldexp(0.75, -k));
  }
  CHECK(s.halvings == 10);
  CHECK_THROWS_AS(schedule_step(s, std::numeric_limits<double>::infinity(), lr),
                  InvalidArgument);
}

}  // namespace
}  // namespace mirnn
