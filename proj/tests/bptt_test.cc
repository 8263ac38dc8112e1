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

#include "mirnn/bptt.h"

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mirnn/errors.h"
#include "mirnn/oracles.h"
#include "test_util.h"

namespace mirnn {
namespace {

using testing::max_diff;
using testing::random_matrix;
using testing::random_vector;

constexpr IntegrationMode kModes[] = {IntegrationMode::kAdditive,
                                      IntegrationMode::kMiSimple,
                                      IntegrationMode::kMiGeneral};

Model random_model(Rng& rng, CellFamily family, IntegrationMode mode,
                   Activation act, size_t hidden, size_t vocab) {
  Model m;
  m.cell = init_cell(family, mode, act, hidden, vocab,
                     CellInit{UniformRange::Symmetric(0.6),
                              UniformRange::Symmetric(0.6), {}},
                     rng);
  for (MIParams& p : m.cell.blocks) {
    p.b = random_vector(rng, hidden, 0.3);
    if (mode == IntegrationMode::kMiGeneral) {
      p.alpha = random_vector(rng, hidden);
      p.beta1 = random_vector(rng, hidden);
      p.beta2 = random_vector(rng, hidden);
    }
  }
  m.readout.V = random_matrix(rng, vocab, hidden, 0.6);
  m.readout.c = random_vector(rng, vocab, 0.3);
  return m;
}

std::vector<int> random_symbols(Rng& rng, size_t n, size_t vocab) {
  std::vector<int> out(n);
  for (int& s : out) s = static_cast<int>(rng.below(vocab));
  return out;
}

// dC/dlogits for the softmax loss at one step.
Vector softmax_grad(const Vector& logits, int target) {
  double mx = logits[0];
  for (double v : logits.span()) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits.span()) z += std::exp(v - mx);
  Vector g(logits.size());
  for (size_t i = 0; i < g.size(); ++i) g[i] = std::exp(logits[i] - mx) / z;
  g[static_cast<size_t>(target)] -= 1.0;
  return g;
}

TEST_CASE("loss on uniform logits") {
  std::vector<Vector> logits(5, Vector(27));
  const std::vector<int> targets{0, 5, 9, 26, 13};
  const LossReport r = loss_bpc(logits, targets);
  CHECK(std::abs(r.bpc - std::log2(27.0)) <= 1e-10);
  CHECK(r.count == 5);
  CHECK(std::abs(r.nll_nats - 5 * std::log(27.0)) <= 1e-12);

  std::vector<Vector> coin(10, Vector{0.0, 0.0});
  const std::vector<int> flips{0, 1, 1, 0, 1, 0, 0, 0, 1, 1};
  CHECK(loss_bpc(coin, flips).bpc == 1.0);
}

TEST_CASE("loss of a confident correct prediction vanishes") {
  std::vector<Vector> logits{Vector{50.0, 0.0, 0.0}, Vector{0.0, 0.0, 50.0}};
  CHECK(loss_bpc(logits, std::vector<int>{0, 2}).bpc < 1e-12);
}

TEST_CASE("loss is invariant to shifting logits") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vector> logits, shifted;
    for (int t = 0; t < 6; ++t) {
      logits.push_back(random_vector(rng, 9, 5.0));
      const double s = rng.uniform(-100, 100);
      Vector v = logits.back();
      for (double& x : v.span()) x += s;
      shifted.push_back(v);
    }
    const auto targets = random_symbols(rng, 6, 9);
    CHECK(std::abs(loss_bpc(logits, targets).bpc - loss_bpc(shifted, targets).bpc) <=
          1e-12);
  }
}

TEST_CASE("loss validates targets") {
  std::vector<Vector> logits(2, Vector(3));
  CHECK_THROWS_AS(loss_bpc(logits, std::vector<int>{0}), InvalidArgument);
  CHECK_THROWS_AS(loss_bpc(logits, std::vector<int>{0, 3}), InvalidArgument);
}

TEST_CASE("merge combines counts and nats") {
  const LossReport a{2.0, 0.0, 4}, b{6.0, 0.0, 4};
  const LossReport m = merge(a, b);
  CHECK(m.count == 8);
  CHECK(m.nll_nats == 8.0);
  CHECK(m.bpc == doctest::Approx(1.0 / std::numbers::ln2));
}

TEST_CASE("zero readout gives T ln V nats") {
  Rng rng(42);
  Model m = random_model(rng, CellFamily::kLstm, IntegrationMode::kMiGeneral,
                         Activation::kTanh, 4, 7);
  m.readout.V.fill(0.0);
  m.readout.c.fill(0.0);
  const auto in = random_symbols(rng, 6, 7), tg = random_symbols(rng, 6, 7);
  const auto rec = unroll_forward(m, in, CellState::Zeros(CellFamily::kLstm, 4));
  CHECK(std::abs(loss_bpc(rec, tg).nll_nats - 6 * std::log(7.0)) <= 1e-12);
}

TEST_CASE("unroll equals sequential cell steps plus readout") {
  Rng rng(43);
  for (CellFamily f : {CellFamily::kRnn, CellFamily::kLstm, CellFamily::kGru}) {
    const Model m = random_model(rng, f, IntegrationMode::kMiGeneral, Activation::kTanh, 5, 6);
    const auto in = random_symbols(rng, 4, 6);
    CellState s = CellState::Zeros(f, 5);
    const auto rec = unroll_forward(m, in, s);
    REQUIRE(rec.states.size() == 5);
    REQUIRE(rec.steps() == 4);
    CHECK(rec.states[0] == s);
    for (size_t t = 0; t < 4; ++t) {
      s = cell_step(m.cell, Input::OneHot(in[t]), s);
      CHECK(rec.states[t + 1] == s);
      const Vector logits = add(matvec(m.readout.V, s.h), m.readout.c);
      CHECK(max_diff(rec.logits[t].span(), logits.span()) <= 1e-15);
    }
  }
}

TEST_CASE("single step gradients compose the readout and the cell backward") {
  Rng rng(44);
  const Model m = random_model(rng, CellFamily::kGru, IntegrationMode::kMiSimple,
                               Activation::kTanh, 4, 5);
  CellState h0{random_vector(rng, 4), {}};
  const std::vector<int> in{3}, tg{1};
  const auto rec = unroll_forward(m, in, h0);
  Model grads = Model::ZerosLike(m);
  backward_through_time(m, rec, tg, {}, grads);

  const Vector dl = softmax_grad(rec.logits[0], 1);
  Matrix dV(5, 4);
  add_outer(dV, dl, rec.states[1].h);
  CHECK(max_diff(grads.readout.V.span(), dV.span()) <= 1e-15);
  CHECK(max_diff(grads.readout.c.span(), dl.span()) <= 1e-15);
  CellParams cell_grads = CellParams::Zeros(CellFamily::kGru, IntegrationMode::kMiSimple,
                                            Activation::kTanh, 4, 5);
  cell_step_backward(m.cell, rec.caches[0], matvec_transposed(m.readout.V, dl), Vector(),
                     cell_grads);
  const auto a = static_cast<const CellParams&>(grads.cell).tensors();
  const auto b = static_cast<const CellParams&>(cell_grads).tensors();
  for (size_t k = 0; k < a.size(); ++k) CHECK(max_diff(a[k], b[k]) <= 1e-15);
}

TEST_CASE("bptt gradients match finite differences for every cell and mode") {
  Rng rng(45);
  for (CellFamily f : {CellFamily::kRnn, CellFamily::kLstm, CellFamily::kGru}) {
    for (IntegrationMode mode : kModes) {
      for (LossScope scope : {LossScope::kAllSteps, LossScope::kFinalStep}) {
        const size_t hidden = 3 + rng.below(6);
        Model m = random_model(rng, f, mode, Activation::kTanh, hidden, 5);
        CellState h0 = CellState::Zeros(f, hidden);
        h0.h = random_vector(rng, hidden, 0.5);
        if (f == CellFamily::kLstm) h0.c = random_vector(rng, hidden, 0.5);
        const auto in = random_symbols(rng, 4, 5), tg = random_symbols(rng, 4, 5);
        BackwardOptions options;
        options.scope = scope;
        Model grads = Model::ZerosLike(m);
        backward_through_time(m, unroll_forward(m, in, h0), tg, options, grads);
        auto loss = [&] {
          const auto rec = unroll_forward(m, in, h0);
          if (scope == LossScope::kAllSteps) return loss_bpc(rec, tg).nll_nats;
          return loss_bpc(std::span<const Vector>(rec.logits).last(1),
                          std::span<const int>(tg).last(1))
              .nll_nats;
        };
        INFO(to_string(f), "/", to_string(mode));
        CHECK(max_relative_error(static_cast<const Model&>(grads).tensors(),
                                 finite_diff_grad(loss, m.tensors()), 1e-3) <= 1e-6);
      }
    }
  }
}

TEST_CASE("backward accumulates into the gradient buffer") {
  Rng rng(46);
  const Model m = random_model(rng, CellFamily::kRnn, IntegrationMode::kMiGeneral,
                               Activation::kTanh, 4, 5);
  const auto in = random_symbols(rng, 4, 5), tg = random_symbols(rng, 4, 5);
  const auto rec = unroll_forward(m, in, CellState::Zeros(CellFamily::kRnn, 4));
  Model once = Model::ZerosLike(m), twice = Model::ZerosLike(m);
  backward_through_time(m, rec, tg, {}, once);
  backward_through_time(m, rec, tg, {}, twice);
  backward_through_time(m, rec, tg, {}, twice);
  const auto a = static_cast<const Model&>(once).tensors();
  const auto b = static_cast<const Model&>(twice).tensors();
  for (size_t k = 0; k < a.size(); ++k)
    for (size_t i = 0; i < a[k].size(); ++i)
      CHECK(b[k][i] == doctest::Approx(2.0 * a[k][i]).epsilon(1e-14));
}

TEST_CASE("linear MI chain equals the product of U^T diag(Wx) factors") {
  Rng rng(47);
  Model m = random_model(rng, CellFamily::kRnn, IntegrationMode::kMiSimple,
                         Activation::kIdentity, 4, 6);
  const auto in = random_symbols(rng, 7, 6), tg = random_symbols(rng, 7, 6);
  CellState h0{random_vector(rng, 4), {}};
  const auto rec = unroll_forward(m, in, h0);
  Model grads = Model::ZerosLike(m);
  BackwardOptions options;
  options.scope = LossScope::kFinalStep;
  const auto res = backward_through_time(m, rec, tg, options, grads);
  const MIParams& p = m.cell.blocks[0];
  Vector g = res.d_h[7];
  for (size_t n = 1; n <= 6; ++n) {
    const size_t t = 7 - n + 1;  // step whose factor is applied
    g = matvec_transposed(p.U, hadamard(column(p.W, in[t - 1]), g));
    CHECK(max_diff(g.span(), res.d_h[7 - n].span()) <= 1e-10);
  }
}

TEST_CASE("jacobian_product special cases") {
  Rng rng(48);
  const Model a = random_model(rng, CellFamily::kRnn, IntegrationMode::kAdditive,
                               Activation::kIdentity, 4, 5);
  const auto in = random_symbols(rng, 5, 5);
  const auto rec = unroll_forward(a, in, CellState::Zeros(CellFamily::kRnn, 4));
  const Matrix ut = transpose(a.cell.blocks[0].U);
  Matrix power = ut;
  for (size_t n = 1; n <= 5; ++n) {
    if (n > 1) power = matmul(power, ut);
    CHECK(max_diff(jacobian_product(a.cell, rec, 5, 5 - n).span(), power.span()) <= 1e-15);
  }
  CHECK(jacobian_product(a.cell, rec, 3, 2) == step_jacobian(a.cell, rec.caches[2]));
  CHECK_THROWS_AS(jacobian_product(a.cell, rec, 2, 2), InvalidArgument);
  CHECK_THROWS_AS(jacobian_product(a.cell, rec, 6, 2), InvalidArgument);

  // General mode with alpha = 0 and beta1 = 1 reproduces the additive chain.
  const Model t = random_model(rng, CellFamily::kRnn, IntegrationMode::kAdditive,
                               Activation::kTanh, 4, 5);
  Model g = t;
  g.cell = CellParams::Zeros(CellFamily::kRnn, IntegrationMode::kMiGeneral,
                             Activation::kTanh, 4, 5);
  g.cell.blocks[0].W = t.cell.blocks[0].W;
  g.cell.blocks[0].U = t.cell.blocks[0].U;
  g.cell.blocks[0].b = t.cell.blocks[0].b;
  g.cell.blocks[0].beta1.fill(1.0);
  g.cell.blocks[0].beta2.fill(1.0);
  const auto rt = unroll_forward(t, in, CellState::Zeros(CellFamily::kRnn, 4));
  const auto rg = unroll_forward(g, in, CellState::Zeros(CellFamily::kRnn, 4));
  CHECK(max_diff(jacobian_product(t.cell, rt, 5, 0).span(),
                 jacobian_product(g.cell, rg, 5, 0).span()) <= 1e-12);
}

TEST_CASE("chain products reproduce the backward pass") {
  Rng rng(49);
  for (IntegrationMode mode : kModes) {
    for (int trial = 0; trial < 5; ++trial) {
      const Model m = random_model(rng, CellFamily::kRnn, mode, Activation::kTanh, 5, 6);
      const auto in = random_symbols(rng, 9, 6), tg = random_symbols(rng, 9, 6);
      const auto rec = unroll_forward(m, in, CellState::Zeros(CellFamily::kRnn, 5));

      BackwardOptions final_only;
      final_only.scope = LossScope::kFinalStep;
      final_only.store_factors = true;
      Model grads = Model::ZerosLike(m);
      const auto res = backward_through_time(m, rec, tg, final_only, grads);
      for (size_t n = 1; n <= 5; ++n) {
        const Vector chained = matvec(jacobian_product(m.cell, rec, 9, 9 - n), res.d_h[9]);
        CHECK(max_diff(chained.span(), res.d_h[9 - n].span()) <= 1e-10);
      }
      REQUIRE(res.trace.factors.size() == 9);
      for (size_t t = 1; t <= 9; ++t)
        CHECK(max_diff(res.trace.factors[t - 1].span(),
                       step_jacobian(m.cell, rec.caches[t - 1]).span()) <= 1e-15);
      REQUIRE(res.trace.log_norms.size() == 10);
      for (size_t t = 0; t <= 9; ++t)
        CHECK(std::abs(res.trace.log_norms[t] - std::log(norm2(res.d_h[t]))) <= 1e-12);

      // Full loss: dC/dh_t is the sum over later steps s of the chain from
      // s back to t applied to the readout gradient at s.
      Model full_grads = Model::ZerosLike(m);
      const auto full = backward_through_time(m, rec, tg, {}, full_grads);
      for (size_t t = 0; t <= 9; ++t) {
        Vector sum(5);
        for (size_t s = std::max<size_t>(t, 1); s <= 9; ++s) {
          Vector direct = matvec_transposed(m.readout.V, softmax_grad(rec.logits[s - 1], tg[s - 1]));
          if (s > t) direct = matvec(jacobian_product(m.cell, rec, s, t), direct);
          sum = add(sum, direct);
        }
        CHECK(max_diff(sum.span(), full.d_h[t].span()) <= 1e-10);
      }
    }
  }
}

TEST_CASE("log-zero sentinel for an exactly zero gradient") {
  Rng rng(50);
  Model m = random_model(rng, CellFamily::kRnn, IntegrationMode::kAdditive,
                         Activation::kTanh, 3, 4);
  m.cell.blocks[0].U.fill(0.0);
  const auto in = random_symbols(rng, 3, 4), tg = random_symbols(rng, 3, 4);
  const auto rec = unroll_forward(m, in, CellState::Zeros(CellFamily::kRnn, 3));
  BackwardOptions options;
  options.scope = LossScope::kFinalStep;
  Model grads = Model::ZerosLike(m);
  const auto res = backward_through_time(m, rec, tg, options, grads);
  CHECK(res.trace.log_norms[3] > kLogZeroSentinel);
  CHECK(res.trace.log_norms[2] == kLogZeroSentinel);
  CHECK(res.trace.log_norms[0] == kLogZeroSentinel);
}

TEST_CASE("clip_global_norm") {
  Rng rng(51);
  Model g = random_model(rng, CellFamily::kRnn, IntegrationMode::kAdditive,
                         Activation::kTanh, 3, 4);
  const double n = global_norm(g);
  CHECK(clip_global_norm(g, 2 * n) == n);
  CHECK(global_norm(g) == doctest::Approx(n).epsilon(1e-15));
  CHECK(clip_global_norm(g, n / 4) == n);
  CHECK(global_norm(g) == doctest::Approx(n / 4).epsilon(1e-14));
}

}  // namespace
}  // namespace mirnn
