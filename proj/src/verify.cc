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

#include "mirnn/verify.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>

#include "json.hpp"
#include "mirnn/bptt.h"
#include "mirnn/oracles.h"
#include "mirnn/tensor.h"

namespace mirnn {
namespace {

constexpr size_t kVocab = 5;
constexpr size_t kSteps = 4;

void fill_uniform(std::span<double> values, Rng& rng, double lo, double hi) {
  for (double& v : values) v = rng.uniform(lo, hi);
}

Model random_model(CellFamily family, IntegrationMode mode, Activation act,
                   size_t hidden, Rng& rng) {
  Model m;
  CellInit init{UniformRange::Symmetric(0.5), UniformRange::Symmetric(0.5), {}};
  m.cell = init_cell(family, mode, act, hidden, kVocab, init, rng);
  for (MIParams& p : m.cell.blocks) {
    fill_uniform(p.b.span(), rng, -0.5, 0.5);
    fill_uniform(p.alpha.span(), rng, 0.5, 1.5);
    fill_uniform(p.beta1.span(), rng, 0.5, 1.5);
    fill_uniform(p.beta2.span(), rng, 0.5, 1.5);
  }
  m.readout.V = sample_matrix(rng, UniformRange::Symmetric(0.5), kVocab, hidden);
  m.readout.c = sample_vector(rng, UniformRange::Symmetric(0.5), kVocab);
  return m;
}

CellState random_state(CellFamily family, size_t hidden, Rng& rng) {
  CellState s = CellState::Zeros(family, hidden);
  fill_uniform(s.h.span(), rng, -0.5, 0.5);
  fill_uniform(s.c.span(), rng, -0.5, 0.5);
  return s;
}

std::vector<int> random_symbols(Rng& rng, size_t n, size_t alphabet) {
  std::vector<int> out(n);
  for (int& s : out) s = static_cast<int>(rng.below(alphabet));
  return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::string describe(CellFamily family, IntegrationMode mode) {
  return std::string(to_string(family)) + "/" + std::string(to_string(mode));
}

}  // namespace

void CheckResult::record(uint64_t seed, double error, std::string detail) {
  ++instances;
  if (std::isnan(error) || error > max_error) max_error = error;
  if (!(error <= tolerance)) failures.push_back({seed, error, std::move(detail)});
}

InstanceResult check_bptt_gradients(CellFamily family, IntegrationMode mode,
                                    uint64_t seed,
                                    const StepBackwardFn& step_backward) {
  Rng rng(seed);
  const size_t hidden = 3 + rng.below(6);
  Model model = random_model(family, mode, Activation::kTanh, hidden, rng);
  const CellState h0 = random_state(family, hidden, rng);
  const std::vector<int> inputs = random_symbols(rng, kSteps, kVocab);
  const std::vector<int> targets = random_symbols(rng, kSteps, kVocab);

  Model grads = Model::ZerosLike(model);
  BackwardOptions options;
  options.step_backward = step_backward;
  backward_through_time(model, unroll_forward(model, inputs, h0), targets,
                        options, grads);

  auto params = model.tensors();
  auto numeric = finite_diff_grad(
      [&] { return loss_bpc(unroll_forward(model, inputs, h0), targets).nll_nats; },
      params);
  const auto analytic = static_cast<const Model&>(grads).tensors();
  const double err = max_relative_error(analytic, numeric, kGradientErrorFloor);
  return {seed, err, describe(family, mode) + " cell, hidden " + std::to_string(hidden)};
}

InstanceResult check_degeneracy(CellFamily family, uint64_t seed) {
  Rng rng(seed);
  const size_t hidden = 3 + rng.below(6);
  Model additive =
      random_model(family, IntegrationMode::kAdditive, Activation::kTanh, hidden, rng);
  Model general = Model::ZerosLike(additive);
  general.cell = CellParams::Zeros(family, IntegrationMode::kMiGeneral,
                                   Activation::kTanh, hidden, kVocab);
  general.readout = additive.readout;
  for (size_t k = 0; k < additive.cell.blocks.size(); ++k) {
    const MIParams& a = additive.cell.blocks[k];
    MIParams& g = general.cell.blocks[k];
    g.W = a.W;
    g.U = a.U;
    g.b = a.b;
    g.alpha.fill(0.0);
    g.beta1.fill(1.0);
    g.beta2.fill(1.0);
  }
  const CellState h0 = random_state(family, hidden, rng);
  const std::vector<int> inputs = random_symbols(rng, kSteps, kVocab);
  const std::vector<int> targets = random_symbols(rng, kSteps, kVocab);

  const UnrollRecord ra = unroll_forward(additive, inputs, h0);
  const UnrollRecord rg = unroll_forward(general, inputs, h0);
  double err = 0.0;
  for (size_t t = 0; t < ra.states.size(); ++t) {
    err = std::max(err, max_abs_diff(ra.states[t].h.span(), rg.states[t].h.span()));
    err = std::max(err, max_abs_diff(ra.states[t].c.span(), rg.states[t].c.span()));
  }
  for (size_t t = 0; t < ra.logits.size(); ++t)
    err = std::max(err, max_abs_diff(ra.logits[t].span(), rg.logits[t].span()));

  Model ga = Model::ZerosLike(additive);
  Model gg = Model::ZerosLike(general);
  const BackwardResult ba = backward_through_time(additive, ra, targets, {}, ga);
  const BackwardResult bg = backward_through_time(general, rg, targets, {}, gg);
  for (size_t t = 0; t < ba.d_h.size(); ++t)
    err = std::max(err, max_abs_diff(ba.d_h[t].span(), bg.d_h[t].span()));
  for (size_t k = 0; k < ga.cell.blocks.size(); ++k) {
    const MIParams& a = ga.cell.blocks[k];
    const MIParams& g = gg.cell.blocks[k];
    err = std::max(err, max_abs_diff(a.W.span(), g.W.span()));
    err = std::max(err, max_abs_diff(a.U.span(), g.U.span()));
    err = std::max(err, max_abs_diff(a.b.span(), g.b.span()));
  }
  err = std::max(err, max_abs_diff(ga.readout.V.span(), gg.readout.V.span()));
  err = std::max(err, max_abs_diff(ga.readout.c.span(), gg.readout.c.span()));
  return {seed, err, std::string(to_string(family)) + " cell, hidden " +
                         std::to_string(hidden)};
}

InstanceResult check_hmm_equivalence(uint64_t seed) {
  Rng rng(seed);
  const size_t states = 1 + rng.below(4);
  const size_t symbols = 1 + rng.below(5);
  const size_t steps = 1 + rng.below(10);
  const HMMSpec spec = HMMSpec::Random(rng, states, symbols);
  const std::vector<int> obs = random_symbols(rng, steps, symbols);

  const auto alphas = hmm_forward(spec, obs);
  const auto hidden = mi_rnn_as_hmm(spec, obs);
  double err = 0.0;
  for (size_t t = 0; t < alphas.size(); ++t)
    err = std::max(err, max_abs_diff(alphas[t].span(), hidden[t].span()));
  const double paths = hmm_bruteforce(spec, obs);
  err = std::max(err, std::abs(hmm_likelihood(alphas) - paths));
  double rnn_sum = 0.0;
  for (double v : hidden.back().span()) rnn_sum += v;
  err = std::max(err, std::abs(rnn_sum - paths));
  return {seed, err,
          std::to_string(states) + " states, " + std::to_string(symbols) +
              " symbols, T=" + std::to_string(steps)};
}

InstanceResult check_second_order(uint64_t seed) {
  Rng rng(seed);
  const size_t out = 1 + rng.below(6);
  const size_t in = 1 + rng.below(6);
  const size_t rec = 1 + rng.below(6);
  const UniformRange r = UniformRange::Symmetric(1.0);
  MIParams p = MIParams::Zeros(IntegrationMode::kMiGeneral, out, in, rec);
  p.W = sample_matrix(rng, r, out, in);
  p.U = sample_matrix(rng, r, out, rec);
  p.alpha = sample_vector(rng, r, out);
  const Vector x = sample_vector(rng, r, in);
  const Vector h = sample_vector(rng, r, rec);

  const Vector mi = block_forward(p, Activation::kIdentity, Input::Dense(x), h).out;
  const Vector bilinear =
      bilinear_second_order(rank_one_tensor(p.alpha, p.W, p.U), x, h);
  const Vector conditioned =
      matvec(input_conditioned_transition(p.alpha, p.W, x, p.U), h);
  const double err = std::max(max_abs_diff(mi.span(), bilinear.span()),
                              max_abs_diff(mi.span(), conditioned.span()));
  return {seed, err,
          "out " + std::to_string(out) + ", in " + std::to_string(in) + ", rec " +
              std::to_string(rec)};
}

InstanceResult check_chain_identity(IntegrationMode mode, uint64_t seed) {
  constexpr size_t kChainSteps = 8;
  Rng rng(seed);
  const size_t hidden = 2 + rng.below(5);
  const Model model =
      random_model(CellFamily::kRnn, mode, Activation::kTanh, hidden, rng);
  const CellState h0 = random_state(CellFamily::kRnn, hidden, rng);
  const std::vector<int> inputs = random_symbols(rng, kChainSteps, kVocab);
  const std::vector<int> targets = random_symbols(rng, kChainSteps, kVocab);

  const UnrollRecord rec = unroll_forward(model, inputs, h0);
  Model grads = Model::ZerosLike(model);
  BackwardOptions options;
  options.scope = LossScope::kFinalStep;
  const BackwardResult res = backward_through_time(model, rec, targets, options, grads);
  double err = 0.0;
  for (size_t n = 1; n <= 5; ++n) {
    const Vector chained =
        matvec(jacobian_product(model.cell, rec, kChainSteps, kChainSteps - n),
               res.d_h[kChainSteps]);
    err = std::max(err, max_abs_diff(chained.span(), res.d_h[kChainSteps - n].span()));
  }
  return {seed, err, std::string(to_string(mode)) + " RNN, hidden " +
                         std::to_string(hidden)};
}

std::vector<CheckResult> run_verify(const VerifyOptions& options) {
  std::vector<CheckResult> checks;
  auto run = [&](std::string name, double tolerance, size_t count,
                 const std::function<InstanceResult(uint64_t)>& instance) {
    CheckResult check{std::move(name), tolerance, 0, 0.0, {}};
    for (size_t k = 0; k < count; ++k) {
      const uint64_t seed = options.seed + k;
      InstanceResult r;
      try {
        r = instance(seed);
      } catch (const std::exception& e) {
        r = {seed, NAN, std::string("exception: ") + e.what()};
      }
      check.record(seed, r.error, r.detail);
    }
    checks.push_back(std::move(check));
  };

  const CellFamily families[] = {CellFamily::kRnn, CellFamily::kLstm, CellFamily::kGru};
  const IntegrationMode modes[] = {IntegrationMode::kAdditive,
                                   IntegrationMode::kMiSimple,
                                   IntegrationMode::kMiGeneral};
  for (CellFamily f : families)
    for (IntegrationMode m : modes)
      run("bptt_gradients/" + describe(f, m), kGradientTolerance,
          options.gradient_instances, [&](uint64_t s) {
            return check_bptt_gradients(f, m, s, options.step_backward);
          });
  for (CellFamily f : families)
    run("degeneracy/" + std::string(to_string(f)), kExactTolerance,
        options.degeneracy_instances,
        [&](uint64_t s) { return check_degeneracy(f, s); });
  run("hmm_equivalence", kExactTolerance, options.hmm_instances,
      check_hmm_equivalence);
  run("second_order", kExactTolerance, options.second_order_instances,
      check_second_order);
  for (IntegrationMode m : modes)
    run("chain_identity/" + std::string(to_string(m)), kChainTolerance,
        options.chain_instances, [&](uint64_t s) { return check_chain_identity(m, s); });
  return checks;
}

bool all_passed(const std::vector<CheckResult>& checks) {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.passed(); });
}

std::string verify_manifest(const std::vector<CheckResult>& checks,
                            uint64_t seed) {
  using Json = nlohmann::ordered_json;
  auto number = [](double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); };
  Json list = Json::array();
  for (const CheckResult& c : checks) {
    Json failures = Json::array();
    for (const auto& f : c.failures)
      failures.push_back({{"seed", f.seed}, {"error", number(f.error)}, {"detail", f.detail}});
    list.push_back({{"name", c.name},
                    {"passed", c.passed()},
                    {"instances", c.instances},
                    {"max_error", number(c.max_error)},
                    {"tolerance", c.tolerance},
                    {"failures", failures}});
  }
  Json j;
  j["format"] = "mirnn-verify";
  j["version"] = 1;
  j["seed"] = seed;
  j["passed"] = all_passed(checks);
  j["checks"] = list;
  return j.dump(2) + "\n";
}

}  // namespace mirnn
