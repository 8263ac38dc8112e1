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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mirnn/errors.h"

namespace mirnn {
namespace {

// Returns log(sum_j exp(logits[j])) and fills |probs| with the softmax.
double log_softmax_normalizer(const Vector& logits, Vector* probs) {
  size_t arg = 0;
  for (size_t j = 1; j < logits.size(); ++j)
    if (logits[j] > logits[arg]) arg = j;
  const double top = logits[arg];
  double rest = 0.0;
  for (size_t j = 0; j < logits.size(); ++j)
    if (j != arg) rest += std::exp(logits[j] - top);
  const double lse = top + std::log1p(rest);
  if (probs != nullptr) {
    *probs = Vector(logits.size());
    for (size_t j = 0; j < logits.size(); ++j)
      (*probs)[j] = std::exp(logits[j] - lse);
  }
  return lse;
}

void check_target(int target, size_t vocab) {
  if (target < 0 || static_cast<size_t>(target) >= vocab)
    throw InvalidArgument("target index " + std::to_string(target) +
                          " outside vocabulary of size " +
                          std::to_string(vocab));
}

}  // namespace

Model Model::ZerosLike(const Model& other) {
  Model m;
  m.cell = CellParams::Zeros(other.cell.family, other.cell.mode,
                             other.cell.activation, other.cell.hidden_size(),
                             other.cell.input_size());
  m.readout.V = Matrix(other.readout.V.rows(), other.readout.V.cols());
  m.readout.c = Vector(other.readout.c.size());
  return m;
}

size_t Model::parameter_count() const {
  return cell.parameter_count() + readout.V.size() + readout.c.size();
}

std::vector<std::span<double>> Model::tensors() {
  auto out = cell.tensors();
  out.push_back(readout.V.span());
  out.push_back(readout.c.span());
  return out;
}

std::vector<std::span<const double>> Model::tensors() const {
  auto out = cell.tensors();
  out.push_back(readout.V.span());
  out.push_back(readout.c.span());
  return out;
}

UnrollRecord unroll_forward(const Model& model, std::span<const int> inputs,
                            const CellState& h0) {
  if (inputs.empty())
    throw InvalidArgument("unroll_forward: sequence must have T >= 1");
  if (model.readout.V.cols() != model.cell.hidden_size() ||
      model.readout.V.rows() != model.readout.c.size())
    throw InvalidArgument("unroll_forward: readout does not map hidden size " +
                          std::to_string(model.cell.hidden_size()) +
                          " onto the vocabulary");
  UnrollRecord rec;
  rec.states.reserve(inputs.size() + 1);
  rec.caches.resize(inputs.size());
  rec.logits.reserve(inputs.size());
  rec.states.push_back(h0);
  for (size_t t = 0; t < inputs.size(); ++t) {
    if (inputs[t] < 0)
      throw InvalidArgument("unroll_forward: negative input symbol");
    rec.states.push_back(cell_step(model.cell,
                                   Input::OneHot(static_cast<size_t>(inputs[t])),
                                   rec.states.back(), &rec.caches[t]));
    Vector logits = matvec(model.readout.V, rec.states.back().h);
    axpy(1.0, model.readout.c, logits);
    rec.logits.push_back(std::move(logits));
  }
  return rec;
}

LossReport loss_bpc(std::span<const Vector> logits,
                    std::span<const int> targets) {
  if (logits.size() != targets.size())
    throw InvalidArgument("loss_bpc: " + std::to_string(targets.size()) +
                          " targets for " + std::to_string(logits.size()) +
                          " predictions");
  LossReport r;
  for (size_t t = 0; t < logits.size(); ++t) {
    check_target(targets[t], logits[t].size());
    r.nll_nats += log_softmax_normalizer(logits[t], nullptr) -
                  logits[t][static_cast<size_t>(targets[t])];
  }
  r.count = logits.size();
  r.bpc = r.count == 0 ? 0.0 : r.nll_nats / (r.count * std::numbers::ln2);
  return r;
}

LossReport loss_bpc(const UnrollRecord& record, std::span<const int> targets) {
  return loss_bpc(std::span<const Vector>(record.logits), targets);
}

LossReport merge(const LossReport& a, const LossReport& b) {
  LossReport r;
  r.nll_nats = a.nll_nats + b.nll_nats;
  r.count = a.count + b.count;
  r.bpc = r.count == 0 ? 0.0 : r.nll_nats / (r.count * std::numbers::ln2);
  return r;
}

BackwardResult backward_through_time(const Model& model,
                                     const UnrollRecord& record,
                                     std::span<const int> targets,
                                     const BackwardOptions& options,
                                     Model& grads) {
  const size_t steps = record.steps();
  if (steps == 0 || record.states.size() != steps + 1 ||
      record.logits.size() != steps)
    throw InvalidArgument("backward_through_time: incomplete unroll record");
  if (targets.size() != steps)
    throw InvalidArgument("backward_through_time: need one target per step");
  if (grads.readout.V.rows() != model.readout.V.rows() ||
      grads.readout.V.cols() != model.readout.V.cols() ||
      grads.cell.blocks.size() != model.cell.blocks.size())
    throw InvalidArgument("backward_through_time: gradient buffer mismatch");

  const size_t d = model.cell.hidden_size();
  const bool lstm = model.cell.family == CellFamily::kLstm;
  const StepBackwardFn& step_backward = options.step_backward;

  BackwardResult result;
  result.d_h.assign(steps + 1, Vector(d));
  const size_t first_scored =
      options.scope == LossScope::kFinalStep ? steps - 1 : 0;
  result.loss = loss_bpc(
      std::span<const Vector>(record.logits).subspan(first_scored),
      targets.subspan(first_scored));

  Vector d_c = lstm ? Vector(d) : Vector();
  for (size_t t = steps; t >= 1; --t) {
    Vector& d_h = result.d_h[t];
    if (t - 1 >= first_scored) {
      // Softmax cross-entropy: d logits = p - onehot(target).
      Vector d_logits;
      log_softmax_normalizer(record.logits[t - 1], &d_logits);
      d_logits[static_cast<size_t>(targets[t - 1])] -= 1.0;
      add_outer(grads.readout.V, d_logits, record.states[t].h);
      axpy(1.0, d_logits, grads.readout.c);
      axpy(1.0, matvec_transposed(model.readout.V, d_logits), d_h);
    }
    if (options.store_factors)
      result.trace.factors.push_back(
          step_jacobian(model.cell, record.caches[t - 1]));
    StepGrad g =
        step_backward
            ? step_backward(model.cell, record.caches[t - 1], d_h, d_c,
                            grads.cell)
            : cell_step_backward(model.cell, record.caches[t - 1], d_h, d_c,
                                 grads.cell);
    axpy(1.0, g.d_h_prev, result.d_h[t - 1]);
    if (lstm) d_c = std::move(g.d_c_prev);
  }
  if (options.store_factors)
    std::reverse(result.trace.factors.begin(), result.trace.factors.end());

  result.trace.log_norms.reserve(steps + 1);
  for (const Vector& g : result.d_h) {
    const double n = norm2(g);
    result.trace.log_norms.push_back(n > 0.0 ? std::log(n) : kLogZeroSentinel);
  }
  return result;
}

Matrix step_jacobian(const CellParams& cell, const StepCache& cache) {
  if (cell.family != CellFamily::kRnn || cache.family != CellFamily::kRnn)
    throw InvalidArgument(
        "step_jacobian: the factorized Jacobian is defined for RNN cells");
  const MIParams& p = cell.blocks.front();
  const BlockCache& b = cache.blocks.front();
  const size_t d = p.out_size();
  if (b.wx.size() != d || b.mode != p.mode)
    throw InvalidArgument("step_jacobian: cache does not match the cell");
  Vector gate(d);
  for (size_t i = 0; i < d; ++i) {
    double g = 1.0;
    switch (p.mode) {
      case IntegrationMode::kAdditive: g = 1.0; break;
      case IntegrationMode::kMiSimple: g = b.wx[i]; break;
      case IntegrationMode::kMiGeneral:
        g = p.alpha[i] * b.wx[i] + p.beta1[i];
        break;
    }
    gate[i] = g * activation_derivative(b.activation, b.out[i]);
  }
  // J = U^T diag(gate): J(j, i) = U(i, j) * gate[i].
  Matrix J(p.recurrent_size(), d);
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < p.recurrent_size(); ++j) J(j, i) = p.U(i, j) * gate[i];
  return J;
}

Matrix jacobian_product(const CellParams& cell, const UnrollRecord& record,
                        size_t from_t, size_t to_t) {
  if (!(to_t < from_t) || from_t > record.steps())
    throw InvalidArgument("jacobian_product: need to_t < from_t <= T, got to_t=" +
                          std::to_string(to_t) +
                          " from_t=" + std::to_string(from_t));
  Matrix product = step_jacobian(cell, record.caches[to_t]);
  for (size_t k = to_t + 2; k <= from_t; ++k)
    product = matmul(product, step_jacobian(cell, record.caches[k - 1]));
  return product;
}

double global_norm(const Model& grads) {
  double sq = 0.0;
  for (auto t : grads.tensors()) sq += dot(t, t);
  return std::sqrt(sq);
}

double clip_global_norm(Model& grads, double max_norm) {
  const double n = global_norm(grads);
  if (max_norm > 0.0 && n > max_norm) {
    const double s = max_norm / n;
    for (auto t : grads.tensors())
      for (double& x : t) x *= s;
  }
  return n;
}

}  // namespace mirnn
