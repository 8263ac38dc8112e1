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

// Unrolling a cell over a symbol sequence, the softmax character loss, and
// backpropagation through time.
//
// Index convention: states[0] is the initial state h_0 and states[t] is h_t
// for t = 1..T. Step t consumes inputs[t-1] and its cache is caches[t-1];
// logits[t-1] is the readout of h_t and is scored against targets[t-1].

#ifndef MIRNN_BPTT_H_
#define MIRNN_BPTT_H_

#include <cstddef>
#include <span>
#include <vector>

#include "mirnn/cells.h"
#include "mirnn/tensor.h"

namespace mirnn {

// Affine softmax readout shared across time steps: logits = V h + c.
struct Readout {
  Matrix V;  // vocab x hidden
  Vector c;  // vocab
};

struct Model {
  CellParams cell;
  Readout readout;

  static Model ZerosLike(const Model& other);

  size_t vocab_size() const { return readout.c.size(); }
  size_t parameter_count() const;
  // Cell tensors followed by V and c.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

struct UnrollRecord {
  std::vector<CellState> states;
  std::vector<StepCache> caches;
  std::vector<Vector> logits;

  size_t steps() const { return caches.size(); }
};

UnrollRecord unroll_forward(const Model& model, std::span<const int> inputs,
                            const CellState& h0);

struct LossReport {
  double nll_nats = 0.0;
  double bpc = 0.0;
  size_t count = 0;
};

LossReport loss_bpc(std::span<const Vector> logits,
                    std::span<const int> targets);
LossReport loss_bpc(const UnrollRecord& record, std::span<const int> targets);
// Combines per-sequence reports.
LossReport merge(const LossReport& a, const LossReport& b);

enum class LossScope {
  kAllSteps,   // sum of every step's prediction loss (training)
  kFinalStep,  // only the prediction made from h_T
};

// log ||dC/dh_t||_2 for an exactly zero gradient. Any nonzero double has a
// log above -745, so the sentinel cannot collide with a real value.
inline constexpr double kLogZeroSentinel = -1000.0;

struct GradientTrace {
  // log ||dC/dh_t||_2 for t = 0..T.
  std::vector<double> log_norms;
  // Optional per-step factors J_t with dC/dh_{t-1} = J_t dC/dh_t, t = 1..T.
  std::vector<Matrix> factors;
};

struct BackwardOptions {
  LossScope scope = LossScope::kAllSteps;
  bool store_factors = false;
  // Override for the cell's step backward; empty means cell_step_backward.
  StepBackwardFn step_backward;
};

struct BackwardResult {
  LossReport loss;
  GradientTrace trace;
  // Total dC/dh_t for t = 0..T.
  std::vector<Vector> d_h;
};

// Accumulates dC/dparams into |grads|, which must be shaped like |model|.
BackwardResult backward_through_time(const Model& model,
                                     const UnrollRecord& record,
                                     std::span<const int> targets,
                                     const BackwardOptions& options,
                                     Model& grads);

// J with dC/dh_{t-1} = J dC/dh_t for one RNN step:
//   additive    U^T diag(phi')
//   mi_simple   U^T diag(Wx) diag(phi')
//   mi_general  U^T diag(alpha * Wx + beta1) diag(phi')
Matrix step_jacobian(const CellParams& cell, const StepCache& cache);

// J_{to+1} ... J_{from}, mapping dC/dh_from onto its contribution to
// dC/dh_to. RNN cells only; requires to_t < from_t <= record.steps().
Matrix jacobian_product(const CellParams& cell, const UnrollRecord& record,
                        size_t from_t, size_t to_t);

double global_norm(const Model& grads);
// Rescales |grads| so its global L2 norm is at most |max_norm|; returns the
// norm before clipping.
double clip_global_norm(Model& grads, double max_norm);

}  // namespace mirnn

#endif  // MIRNN_BPTT_H_
