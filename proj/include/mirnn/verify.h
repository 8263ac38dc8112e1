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

// The oracle suite behind `mirnn verify`: analytic gradients against finite
// differences, the additive/MI degeneracy, HMM equivalence, the rank-1
// second-order form and the Jacobian chain identity.

#ifndef MIRNN_VERIFY_H_
#define MIRNN_VERIFY_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mirnn/cells.h"

namespace mirnn {

struct InstanceResult {
  uint64_t seed = 0;
  double error = 0.0;
  std::string detail;
};

struct CheckResult {
  std::string name;
  double tolerance = 0.0;
  size_t instances = 0;
  double max_error = 0.0;
  std::vector<InstanceResult> failures;

  bool passed() const { return failures.empty(); }
  void record(uint64_t seed, double error, std::string detail = {});
};

inline constexpr double kGradientTolerance = 1e-6;
// Denominator floor of the relative gradient error; below it the error is
// effectively absolute.
inline constexpr double kGradientErrorFloor = 1e-3;
inline constexpr double kExactTolerance = 1e-12;
inline constexpr double kChainTolerance = 1e-10;

// Each returns the error of one random instance drawn from |seed|.
// Relative error between BPTT (through |step_backward| when given) and
// central differences over every parameter of a small random model.
InstanceResult check_bptt_gradients(CellFamily family, IntegrationMode mode,
                                    uint64_t seed,
                                    const StepBackwardFn& step_backward = {});
// mi_general with alpha = 0, beta1 = beta2 = 1 against additive: forward
// states, logits and all gradients.
InstanceResult check_degeneracy(CellFamily family, uint64_t seed);
// MI-RNN states vs forward alphas, and the likelihood vs path enumeration.
InstanceResult check_hmm_equivalence(uint64_t seed);
// The MI second-order term vs the rank-1 bilinear form and vs
// diag(alpha) diag(Wx) U h.
InstanceResult check_second_order(uint64_t seed);
// dC/dh_{T-n}, n = 1..5, from the backward pass vs jacobian_product applied
// to dC/dh_T.
InstanceResult check_chain_identity(IntegrationMode mode, uint64_t seed);

struct VerifyOptions {
  uint64_t seed = 1;
  size_t gradient_instances = 10;
  size_t degeneracy_instances = 10;
  size_t hmm_instances = 20;
  size_t second_order_instances = 100;
  size_t chain_instances = 10;
  StepBackwardFn step_backward;  // fault injection for the gradient checks
};

// Instance k of every check uses seed options.seed + k, so a failing
// instance replays as instance 0 of a run started from its seed.
std::vector<CheckResult> run_verify(const VerifyOptions& options);
bool all_passed(const std::vector<CheckResult>& checks);
std::string verify_manifest(const std::vector<CheckResult>& checks,
                            uint64_t seed);

}  // namespace mirnn

#endif  // MIRNN_VERIFY_H_
