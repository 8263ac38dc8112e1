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

// Adam and the validation-driven learning-rate halving schedule.

#ifndef MIRNN_OPTIM_H_
#define MIRNN_OPTIM_H_

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace mirnn {

struct AdamState {
  size_t step = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // One accumulator per parameter tensor, same lengths.
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// Zeroed moments shaped like |params|. Throws ConfigError if lr <= 0.
AdamState make_adam(std::span<const std::span<double>> params, double lr);

// One bias-corrected Adam update of |params| in place:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
// A non-finite gradient throws DivergenceError before anything is touched.
void adam_apply(AdamState& state, std::span<const std::span<double>> params,
                std::span<const std::span<const double>> grads);

struct LrSchedule {
  size_t patience = 2;
  double factor = 0.5;
  double best = std::numeric_limits<double>::infinity();
  size_t epochs_without_improvement = 0;
  size_t halvings = 0;
};

// Feeds one epoch's validation BPC. Returns true (and scales |lr| by the
// factor) when the BPC has not improved for |patience| consecutive epochs;
// the counter restarts after each halving and on every improvement.
bool schedule_step(LrSchedule& schedule, double epoch_val_bpc, double& lr);

}  // namespace mirnn

#endif  // MIRNN_OPTIM_H_
