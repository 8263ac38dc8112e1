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
#include <string>

#include "mirnn/errors.h"

namespace mirnn {

AdamState make_adam(std::span<const std::span<double>> params, double lr) {
  if (!(lr > 0.0)) throw ConfigError("Adam learning rate must be positive");
  AdamState s;
  s.lr = lr;
  for (auto p : params) {
    s.m.emplace_back(p.size(), 0.0);
    s.v.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_apply(AdamState& state, std::span<const std::span<double>> params,
                std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw InvalidArgument("adam_apply: tensor count mismatch");
  for (size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size() ||
        params[k].size() != state.m[k].size())
      throw InvalidArgument("adam_apply: shape mismatch in tensor " +
                            std::to_string(k));
    for (size_t i = 0; i < grads[k].size(); ++i)
      if (!std::isfinite(grads[k][i]))
        throw DivergenceError("adam_apply: non-finite gradient in tensor " +
                              std::to_string(k) + " entry " +
                              std::to_string(i) + " at step " +
                              std::to_string(state.step + 1));
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    const auto g = grads[k];
    auto p = params[k];
    for (size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

bool schedule_step(LrSchedule& schedule, double epoch_val_bpc, double& lr) {
  if (!std::isfinite(epoch_val_bpc))
    throw InvalidArgument("schedule_step: validation BPC must be finite");
  if (epoch_val_bpc < schedule.best) {
    schedule.best = epoch_val_bpc;
    schedule.epochs_without_improvement = 0;
    return false;
  }
  if (++schedule.epochs_without_improvement < schedule.patience) return false;
  lr *= schedule.factor;
  schedule.epochs_without_improvement = 0;
  ++schedule.halvings;
  return true;
}

}  // namespace mirnn
