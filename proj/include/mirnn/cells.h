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

// Additive and multiplicative-integration building blocks, and the recurrent
// cells (RNN, LSTM, GRU) assembled from them.
//
// A building block fuses an input x (through W) with a recurrent signal z
// (through U) and applies a nonlinearity phi:
//
//   additive    phi(Wx + Uz + b)
//   mi_simple   phi(Wx * Uz + b)
//   mi_general  phi(alpha * Wx * Uz + beta1 * Uz + beta2 * Wx + b)
//
// where * is the elementwise product. Every block keeps Wx and Uz in its
// forward cache because those two products are exactly the factors the
// backward pass needs.

#ifndef MIRNN_CELLS_H_
#define MIRNN_CELLS_H_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mirnn/tensor.h"

namespace mirnn {

enum class IntegrationMode { kAdditive, kMiSimple, kMiGeneral };
enum class Activation { kIdentity, kTanh, kSigmoid };
enum class CellFamily { kRnn, kLstm, kGru };

std::string_view to_string(IntegrationMode mode);
std::string_view to_string(Activation activation);
std::string_view to_string(CellFamily family);
// These throw ConfigError on unknown names.
IntegrationMode parse_integration_mode(std::string_view name);
Activation parse_activation(std::string_view name);
CellFamily parse_cell_family(std::string_view name);

double activate(Activation activation, double pre);
// Derivative expressed through the activation's output.
double activation_derivative(Activation activation, double out);

// Initial values broadcast into {alpha, beta1, beta2, b}.
struct MIBiasInit {
  double alpha = 1.0;
  double beta1 = 0.5;
  double beta2 = 0.5;
  double b = 0.0;

  bool operator==(const MIBiasInit&) const = default;
};

// Named presets: "ptb-rnn" {2, 0.5, 0.5, 0}, "text8-lstm" {1, 0.5, 0.5, 0}
// (the library default) and "ones" {1, 1, 1, 0}. Throws ConfigError for
// any other name.
MIBiasInit mi_bias_preset(std::string_view name);
std::vector<std::string> mi_bias_preset_names();

// Parameters of one building block with output size d, input size n and
// recurrent size m. alpha, beta1 and beta2 are empty unless the mode is
// kMiGeneral, so they never count as parameters otherwise.
struct MIParams {
  IntegrationMode mode = IntegrationMode::kAdditive;
  Matrix W;  // d x n
  Matrix U;  // d x m
  Vector b;
  Vector alpha;
  Vector beta1;
  Vector beta2;

  static MIParams Zeros(IntegrationMode mode, size_t d, size_t n, size_t m);

  size_t out_size() const { return b.size(); }
  size_t input_size() const { return W.cols(); }
  size_t recurrent_size() const { return U.cols(); }
  size_t parameter_count() const;

  // Throws InvalidArgument when shapes disagree with (d, n, m) or the mode.
  void validate() const;

  // Parameter tensors in a fixed order: W, U, b, then alpha, beta1, beta2
  // when present.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

// A block input, either a one-hot symbol index or a dense vector. One-hot
// inputs take the column-selection path for Wx.
class Input {
 public:
  static Input OneHot(size_t index);
  static Input Dense(Vector x);

  bool is_one_hot() const { return one_hot_; }
  size_t index() const { return index_; }
  const Vector& dense() const { return dense_; }

 private:
  bool one_hot_ = true;
  size_t index_ = 0;
  Vector dense_;
};

struct BlockCache {
  IntegrationMode mode = IntegrationMode::kAdditive;
  Activation activation = Activation::kIdentity;
  Input x = Input::OneHot(0);
  Vector z;
  Vector wx;
  Vector uz;
  Vector pre;
  Vector out;
};

BlockCache block_forward(const MIParams& p, Activation phi, const Input& x,
                         const Vector& z);

struct BlockInputGrad {
  Vector d_x;  // empty for one-hot inputs
  Vector d_z;
};

// Adds d(out)/d(params) . d_out into |grads| and returns the input
// gradients. Throws InvalidArgument if |cache| was not produced by a block
// with the shape and mode of |p|.
BlockInputGrad block_backward(const MIParams& p, const BlockCache& cache,
                              const Vector& d_out, MIParams& grads);

struct BlockGrad {
  MIParams d_params;
  Vector d_x;
  Vector d_z;
};

BlockGrad block_backward(const MIParams& p, const BlockCache& cache,
                         const Vector& d_out);

// Block order: RNN {h}; LSTM {z, i, f, o}; GRU {z, r, h}. Every block shares
// the cell's integration mode. |activation| is the RNN state nonlinearity;
// LSTM and GRU use tanh and sigmoid where their equations say so.
struct CellParams {
  CellFamily family = CellFamily::kRnn;
  IntegrationMode mode = IntegrationMode::kAdditive;
  Activation activation = Activation::kTanh;
  std::vector<MIParams> blocks;

  static CellParams Zeros(CellFamily family, IntegrationMode mode,
                          Activation activation, size_t hidden,
                          size_t input);

  size_t hidden_size() const { return blocks.front().out_size(); }
  size_t input_size() const { return blocks.front().input_size(); }
  size_t parameter_count() const;
  void validate() const;

  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

size_t block_count(CellFamily family);

struct CellInit {
  UniformRange w_range;  // input weights W
  UniformRange u_range;  // recurrent weights U
  MIBiasInit mi;
};

CellParams init_cell(CellFamily family, IntegrationMode mode,
                     Activation activation, size_t hidden, size_t input,
                     const CellInit& init, Rng& rng);

struct CellState {
  Vector h;
  Vector c;  // LSTM only

  static CellState Zeros(CellFamily family, size_t hidden);
  bool has_cell() const { return !c.empty(); }

  bool operator==(const CellState&) const = default;
};

struct StepCache {
  CellFamily family = CellFamily::kRnn;
  std::vector<BlockCache> blocks;
  Vector h_prev;
  Vector c_prev;
  Vector c;       // LSTM
  Vector tanh_c;  // LSTM
  Vector rh;      // GRU: r * h_prev, the candidate block's recurrent input
};

CellState rnn_step(const CellParams& params, const Input& x,
                   const CellState& s, StepCache* cache = nullptr);
CellState lstm_step(const CellParams& params, const Input& x,
                    const CellState& s, StepCache* cache = nullptr);
CellState gru_step(const CellParams& params, const Input& x,
                   const CellState& s, StepCache* cache = nullptr);
// Dispatches on params.family.
CellState cell_step(const CellParams& params, const Input& x,
                    const CellState& s, StepCache* cache = nullptr);

struct StepGrad {
  Vector d_h_prev;
  Vector d_c_prev;  // LSTM only
  Vector d_x;       // empty for one-hot inputs
};

// Backward through one cell step. |d_c| is the gradient flowing into the
// LSTM cell state from the future and must be empty for RNN and GRU.
// Parameter gradients are accumulated into |grads|.
StepGrad cell_step_backward(const CellParams& params, const StepCache& cache,
                            const Vector& d_h, const Vector& d_c,
                            CellParams& grads);

// Signature of cell_step_backward, so harnesses can swap in a different
// implementation.
using StepBackwardFn = std::function<StepGrad(
    const CellParams&, const StepCache&, const Vector&, const Vector&,
    CellParams&)>;

}  // namespace mirnn

#endif  // MIRNN_CELLS_H_
