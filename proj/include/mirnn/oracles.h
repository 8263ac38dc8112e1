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

// Independent reference computations: hidden Markov model likelihoods (by
// the forward recursion, by exhaustive path enumeration, and through an
// MI-RNN), the bilinear second-order form, and central finite differences.

#ifndef MIRNN_ORACLES_H_
#define MIRNN_ORACLES_H_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "mirnn/cells.h"
#include "mirnn/tensor.h"

namespace mirnn {

// Column-stochastic HMM:
//   transition(i, j) = Pr[h_{t+1} = i | h_t = j]       (m x m)
//   emission(i, j)   = Pr[x_t = i | h_t = j]           (symbols x m)
//   initial[j]       = Pr[h_0 = j]
struct HMMSpec {
  Matrix transition;
  Matrix emission;
  Vector initial;

  size_t states() const { return initial.size(); }
  size_t symbols() const { return emission.rows(); }

  // Throws InvalidArgument naming the first violated property (entries in
  // [0, 1], columns and the initial distribution summing to 1 within 1e-12).
  void validate() const;

  static HMMSpec Random(Rng& rng, size_t states, size_t symbols);
};

// Longest sequence hmm_forward accepts; unscaled alphas underflow beyond it.
inline constexpr size_t kMaxHmmLength = 50;
// Largest path count hmm_bruteforce will enumerate.
inline constexpr double kMaxHmmPaths = 1e7;

// Alpha vectors for t = 1..T under h_t = Pr[x_t | h_t] * (transition h_{t-1})
// starting from h_0 = initial, so a transition precedes the first emission.
std::vector<Vector> hmm_forward(const HMMSpec& spec, std::span<const int> obs);
double hmm_likelihood(const std::vector<Vector>& alphas);

// Sum over all hidden paths h_0..h_T of Pr[path] Pr[obs | path], enumerated
// recursively. Throws InvalidArgument when states^T exceeds kMaxHmmPaths.
double hmm_bruteforce(const HMMSpec& spec, std::span<const int> obs);

// The RNN cell that realizes the forward recursion: mi_simple, identity
// activation, zero bias, W = emission^T (so W e_x = Pr[x | h = .]) and
// U = transition.
CellParams hmm_cell(const HMMSpec& spec);

// Runs |cell| from |h0| over one-hot |obs| and returns h_1..h_T. Throws
// InvalidArgument naming the constraint when the cell is not an
// identity-activation, bias-free mi_simple RNN with stochastic W and U.
std::vector<Vector> mi_rnn_as_hmm(const CellParams& cell, const Vector& h0,
                                  std::span<const int> obs);
std::vector<Vector> mi_rnn_as_hmm(const HMMSpec& spec,
                                  std::span<const int> obs);

// out x in x rec array; slice i is the in x rec matrix T^(i).
class SecondOrderTensor {
 public:
  SecondOrderTensor(size_t out, size_t in, size_t rec)
      : out_(out), in_(in), rec_(rec), data_(out * in * rec, 0.0) {}

  size_t out() const { return out_; }
  size_t in() const { return in_; }
  size_t rec() const { return rec_; }

  double& operator()(size_t i, size_t j, size_t k) {
    return data_[(i * in_ + j) * rec_ + k];
  }
  double operator()(size_t i, size_t j, size_t k) const {
    return data_[(i * in_ + j) * rec_ + k];
  }

 private:
  size_t out_, in_, rec_;
  std::vector<double> data_;
};

// s[i] = x^T T^(i) h.
Vector bilinear_second_order(const SecondOrderTensor& tensor, const Vector& x,
                             const Vector& h);

// Slices T^(i) = alpha_i w_i (outer) u_i, with w_i, u_i the i-th rows of W
// and U.
SecondOrderTensor rank_one_tensor(const Vector& alpha, const Matrix& W,
                                  const Matrix& U);

// diag(alpha) diag(W x) U.
Matrix input_conditioned_transition(const Vector& alpha, const Matrix& W,
                                    const Vector& x, const Matrix& U);

inline constexpr double kDefaultFiniteDiffStep = 1e-5;

// Central differences (f(theta + h e_i) - f(theta - h e_i)) / 2h for every
// scalar in |params|. |f| must read the parameters through the spans; each
// entry is restored after probing. Throws DivergenceError if f is
// non-finite at a probe point and InvalidArgument if step <= 0.
std::vector<std::vector<double>> finite_diff_grad(
    const std::function<double()>& f, std::span<const std::span<double>> params,
    double step = kDefaultFiniteDiffStep);

// Largest |a - b| / max(|a|, |b|, floor) over all entries.
double max_relative_error(std::span<const std::span<const double>> analytic,
                          const std::vector<std::vector<double>>& numeric,
                          double floor);

}  // namespace mirnn

#endif  // MIRNN_ORACLES_H_
