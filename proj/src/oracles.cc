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

#include "mirnn/oracles.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "mirnn/errors.h"

namespace mirnn {
namespace {

constexpr double kStochasticTol = 1e-12;

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

void check_obs(std::span<const int> obs, size_t symbols, const char* op) {
  for (int x : obs)
    if (x < 0 || static_cast<size_t>(x) >= symbols)
      throw InvalidArgument(std::string(op) + ": observation " +
                            std::to_string(x) + " outside alphabet of " +
                            std::to_string(symbols));
}

// Throws unless every column of |m| is a probability distribution.
void check_column_stochastic(const Matrix& m, const std::string& what) {
  for (size_t j = 0; j < m.cols(); ++j) {
    double sum = 0.0;
    for (size_t i = 0; i < m.rows(); ++i) {
      if (!is_probability(m(i, j)))
        throw InvalidArgument(what + " has an entry outside [0, 1]");
      sum += m(i, j);
    }
    if (std::abs(sum - 1.0) > kStochasticTol)
      throw InvalidArgument(what + " column " + std::to_string(j) +
                            " sums to " + std::to_string(sum) + ", not 1");
  }
}

void check_distribution(const Vector& v, const std::string& what) {
  double sum = 0.0;
  for (double p : v) {
    if (!is_probability(p))
      throw InvalidArgument(what + " has an entry outside [0, 1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kStochasticTol)
    throw InvalidArgument(what + " sums to " + std::to_string(sum) + ", not 1");
}

Vector random_distribution(Rng& rng, size_t n) {
  Vector v(n);
  double sum = 0.0;
  for (double& x : v) {
    x = rng.uniform(0.05, 1.0);
    sum += x;
  }
  for (double& x : v) x /= sum;
  return v;
}

struct PathSum {
  const HMMSpec& spec;
  std::span<const int> obs;

  // Sum over continuations of a path whose state at time t is |state| and
  // whose probability so far is |prob|.
  double extend(size_t t, size_t state, double prob) const {
    if (t == obs.size()) return prob;
    double total = 0.0;
    const size_t x = static_cast<size_t>(obs[t]);
    for (size_t next = 0; next < spec.states(); ++next) {
      const double p = prob * spec.transition(next, state) *
                       spec.emission(x, next);
      total += extend(t + 1, next, p);
    }
    return total;
  }
};

}  // namespace

void HMMSpec::validate() const {
  const size_t m = initial.size();
  if (m == 0) throw InvalidArgument("HMMSpec: no states");
  if (transition.rows() != m || transition.cols() != m)
    throw InvalidArgument("HMMSpec: transition matrix must be states x states");
  if (emission.cols() != m || emission.rows() == 0)
    throw InvalidArgument("HMMSpec: emission matrix must be symbols x states");
  check_column_stochastic(transition, "HMMSpec: transition matrix");
  check_column_stochastic(emission, "HMMSpec: emission matrix");
  check_distribution(initial, "HMMSpec: initial distribution");
}

HMMSpec HMMSpec::Random(Rng& rng, size_t states, size_t symbols) {
  HMMSpec s;
  s.transition = Matrix(states, states);
  s.emission = Matrix(symbols, states);
  for (size_t j = 0; j < states; ++j) {
    Vector t = random_distribution(rng, states);
    Vector e = random_distribution(rng, symbols);
    for (size_t i = 0; i < states; ++i) s.transition(i, j) = t[i];
    for (size_t i = 0; i < symbols; ++i) s.emission(i, j) = e[i];
  }
  s.initial = random_distribution(rng, states);
  return s;
}

std::vector<Vector> hmm_forward(const HMMSpec& spec, std::span<const int> obs) {
  spec.validate();
  check_obs(obs, spec.symbols(), "hmm_forward");
  if (obs.size() > kMaxHmmLength)
    throw InvalidArgument("hmm_forward: sequences longer than " +
                          std::to_string(kMaxHmmLength) + " would underflow");
  const size_t m = spec.states();
  std::vector<Vector> alphas;
  alphas.reserve(obs.size());
  Vector prev = spec.initial;
  for (int x : obs) {
    Vector next(m);
    for (size_t i = 0; i < m; ++i) {
      double predicted = 0.0;
      for (size_t j = 0; j < m; ++j) predicted += spec.transition(i, j) * prev[j];
      next[i] = spec.emission(static_cast<size_t>(x), i) * predicted;
    }
    alphas.push_back(next);
    prev = std::move(next);
  }
  return alphas;
}

double hmm_likelihood(const std::vector<Vector>& alphas) {
  if (alphas.empty()) return 1.0;
  double sum = 0.0;
  for (double a : alphas.back()) sum += a;
  return sum;
}

double hmm_bruteforce(const HMMSpec& spec, std::span<const int> obs) {
  spec.validate();
  check_obs(obs, spec.symbols(), "hmm_bruteforce");
  const double paths =
      std::pow(static_cast<double>(spec.states()), static_cast<double>(obs.size()));
  if (paths > kMaxHmmPaths)
    throw InvalidArgument("hmm_bruteforce: " + std::to_string(spec.states()) +
                          "^" + std::to_string(obs.size()) +
                          " paths is intractable");
  PathSum sum{spec, obs};
  double total = 0.0;
  for (size_t s0 = 0; s0 < spec.states(); ++s0)
    total += sum.extend(0, s0, spec.initial[s0]);
  return total;
}

CellParams hmm_cell(const HMMSpec& spec) {
  spec.validate();
  CellParams cell =
      CellParams::Zeros(CellFamily::kRnn, IntegrationMode::kMiSimple,
                        Activation::kIdentity, spec.states(), spec.symbols());
  cell.blocks[0].W = transpose(spec.emission);
  cell.blocks[0].U = spec.transition;
  return cell;
}

std::vector<Vector> mi_rnn_as_hmm(const CellParams& cell, const Vector& h0,
                                  std::span<const int> obs) {
  cell.validate();
  if (cell.family != CellFamily::kRnn)
    throw InvalidArgument("mi_rnn_as_hmm: cell must be an RNN");
  if (cell.mode != IntegrationMode::kMiSimple)
    throw InvalidArgument(
        "mi_rnn_as_hmm: integration must be mi_simple (W x * U h)");
  if (cell.activation != Activation::kIdentity)
    throw InvalidArgument("mi_rnn_as_hmm: activation must be linear (identity)");
  const MIParams& p = cell.blocks[0];
  if (max_abs(p.b.span()) != 0.0)
    throw InvalidArgument("mi_rnn_as_hmm: bias terms must be dropped (b = 0)");
  check_column_stochastic(p.U, "mi_rnn_as_hmm: U (transition probabilities)");
  check_column_stochastic(transpose(p.W),
                          "mi_rnn_as_hmm: W^T (observation probabilities)");
  check_distribution(h0, "mi_rnn_as_hmm: h_0 (initial distribution)");
  check_obs(obs, p.input_size(), "mi_rnn_as_hmm");

  std::vector<Vector> hs;
  hs.reserve(obs.size());
  CellState s{h0, {}};
  for (int x : obs) {
    s = rnn_step(cell, Input::OneHot(static_cast<size_t>(x)), s);
    hs.push_back(s.h);
  }
  return hs;
}

std::vector<Vector> mi_rnn_as_hmm(const HMMSpec& spec,
                                  std::span<const int> obs) {
  return mi_rnn_as_hmm(hmm_cell(spec), spec.initial, obs);
}

Vector bilinear_second_order(const SecondOrderTensor& tensor, const Vector& x,
                             const Vector& h) {
  if (x.size() != tensor.in() || h.size() != tensor.rec())
    throw InvalidArgument("bilinear_second_order: x/h lengths do not match the "
                          "tensor slices");
  Vector s(tensor.out());
  for (size_t i = 0; i < tensor.out(); ++i) {
    double acc = 0.0;
    for (size_t j = 0; j < tensor.in(); ++j) {
      double row = 0.0;
      for (size_t k = 0; k < tensor.rec(); ++k) row += tensor(i, j, k) * h[k];
      acc += x[j] * row;
    }
    s[i] = acc;
  }
  return s;
}

SecondOrderTensor rank_one_tensor(const Vector& alpha, const Matrix& W,
                                  const Matrix& U) {
  if (alpha.size() != W.rows() || alpha.size() != U.rows())
    throw InvalidArgument("rank_one_tensor: alpha, W and U must share rows");
  SecondOrderTensor t(alpha.size(), W.cols(), U.cols());
  for (size_t i = 0; i < alpha.size(); ++i)
    for (size_t j = 0; j < W.cols(); ++j)
      for (size_t k = 0; k < U.cols(); ++k)
        t(i, j, k) = alpha[i] * W(i, j) * U(i, k);
  return t;
}

Matrix input_conditioned_transition(const Vector& alpha, const Matrix& W,
                                    const Vector& x, const Matrix& U) {
  if (alpha.size() != W.rows() || alpha.size() != U.rows())
    throw InvalidArgument(
        "input_conditioned_transition: alpha, W and U must share rows");
  const Vector wx = matvec(W, x);
  Matrix out = U;
  for (size_t i = 0; i < out.rows(); ++i)
    for (double& v : out.row(i)) v *= alpha[i] * wx[i];
  return out;
}

std::vector<std::vector<double>> finite_diff_grad(
    const std::function<double()>& f, std::span<const std::span<double>> params,
    double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite_diff_grad: step must be > 0");
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (size_t k = 0; k < params.size(); ++k) {
    std::vector<double> g(params[k].size());
    for (size_t i = 0; i < params[k].size(); ++i) {
      double& theta = params[k][i];
      const double saved = theta;
      theta = saved + step;
      const double plus = f();
      theta = saved - step;
      const double minus = f();
      theta = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus))
        throw DivergenceError("finite_diff_grad: f is non-finite near tensor " +
                              std::to_string(k) + " entry " +
                              std::to_string(i));
      g[i] = (plus - minus) / (2.0 * step);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double max_relative_error(std::span<const std::span<const double>> analytic,
                          const std::vector<std::vector<double>>& numeric,
                          double floor) {
  if (analytic.size() != numeric.size())
    throw InvalidArgument("max_relative_error: tensor count mismatch");
  double worst = 0.0;
  for (size_t k = 0; k < analytic.size(); ++k) {
    if (analytic[k].size() != numeric[k].size())
      throw InvalidArgument("max_relative_error: tensor size mismatch");
    for (size_t i = 0; i < analytic[k].size(); ++i) {
      const double a = analytic[k][i], n = numeric[k][i];
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      worst = std::max(worst, std::abs(a - n) / denom);
    }
  }
  return worst;
}

}  // namespace mirnn
