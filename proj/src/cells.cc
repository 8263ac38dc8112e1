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

#include "mirnn/cells.h"

#include <cmath>
#include <string>

#include "mirnn/errors.h"

namespace mirnn {
namespace {

constexpr size_t kRnnH = 0;
constexpr size_t kLstmZ = 0, kLstmI = 1, kLstmF = 2, kLstmO = 3;
constexpr size_t kGruZ = 0, kGruR = 1, kGruH = 2;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string dims(size_t d, size_t n, size_t m) {
  return "(d=" + std::to_string(d) + ", n=" + std::to_string(n) +
         ", m=" + std::to_string(m) + ")";
}

void check_input(const Input& x, size_t n, const char* op) {
  if (x.is_one_hot()) {
    if (x.index() >= n)
      throw InvalidArgument(std::string(op) + ": one-hot index " +
                            std::to_string(x.index()) + " >= input size " +
                            std::to_string(n));
  } else if (x.dense().size() != n) {
    throw InvalidArgument(std::string(op) + ": input length " +
                          std::to_string(x.dense().size()) + " != " +
                          std::to_string(n));
  }
}

void check_state(const CellParams& p, const CellState& s, const char* op) {
  if (s.h.size() != p.hidden_size())
    throw InvalidArgument(std::string(op) + ": hidden state has length " +
                          std::to_string(s.h.size()) + ", cell expects " +
                          std::to_string(p.hidden_size()));
  if (p.family == CellFamily::kLstm && s.c.size() != p.hidden_size())
    throw InvalidArgument(std::string(op) + ": LSTM step needs a cell state");
  if (p.family != CellFamily::kLstm && !s.c.empty())
    throw InvalidArgument(std::string(op) +
                          ": cell state is only valid for LSTM cells");
}

void check_family(const CellParams& p, CellFamily family, const char* op) {
  if (p.family != family)
    throw InvalidArgument(std::string(op) + " called with " +
                          std::string(to_string(p.family)) + " parameters");
  if (p.blocks.size() != block_count(family))
    throw InvalidArgument(std::string(op) + ": wrong number of blocks");
}

std::vector<std::span<double>> mutable_spans(MIParams& p) {
  std::vector<std::span<double>> out = {p.W.span(), p.U.span(), p.b.span()};
  if (p.mode == IntegrationMode::kMiGeneral) {
    out.push_back(p.alpha.span());
    out.push_back(p.beta1.span());
    out.push_back(p.beta2.span());
  }
  return out;
}

}  // namespace

std::string_view to_string(IntegrationMode mode) {
  switch (mode) {
    case IntegrationMode::kAdditive: return "additive";
    case IntegrationMode::kMiSimple: return "mi_simple";
    case IntegrationMode::kMiGeneral: return "mi_general";
  }
  return "?";
}

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

std::string_view to_string(CellFamily family) {
  switch (family) {
    case CellFamily::kRnn: return "rnn";
    case CellFamily::kLstm: return "lstm";
    case CellFamily::kGru: return "gru";
  }
  return "?";
}

IntegrationMode parse_integration_mode(std::string_view name) {
  if (name == "additive") return IntegrationMode::kAdditive;
  if (name == "mi_simple") return IntegrationMode::kMiSimple;
  if (name == "mi_general") return IntegrationMode::kMiGeneral;
  throw ConfigError("unknown integration mode '" + std::string(name) + "'");
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

CellFamily parse_cell_family(std::string_view name) {
  if (name == "rnn") return CellFamily::kRnn;
  if (name == "lstm") return CellFamily::kLstm;
  if (name == "gru") return CellFamily::kGru;
  throw ConfigError("unknown cell family '" + std::string(name) + "'");
}

double activate(Activation activation, double pre) {
  switch (activation) {
    case Activation::kIdentity: return pre;
    case Activation::kTanh: return std::tanh(pre);
    case Activation::kSigmoid: return sigmoid(pre);
  }
  return pre;
}

double activation_derivative(Activation activation, double out) {
  switch (activation) {
    case Activation::kIdentity: return 1.0;
    case Activation::kTanh: return 1.0 - out * out;
    case Activation::kSigmoid: return out * (1.0 - out);
  }
  return 1.0;
}

MIBiasInit mi_bias_preset(std::string_view name) {
  if (name == "ptb-rnn") return {2.0, 0.5, 0.5, 0.0};
  if (name == "text8-lstm") return {1.0, 0.5, 0.5, 0.0};
  if (name == "ones") return {1.0, 1.0, 1.0, 0.0};
  throw ConfigError("unknown MI bias preset '" + std::string(name) + "'");
}

std::vector<std::string> mi_bias_preset_names() {
  return {"ptb-rnn", "text8-lstm", "ones"};
}

MIParams MIParams::Zeros(IntegrationMode mode, size_t d, size_t n, size_t m) {
  MIParams p;
  p.mode = mode;
  p.W = Matrix(d, n);
  p.U = Matrix(d, m);
  p.b = Vector(d);
  if (mode == IntegrationMode::kMiGeneral) {
    p.alpha = Vector(d);
    p.beta1 = Vector(d);
    p.beta2 = Vector(d);
  }
  return p;
}

size_t MIParams::parameter_count() const {
  return W.size() + U.size() + b.size() + alpha.size() + beta1.size() +
         beta2.size();
}

void MIParams::validate() const {
  const size_t d = b.size();
  if (d == 0) throw InvalidArgument("MIParams: output size must be >= 1");
  if (W.rows() != d || U.rows() != d)
    throw InvalidArgument("MIParams: W/U row count disagrees with b " +
                          dims(d, W.cols(), U.cols()));
  const size_t extra = mode == IntegrationMode::kMiGeneral ? d : 0;
  if (alpha.size() != extra || beta1.size() != extra || beta2.size() != extra)
    throw InvalidArgument("MIParams: alpha/beta sizes do not match mode " +
                          std::string(to_string(mode)));
}

std::vector<std::span<double>> MIParams::tensors() {
  return mutable_spans(*this);
}

std::vector<std::span<const double>> MIParams::tensors() const {
  std::vector<std::span<const double>> out = {W.span(), U.span(), b.span()};
  if (mode == IntegrationMode::kMiGeneral) {
    out.push_back(alpha.span());
    out.push_back(beta1.span());
    out.push_back(beta2.span());
  }
  return out;
}

Input Input::OneHot(size_t index) {
  Input in;
  in.one_hot_ = true;
  in.index_ = index;
  return in;
}

Input Input::Dense(Vector x) {
  Input in;
  in.one_hot_ = false;
  in.dense_ = std::move(x);
  return in;
}

BlockCache block_forward(const MIParams& p, Activation phi, const Input& x,
                         const Vector& z) {
  const size_t d = p.out_size();
  check_input(x, p.input_size(), "block_forward");
  if (z.size() != p.recurrent_size())
    throw InvalidArgument("block_forward: z has length " +
                          std::to_string(z.size()) + ", block expects " +
                          std::to_string(p.recurrent_size()));

  BlockCache c;
  c.mode = p.mode;
  c.activation = phi;
  c.x = x;
  c.z = z;
  c.wx = x.is_one_hot() ? column(p.W, x.index()) : matvec(p.W, x.dense());
  c.uz = matvec(p.U, z);
  c.pre = Vector(d);
  c.out = Vector(d);
  for (size_t i = 0; i < d; ++i) {
    const double wx = c.wx[i], uz = c.uz[i];
    double pre = 0.0;
    switch (p.mode) {
      case IntegrationMode::kAdditive:
        pre = wx + uz + p.b[i];
        break;
      case IntegrationMode::kMiSimple:
        pre = wx * uz + p.b[i];
        break;
      case IntegrationMode::kMiGeneral:
        pre = p.alpha[i] * wx * uz + p.beta1[i] * uz + p.beta2[i] * wx +
              p.b[i];
        break;
    }
    c.pre[i] = pre;
    c.out[i] = activate(phi, pre);
  }
  return c;
}

BlockInputGrad block_backward(const MIParams& p, const BlockCache& cache,
                              const Vector& d_out, MIParams& grads) {
  const size_t d = p.out_size();
  if (cache.mode != p.mode || cache.wx.size() != d || cache.uz.size() != d ||
      cache.out.size() != d || cache.z.size() != p.recurrent_size())
    throw InvalidArgument(
        "block_backward: cache does not belong to a block of shape " +
        dims(d, p.input_size(), p.recurrent_size()) + " in mode " +
        std::string(to_string(p.mode)));
  check_input(cache.x, p.input_size(), "block_backward");
  if (d_out.size() != d)
    throw InvalidArgument("block_backward: d_out has length " +
                          std::to_string(d_out.size()) + ", expected " +
                          std::to_string(d));
  if (grads.mode != p.mode || grads.W.rows() != p.W.rows() ||
      grads.W.cols() != p.W.cols() || grads.U.cols() != p.U.cols() ||
      grads.alpha.size() != p.alpha.size())
    throw InvalidArgument("block_backward: gradient buffer shape mismatch");

  Vector d_wx(d), d_uz(d);
  for (size_t i = 0; i < d; ++i) {
    const double g =
        d_out[i] * activation_derivative(cache.activation, cache.out[i]);
    const double wx = cache.wx[i], uz = cache.uz[i];
    switch (p.mode) {
      case IntegrationMode::kAdditive:
        d_wx[i] = g;
        d_uz[i] = g;
        break;
      case IntegrationMode::kMiSimple:
        d_wx[i] = g * uz;
        d_uz[i] = g * wx;
        break;
      case IntegrationMode::kMiGeneral:
        d_wx[i] = g * (p.alpha[i] * uz + p.beta2[i]);
        d_uz[i] = g * (p.alpha[i] * wx + p.beta1[i]);
        grads.alpha[i] += g * wx * uz;
        grads.beta1[i] += g * uz;
        grads.beta2[i] += g * wx;
        break;
    }
    grads.b[i] += g;
  }

  BlockInputGrad out;
  if (cache.x.is_one_hot()) {
    add_to_column(grads.W, cache.x.index(), d_wx);
  } else {
    add_outer(grads.W, d_wx, cache.x.dense());
    out.d_x = matvec_transposed(p.W, d_wx);
  }
  add_outer(grads.U, d_uz, cache.z);
  out.d_z = matvec_transposed(p.U, d_uz);
  return out;
}

BlockGrad block_backward(const MIParams& p, const BlockCache& cache,
                         const Vector& d_out) {
  BlockGrad g;
  g.d_params = MIParams::Zeros(p.mode, p.out_size(), p.input_size(),
                               p.recurrent_size());
  BlockInputGrad in = block_backward(p, cache, d_out, g.d_params);
  g.d_x = std::move(in.d_x);
  g.d_z = std::move(in.d_z);
  return g;
}

size_t block_count(CellFamily family) {
  switch (family) {
    case CellFamily::kRnn: return 1;
    case CellFamily::kLstm: return 4;
    case CellFamily::kGru: return 3;
  }
  return 0;
}

CellParams CellParams::Zeros(CellFamily family, IntegrationMode mode,
                             Activation activation, size_t hidden,
                             size_t input) {
  CellParams p;
  p.family = family;
  p.mode = mode;
  p.activation = activation;
  for (size_t k = 0; k < block_count(family); ++k)
    p.blocks.push_back(MIParams::Zeros(mode, hidden, input, hidden));
  return p;
}

size_t CellParams::parameter_count() const {
  size_t n = 0;
  for (const auto& b : blocks) n += b.parameter_count();
  return n;
}

void CellParams::validate() const {
  if (blocks.size() != block_count(family))
    throw InvalidArgument("CellParams: " + std::string(to_string(family)) +
                          " needs " + std::to_string(block_count(family)) +
                          " blocks, got " + std::to_string(blocks.size()));
  const size_t d = blocks.front().out_size();
  const size_t n = blocks.front().input_size();
  for (const auto& b : blocks) {
    b.validate();
    if (b.mode != mode)
      throw InvalidArgument("CellParams: block mode differs from cell mode");
    if (b.out_size() != d || b.input_size() != n || b.recurrent_size() != d)
      throw InvalidArgument("CellParams: blocks must share " +
                            dims(d, n, d));
  }
}

std::vector<std::span<double>> CellParams::tensors() {
  std::vector<std::span<double>> out;
  for (auto& b : blocks)
    for (auto s : b.tensors()) out.push_back(s);
  return out;
}

std::vector<std::span<const double>> CellParams::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& b : blocks)
    for (auto s : b.tensors()) out.push_back(s);
  return out;
}

CellParams init_cell(CellFamily family, IntegrationMode mode,
                     Activation activation, size_t hidden, size_t input,
                     const CellInit& init, Rng& rng) {
  if (hidden == 0 || input == 0)
    throw ConfigError("init_cell: hidden and input sizes must be >= 1");
  CellParams p = CellParams::Zeros(family, mode, activation, hidden, input);
  for (auto& b : p.blocks) {
    b.W = sample_matrix(rng, init.w_range, hidden, input);
    b.U = sample_matrix(rng, init.u_range, hidden, hidden);
    b.b.fill(init.mi.b);
    if (mode == IntegrationMode::kMiGeneral) {
      b.alpha.fill(init.mi.alpha);
      b.beta1.fill(init.mi.beta1);
      b.beta2.fill(init.mi.beta2);
    }
  }
  return p;
}

CellState CellState::Zeros(CellFamily family, size_t hidden) {
  CellState s;
  s.h = Vector(hidden);
  if (family == CellFamily::kLstm) s.c = Vector(hidden);
  return s;
}

CellState rnn_step(const CellParams& params, const Input& x,
                   const CellState& s, StepCache* cache) {
  check_family(params, CellFamily::kRnn, "rnn_step");
  check_state(params, s, "rnn_step");
  BlockCache block =
      block_forward(params.blocks[kRnnH], params.activation, x, s.h);
  CellState next;
  next.h = block.out;
  if (cache != nullptr) {
    cache->family = CellFamily::kRnn;
    cache->h_prev = s.h;
    cache->blocks.clear();
    cache->blocks.push_back(std::move(block));
  }
  return next;
}

CellState lstm_step(const CellParams& params, const Input& x,
                    const CellState& s, StepCache* cache) {
  check_family(params, CellFamily::kLstm, "lstm_step");
  check_state(params, s, "lstm_step");
  const size_t d = params.hidden_size();
  std::vector<BlockCache> blocks;
  blocks.reserve(4);
  blocks.push_back(
      block_forward(params.blocks[kLstmZ], Activation::kTanh, x, s.h));
  blocks.push_back(
      block_forward(params.blocks[kLstmI], Activation::kSigmoid, x, s.h));
  blocks.push_back(
      block_forward(params.blocks[kLstmF], Activation::kSigmoid, x, s.h));
  blocks.push_back(
      block_forward(params.blocks[kLstmO], Activation::kSigmoid, x, s.h));
  const Vector& z = blocks[kLstmZ].out;
  const Vector& i = blocks[kLstmI].out;
  const Vector& f = blocks[kLstmF].out;
  const Vector& o = blocks[kLstmO].out;

  CellState next;
  next.c = Vector(d);
  next.h = Vector(d);
  Vector tanh_c(d);
  for (size_t k = 0; k < d; ++k) {
    next.c[k] = i[k] * z[k] + f[k] * s.c[k];
    tanh_c[k] = std::tanh(next.c[k]);
    next.h[k] = o[k] * tanh_c[k];
  }
  if (cache != nullptr) {
    cache->family = CellFamily::kLstm;
    cache->h_prev = s.h;
    cache->c_prev = s.c;
    cache->c = next.c;
    cache->tanh_c = std::move(tanh_c);
    cache->blocks = std::move(blocks);
  }
  return next;
}

CellState gru_step(const CellParams& params, const Input& x,
                   const CellState& s, StepCache* cache) {
  check_family(params, CellFamily::kGru, "gru_step");
  check_state(params, s, "gru_step");
  const size_t d = params.hidden_size();
  std::vector<BlockCache> blocks;
  blocks.reserve(3);
  blocks.push_back(
      block_forward(params.blocks[kGruZ], Activation::kSigmoid, x, s.h));
  blocks.push_back(
      block_forward(params.blocks[kGruR], Activation::kSigmoid, x, s.h));
  Vector rh = hadamard(blocks[kGruR].out, s.h);
  blocks.push_back(
      block_forward(params.blocks[kGruH], Activation::kTanh, x, rh));
  const Vector& z = blocks[kGruZ].out;
  const Vector& candidate = blocks[kGruH].out;

  CellState next;
  next.h = Vector(d);
  for (size_t k = 0; k < d; ++k)
    next.h[k] = (1.0 - z[k]) * s.h[k] + z[k] * candidate[k];
  if (cache != nullptr) {
    cache->family = CellFamily::kGru;
    cache->h_prev = s.h;
    cache->rh = std::move(rh);
    cache->blocks = std::move(blocks);
  }
  return next;
}

CellState cell_step(const CellParams& params, const Input& x,
                    const CellState& s, StepCache* cache) {
  switch (params.family) {
    case CellFamily::kRnn: return rnn_step(params, x, s, cache);
    case CellFamily::kLstm: return lstm_step(params, x, s, cache);
    case CellFamily::kGru: return gru_step(params, x, s, cache);
  }
  throw InvalidArgument("cell_step: unknown cell family");
}

namespace {

void accumulate(Vector& into, const Vector& from) {
  if (into.empty()) {
    into = from;
  } else {
    axpy(1.0, from, into);
  }
}

}  // namespace

StepGrad cell_step_backward(const CellParams& params, const StepCache& cache,
                            const Vector& d_h, const Vector& d_c,
                            CellParams& grads) {
  if (cache.family != params.family ||
      cache.blocks.size() != params.blocks.size())
    throw InvalidArgument("cell_step_backward: cache/parameter family mismatch");
  if (grads.family != params.family ||
      grads.blocks.size() != params.blocks.size())
    throw InvalidArgument("cell_step_backward: gradient buffer mismatch");
  const size_t d = params.hidden_size();
  if (d_h.size() != d)
    throw InvalidArgument("cell_step_backward: d_h has the wrong length");

  StepGrad out;
  switch (params.family) {
    case CellFamily::kRnn: {
      if (!d_c.empty())
        throw InvalidArgument("cell_step_backward: RNN has no cell state");
      BlockInputGrad g = block_backward(params.blocks[kRnnH], cache.blocks[0],
                                        d_h, grads.blocks[kRnnH]);
      out.d_h_prev = std::move(g.d_z);
      out.d_x = std::move(g.d_x);
      break;
    }
    case CellFamily::kLstm: {
      if (!d_c.empty() && d_c.size() != d)
        throw InvalidArgument("cell_step_backward: d_c has the wrong length");
      const Vector& z = cache.blocks[kLstmZ].out;
      const Vector& i = cache.blocks[kLstmI].out;
      const Vector& f = cache.blocks[kLstmF].out;
      const Vector& o = cache.blocks[kLstmO].out;
      Vector d_z(d), d_i(d), d_f(d), d_o(d);
      out.d_c_prev = Vector(d);
      for (size_t k = 0; k < d; ++k) {
        const double tc = cache.tanh_c[k];
        d_o[k] = d_h[k] * tc;
        double dc = d_h[k] * o[k] * (1.0 - tc * tc);
        if (!d_c.empty()) dc += d_c[k];
        d_i[k] = dc * z[k];
        d_z[k] = dc * i[k];
        d_f[k] = dc * cache.c_prev[k];
        out.d_c_prev[k] = dc * f[k];
      }
      const Vector* d_gate[4] = {&d_z, &d_i, &d_f, &d_o};
      for (size_t b = 0; b < 4; ++b) {
        BlockInputGrad g = block_backward(params.blocks[b], cache.blocks[b],
                                          *d_gate[b], grads.blocks[b]);
        accumulate(out.d_h_prev, g.d_z);
        if (!g.d_x.empty()) accumulate(out.d_x, g.d_x);
      }
      break;
    }
    case CellFamily::kGru: {
      if (!d_c.empty())
        throw InvalidArgument("cell_step_backward: GRU has no cell state");
      const Vector& z = cache.blocks[kGruZ].out;
      const Vector& r = cache.blocks[kGruR].out;
      const Vector& candidate = cache.blocks[kGruH].out;
      Vector d_z(d), d_candidate(d);
      out.d_h_prev = Vector(d);
      for (size_t k = 0; k < d; ++k) {
        d_z[k] = d_h[k] * (candidate[k] - cache.h_prev[k]);
        d_candidate[k] = d_h[k] * z[k];
        out.d_h_prev[k] = d_h[k] * (1.0 - z[k]);
      }
      BlockInputGrad gh = block_backward(params.blocks[kGruH],
                                         cache.blocks[kGruH], d_candidate,
                                         grads.blocks[kGruH]);
      // The candidate block saw r * h_prev as its recurrent input.
      Vector d_r(d);
      for (size_t k = 0; k < d; ++k) {
        d_r[k] = gh.d_z[k] * cache.h_prev[k];
        out.d_h_prev[k] += gh.d_z[k] * r[k];
      }
      BlockInputGrad gr = block_backward(params.blocks[kGruR],
                                         cache.blocks[kGruR], d_r,
                                         grads.blocks[kGruR]);
      BlockInputGrad gz = block_backward(params.blocks[kGruZ],
                                         cache.blocks[kGruZ], d_z,
                                         grads.blocks[kGruZ]);
      axpy(1.0, gr.d_z, out.d_h_prev);
      axpy(1.0, gz.d_z, out.d_h_prev);
      for (BlockInputGrad* g : {&gh, &gr, &gz})
        if (!g->d_x.empty()) accumulate(out.d_x, g->d_x);
      break;
    }
  }
  return out;
}

}  // namespace mirnn
