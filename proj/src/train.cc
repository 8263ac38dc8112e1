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

#include "mirnn/train.h"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <ostream>

#include "json.hpp"
#include "mirnn/errors.h"

namespace mirnn {
namespace {

using Json = nlohmann::ordered_json;

constexpr char kMagic[8] = {'M', 'I', 'R', 'N', 'N', 'C', 'K', 'P'};
constexpr uint64_t kStreamSeedSalt = 0x5EEDBA7C4E5ULL;

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint64_t get_u64(std::string_view in, size_t pos) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

void put_doubles(std::string& out, std::span<const double> values) {
  for (double x : values) put_u64(out, std::bit_cast<uint64_t>(x));
}

std::vector<std::string> block_names(CellFamily family) {
  switch (family) {
    case CellFamily::kRnn: return {"h"};
    case CellFamily::kLstm: return {"z", "i", "f", "o"};
    case CellFamily::kGru: return {"z", "r", "h"};
  }
  return {};
}

// Names and shapes of model.tensors(), in the same order.
Json tensor_manifest(const Model& model) {
  Json list = Json::array();
  const auto names = block_names(model.cell.family);
  for (size_t k = 0; k < model.cell.blocks.size(); ++k) {
    const MIParams& p = model.cell.blocks[k];
    const std::string prefix = "cell." + names[k] + ".";
    list.push_back({{"name", prefix + "W"}, {"shape", {p.W.rows(), p.W.cols()}}});
    list.push_back({{"name", prefix + "U"}, {"shape", {p.U.rows(), p.U.cols()}}});
    list.push_back({{"name", prefix + "b"}, {"shape", {p.b.size()}}});
    if (p.mode == IntegrationMode::kMiGeneral) {
      for (const char* v : {"alpha", "beta1", "beta2"})
        list.push_back({{"name", prefix + v}, {"shape", {p.out_size()}}});
    }
  }
  list.push_back({{"name", "readout.V"},
                  {"shape", {model.readout.V.rows(), model.readout.V.cols()}}});
  list.push_back({{"name", "readout.c"}, {"shape", {model.readout.c.size()}}});
  return list;
}

Model empty_model(const ExperimentConfig& config, size_t vocab) {
  Model m;
  m.cell = CellParams::Zeros(config.cell, config.mode, config.activation,
                             config.hidden, vocab);
  m.readout.V = Matrix(vocab, config.hidden);
  m.readout.c = Vector(vocab);
  return m;
}

Json optional_number(std::optional<double> v) {
  return v ? Json(*v) : Json(nullptr);
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

const std::vector<int>& Dataset::split(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kValid: return valid;
    case Split::kTest: return test;
  }
  return train;
}

Dataset make_dataset(const Corpus& corpus, const SplitFractions& fractions) {
  CorpusSplits parts = split_corpus(corpus.text, fractions);
  Dataset d;
  d.vocab = CharVocab::FromText(parts.train);
  d.train = d.vocab.encode(parts.train);
  d.valid = d.vocab.encode(parts.valid, &d.unk_valid);
  d.test = d.vocab.encode(parts.test, &d.unk_test);
  return d;
}

Dataset load_dataset(const ExperimentConfig& config) {
  if (config.corpus.empty()) throw ConfigError("config has no 'corpus' path");
  return make_dataset(load_corpus(config.corpus, config.byte_mode), config.split);
}

Model init_model(const ExperimentConfig& config, size_t vocab, Rng& rng) {
  CellInit init{UniformRange::Symmetric(config.r_w),
                UniformRange::Symmetric(config.r_u), config.mi_init()};
  Model m;
  m.cell = init_cell(config.cell, config.mode, config.activation, config.hidden,
                     vocab, init, rng);
  m.readout.V = sample_matrix(rng, UniformRange::Symmetric(config.r_out), vocab,
                              config.hidden);
  m.readout.c = Vector(vocab);
  return m;
}

LossReport evaluate(const Model& model, std::span<const int> tokens,
                    size_t seq_len) {
  const size_t windows = window_count(tokens.size(), seq_len);
  if (windows == 0)
    throw InvalidArgument("evaluate: segment of " + std::to_string(tokens.size()) +
                          " symbols holds no window of T=" + std::to_string(seq_len));
  const CellState h0 = CellState::Zeros(model.cell.family, model.cell.hidden_size());
  LossReport total;
  for (size_t k = 0; k < windows; ++k) {
    auto in = tokens.subspan(k * seq_len, seq_len);
    auto tg = tokens.subspan(k * seq_len + 1, seq_len);
    total = merge(total, loss_bpc(unroll_forward(model, in, h0), tg));
  }
  return total;
}

std::string metrics_csv(const std::vector<EpochMetrics>& history) {
  std::string out = "epoch,train_bpc,valid_bpc,lr\n";
  for (const auto& m : history) {
    out += std::to_string(m.epoch) + ",";
    out += m.train_bpc ? format_double(*m.train_bpc) : "NA";
    out += "," + format_double(m.valid_bpc) + "," + format_double(m.lr) + "\n";
  }
  return out;
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  Json h;
  h["format"] = "mirnn-checkpoint";
  h["version"] = kCheckpointVersion;
  h["config"] = Json::parse(emit_config(ck.config));
  h["vocab"] = Json::parse(ck.vocab.to_json());
  h["tensors"] = tensor_manifest(ck.model);
  h["adam"] = {{"step", ck.adam.step},
               {"lr", ck.adam.lr},
               {"beta1", ck.adam.beta1},
               {"beta2", ck.adam.beta2},
               {"eps", ck.adam.eps}};
  h["schedule"] = {{"patience", ck.schedule.patience},
                   {"factor", ck.schedule.factor},
                   {"best", std::isfinite(ck.schedule.best)
                                ? Json(ck.schedule.best)
                                : Json(nullptr)},
                   {"epochs_without_improvement",
                    ck.schedule.epochs_without_improvement},
                   {"halvings", ck.schedule.halvings}};
  h["epoch"] = ck.epoch;
  h["best_valid_bpc"] = ck.best_valid_bpc;
  Json rng = Json::array();
  for (uint64_t s : ck.rng_state) rng.push_back(hex64(s));
  h["rng_state"] = rng;
  Json hist = Json::array();
  for (const auto& m : ck.history)
    hist.push_back({{"epoch", m.epoch},
                    {"train_bpc", optional_number(m.train_bpc)},
                    {"valid_bpc", m.valid_bpc},
                    {"lr", m.lr}});
  h["history"] = hist;

  const std::string header = h.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, header.size());
  out += header;
  const auto tensors = ck.model.tensors();
  if (ck.adam.m.size() != tensors.size() || ck.adam.v.size() != tensors.size())
    throw InvalidArgument("serialize_checkpoint: optimizer state does not match model");
  for (auto t : tensors) put_doubles(out, t);
  for (const auto& m : ck.adam.m) put_doubles(out, m);
  for (const auto& v : ck.adam.v) put_doubles(out, v);
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw IngestionError("not a mirnn checkpoint (bad magic)");
  const uint64_t header_len = get_u64(bytes, 8);
  if (header_len > bytes.size() - 16)
    throw IngestionError("checkpoint header length exceeds file size");
  Json h;
  try {
    h = Json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("checkpoint header: ") + e.what());
  }
  if (h.value("format", "") != "mirnn-checkpoint")
    throw IngestionError("checkpoint header: wrong format tag");
  if (h.value("version", 0) != kCheckpointVersion)
    throw IngestionError("unsupported checkpoint version " +
                         std::to_string(h.value("version", 0)));

  Checkpoint ck;
  try {
    ck.config = parse_config(h["config"].dump());
  } catch (const ConfigError& e) {
    throw IngestionError(std::string("checkpoint config: ") + e.what());
  }
  ck.vocab = CharVocab::FromJson(h["vocab"].dump());
  ck.model = empty_model(ck.config, ck.vocab.size());
  if (tensor_manifest(ck.model) != h["tensors"])
    throw IngestionError("checkpoint tensor manifest does not match its config");

  const Json& adam = h["adam"];
  ck.adam.step = adam["step"].get<size_t>();
  ck.adam.lr = adam["lr"].get<double>();
  ck.adam.beta1 = adam["beta1"].get<double>();
  ck.adam.beta2 = adam["beta2"].get<double>();
  ck.adam.eps = adam["eps"].get<double>();
  const Json& sched = h["schedule"];
  ck.schedule.patience = sched["patience"].get<size_t>();
  ck.schedule.factor = sched["factor"].get<double>();
  ck.schedule.best = sched["best"].is_null()
                         ? std::numeric_limits<double>::infinity()
                         : sched["best"].get<double>();
  ck.schedule.epochs_without_improvement =
      sched["epochs_without_improvement"].get<size_t>();
  ck.schedule.halvings = sched["halvings"].get<size_t>();
  ck.epoch = h["epoch"].get<size_t>();
  ck.best_valid_bpc = h["best_valid_bpc"].get<double>();
  const Json& rng = h["rng_state"];
  if (!rng.is_array() || rng.size() != 4)
    throw IngestionError("checkpoint rng_state must hold 4 words");
  for (size_t i = 0; i < 4; ++i)
    ck.rng_state[i] = std::stoull(rng[i].get<std::string>(), nullptr, 16);
  for (const auto& m : h["history"]) {
    EpochMetrics e;
    e.epoch = m["epoch"].get<size_t>();
    if (!m["train_bpc"].is_null()) e.train_bpc = m["train_bpc"].get<double>();
    e.valid_bpc = m["valid_bpc"].get<double>();
    e.lr = m["lr"].get<double>();
    ck.history.push_back(e);
  }

  size_t pos = 16 + header_len;
  auto read_into = [&](std::span<double> dst) {
    if (bytes.size() - pos < dst.size() * 8)
      throw IngestionError("checkpoint payload is truncated",
                           static_cast<long long>(pos));
    for (double& x : dst) {
      x = std::bit_cast<double>(get_u64(bytes, pos));
      pos += 8;
    }
  };
  auto tensors = ck.model.tensors();
  for (auto t : tensors) read_into(t);
  for (auto t : tensors) {
    ck.adam.m.emplace_back(t.size());
    read_into(ck.adam.m.back());
  }
  for (auto t : tensors) {
    ck.adam.v.emplace_back(t.size());
    read_into(ck.adam.v.back());
  }
  if (pos != bytes.size())
    throw IngestionError("checkpoint has trailing bytes", static_cast<long long>(pos));
  return ck;
}

void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestionError("cannot write checkpoint '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IngestionError("short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  try {
    return parse_checkpoint(bytes);
  } catch (const IngestionError& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

Trainer::Trainer(ExperimentConfig config, Dataset dataset)
    : config_(std::move(config)),
      dataset_(std::move(dataset)),
      stream_(dataset_.train, config_.seq_len, config_.batch, Split::kTrain,
              config_.seed ^ kStreamSeedSalt) {
  config_.validate();
  Rng rng(config_.seed);
  model_ = init_model(config_, dataset_.vocab.size(), rng);
  adam_ = make_adam(model_.tensors(), config_.lr);
  if (window_count(dataset_.valid.size(), config_.seq_len) == 0)
    throw ConfigError("validation split is too short for seq_len " +
                      std::to_string(config_.seq_len));
  EpochMetrics m;
  m.epoch = 0;
  m.valid_bpc = evaluate(model_, dataset_.valid, config_.seq_len).bpc;
  m.lr = adam_.lr;
  history_.push_back(m);
  best_valid_ = m.valid_bpc;
  improved_ = true;
}

Trainer::Trainer(Checkpoint ck, Dataset dataset)
    : config_(std::move(ck.config)),
      dataset_(std::move(dataset)),
      model_(std::move(ck.model)),
      adam_(std::move(ck.adam)),
      schedule_(ck.schedule),
      stream_(dataset_.train, config_.seq_len, config_.batch, Split::kTrain, 0),
      epoch_(ck.epoch),
      best_valid_(ck.best_valid_bpc),
      history_(std::move(ck.history)) {
  if (!(dataset_.vocab == ck.vocab))
    throw IngestionError("checkpoint vocabulary does not match the corpus");
  stream_.set_rng_state(ck.rng_state);
}

const EpochMetrics& Trainer::run_epoch() {
  const Model saved_model = model_;
  const AdamState saved_adam = adam_;
  const Rng::State saved_rng = stream_.rng_state();
  try {
    stream_.start_epoch(true);
    const CellState h0 =
        CellState::Zeros(model_.cell.family, model_.cell.hidden_size());
    Model grads = Model::ZerosLike(model_);
    LossReport epoch_loss;
    while (auto batch = stream_.next()) {
      for (auto t : grads.tensors()) std::fill(t.begin(), t.end(), 0.0);
      LossReport batch_loss;
      for (size_t b = 0; b < batch->size(); ++b) {
        UnrollRecord rec = unroll_forward(model_, batch->inputs[b], h0);
        BackwardResult res = backward_through_time(
            model_, rec, batch->targets[b], BackwardOptions{}, grads);
        batch_loss = merge(batch_loss, res.loss);
      }
      if (!std::isfinite(batch_loss.nll_nats))
        throw DivergenceError("training loss became non-finite in epoch " +
                              std::to_string(epoch_ + 1));
      const double inv = 1.0 / static_cast<double>(batch_loss.count);
      for (auto t : grads.tensors())
        for (double& g : t) g *= inv;
      if (config_.clip > 0.0) clip_global_norm(grads, config_.clip);
      auto params = model_.tensors();
      auto grad_views = static_cast<const Model&>(grads).tensors();
      adam_apply(adam_, params, grad_views);
      epoch_loss = merge(epoch_loss, batch_loss);
    }

    EpochMetrics m;
    m.epoch = epoch_ + 1;
    m.train_bpc = epoch_loss.bpc;
    m.valid_bpc = evaluate(model_, dataset_.valid, config_.seq_len).bpc;
    if (!std::isfinite(m.valid_bpc))
      throw DivergenceError("validation BPC became non-finite in epoch " +
                            std::to_string(m.epoch));
    schedule_step(schedule_, m.valid_bpc, adam_.lr);
    m.lr = adam_.lr;
    improved_ = m.valid_bpc < best_valid_;
    if (improved_) best_valid_ = m.valid_bpc;
    ++epoch_;
    history_.push_back(m);
    return history_.back();
  } catch (const DivergenceError&) {
    model_ = saved_model;
    adam_ = saved_adam;
    stream_.set_rng_state(saved_rng);
    throw;
  }
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ck;
  ck.config = config_;
  ck.vocab = dataset_.vocab;
  ck.model = model_;
  ck.adam = adam_;
  ck.schedule = schedule_;
  ck.epoch = epoch_;
  ck.best_valid_bpc = best_valid_;
  ck.rng_state = stream_.rng_state();
  ck.history = history_;
  return ck;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  out << text;
}

ExperimentConfig without_epochs(ExperimentConfig c) {
  c.epochs = 0;
  return c;
}

}  // namespace

TrainResult run_train(const ExperimentConfig& config,
                      const TrainOptions& options) {
  std::filesystem::create_directories(options.out_dir);
  TrainResult result;
  result.metrics_path = options.out_dir / "metrics.csv";
  result.best_checkpoint = options.out_dir / "best.ckpt";
  result.last_checkpoint = options.out_dir / "last.ckpt";

  std::optional<Trainer> trainer;
  if (options.resume) {
    Checkpoint ck = load_checkpoint(*options.resume);
    if (!(without_epochs(ck.config) == without_epochs(config)))
      throw ConfigError("resume: config differs from the checkpoint's (only "
                        "'epochs' may change)");
    ck.config.epochs = config.epochs;
    Dataset data = load_dataset(ck.config);
    trainer.emplace(std::move(ck), std::move(data));
  } else {
    trainer.emplace(config, load_dataset(config));
    save_checkpoint(trainer->checkpoint(), result.last_checkpoint);
    save_checkpoint(trainer->checkpoint(), result.best_checkpoint);
  }
  auto log_epoch = [&](const EpochMetrics& m) {
    if (options.log == nullptr) return;
    *options.log << "epoch " << m.epoch << " train_bpc "
                 << (m.train_bpc ? format_double(*m.train_bpc) : "NA")
                 << " valid_bpc " << format_double(m.valid_bpc) << " lr "
                 << format_double(m.lr) << "\n";
    options.log->flush();
  };
  if (!options.resume) log_epoch(trainer->history().back());
  write_text(result.metrics_path, metrics_csv(trainer->history()));

  while (trainer->epoch() < config.epochs) {
    try {
      log_epoch(trainer->run_epoch());
    } catch (const DivergenceError&) {
      write_text(result.metrics_path, metrics_csv(trainer->history()));
      throw;
    }
    const Checkpoint ck = trainer->checkpoint();
    save_checkpoint(ck, result.last_checkpoint);
    if (trainer->improved_last_epoch()) save_checkpoint(ck, result.best_checkpoint);
    write_text(result.metrics_path, metrics_csv(trainer->history()));
  }
  result.history = trainer->history();
  result.best_valid_bpc = trainer->best_valid_bpc();
  return result;
}

}  // namespace mirnn
