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

// Training loop, evaluation and checkpoints.
//
// Checkpoint layout (all integers little-endian):
//   8 bytes   magic "MIRNNCKP"
//   8 bytes   header length L
//   L bytes   JSON header: format version, config, vocabulary, tensor
//             names and shapes, optimizer scalars, schedule, epoch, RNG
//             state and the metrics history
//   payload   raw little-endian float64 tensors in header order: model
//             tensors, then Adam first moments, then Adam second moments

#ifndef MIRNN_TRAIN_H_
#define MIRNN_TRAIN_H_

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mirnn/bptt.h"
#include "mirnn/config.h"
#include "mirnn/data.h"
#include "mirnn/optim.h"

namespace mirnn {

inline constexpr int kCheckpointVersion = 1;

struct Dataset {
  CharVocab vocab;
  std::vector<int> train;
  std::vector<int> valid;
  std::vector<int> test;
  size_t unk_valid = 0;
  size_t unk_test = 0;

  const std::vector<int>& split(Split s) const;
};

// Splits the corpus and builds the vocabulary from the training part only.
Dataset make_dataset(const Corpus& corpus, const SplitFractions& fractions);
Dataset load_dataset(const ExperimentConfig& config);

// W and U drawn from uniform[-r_w, r_w) and uniform[-r_u, r_u), readout V
// from uniform[-r_out, r_out), readout bias zero, MI biases from the config.
Model init_model(const ExperimentConfig& config, size_t vocab, Rng& rng);

// BPC over the non-overlapping length-T windows of |tokens|, each unrolled
// from a zero state.
LossReport evaluate(const Model& model, std::span<const int> tokens,
                    size_t seq_len);

struct EpochMetrics {
  size_t epoch = 0;
  std::optional<double> train_bpc;  // absent for epoch 0
  double valid_bpc = 0.0;
  double lr = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

// epoch,train_bpc,valid_bpc,lr
std::string metrics_csv(const std::vector<EpochMetrics>& history);

struct Checkpoint {
  ExperimentConfig config;
  CharVocab vocab;
  Model model;
  AdamState adam;
  LrSchedule schedule;
  size_t epoch = 0;
  double best_valid_bpc = 0.0;
  Rng::State rng_state{};
  std::vector<EpochMetrics> history;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
// Throws IngestionError for a malformed or unsupported container.
Checkpoint parse_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& checkpoint,
                     const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

class Trainer {
 public:
  // Fresh model from config.seed; records the epoch-0 validation BPC.
  Trainer(ExperimentConfig config, Dataset dataset);
  // Continues exactly where |checkpoint| left off.
  Trainer(Checkpoint checkpoint, Dataset dataset);

  // One pass over the shuffled training windows, then validation and the
  // learning-rate schedule. Throws DivergenceError on a non-finite loss or
  // gradient, leaving the previous epoch's state intact.
  const EpochMetrics& run_epoch();

  size_t epoch() const { return epoch_; }
  bool improved_last_epoch() const { return improved_; }
  const Model& model() const { return model_; }
  const ExperimentConfig& config() const { return config_; }
  const Dataset& dataset() const { return dataset_; }
  const std::vector<EpochMetrics>& history() const { return history_; }
  double best_valid_bpc() const { return best_valid_; }
  Checkpoint checkpoint() const;

 private:
  ExperimentConfig config_;
  Dataset dataset_;
  Model model_;
  AdamState adam_;
  LrSchedule schedule_;
  BatchStream stream_;
  size_t epoch_ = 0;
  double best_valid_ = 0.0;
  bool improved_ = false;
  std::vector<EpochMetrics> history_;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  std::ostream* log = nullptr;
};

struct TrainResult {
  std::vector<EpochMetrics> history;
  double best_valid_bpc = 0.0;
  std::filesystem::path metrics_path;
  std::filesystem::path best_checkpoint;
  std::filesystem::path last_checkpoint;
};

// Trains to config.epochs, writing metrics.csv, best.ckpt (lowest
// validation BPC) and last.ckpt under out_dir. On divergence last.ckpt holds
// the last good epoch and DivergenceError propagates.
TrainResult run_train(const ExperimentConfig& config,
                      const TrainOptions& options);

}  // namespace mirnn

#endif  // MIRNN_TRAIN_H_
