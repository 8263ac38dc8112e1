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

// Experiment configuration: a JSON document with a fixed schema. Parsing
// rejects unknown keys and wrong types so a typo cannot silently fall back
// to a default.

#ifndef MIRNN_CONFIG_H_
#define MIRNN_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mirnn/cells.h"
#include "mirnn/data.h"

namespace mirnn {

// Where gradient-norm probe indices count from. kStart: probe t is h_t, the
// t-th state of the window (h_0 is the initial state). kFinal: probe t is
// h_{T-t}, t steps back from the state that makes the scored prediction.
enum class ProbeOrigin { kStart, kFinal };
std::string_view to_string(ProbeOrigin origin);
ProbeOrigin parse_probe_origin(std::string_view name);

struct DiagnosticsConfig {
  std::vector<size_t> probes = {1, 5, 10};
  ProbeOrigin probe_origin = ProbeOrigin::kStart;
  size_t probe_sequences = 512;
  double saturation = 0.9;
  size_t bins = 20;
  std::vector<double> sweep_r_w = {0.02, 0.1, 0.3, 0.6};
  std::vector<uint64_t> seeds = {1, 2, 3};

  bool operator==(const DiagnosticsConfig&) const = default;
};

struct ExperimentConfig {
  CellFamily cell = CellFamily::kRnn;
  IntegrationMode mode = IntegrationMode::kMiGeneral;
  size_t hidden = 128;
  Activation activation = Activation::kTanh;
  size_t seq_len = 50;
  size_t batch = 32;
  double lr = 1e-4;
  size_t epochs = 10;
  // Either a named preset or explicit values; explicit values win.
  std::string mi_preset = "text8-lstm";
  std::optional<MIBiasInit> mi_values;
  double r_w = 0.02;
  double r_u = 0.02;
  double r_out = 0.02;
  // Global-norm gradient clipping threshold; 0 disables it.
  double clip = 0.0;
  uint64_t seed = 1;
  std::string corpus;
  bool byte_mode = false;
  SplitFractions split;
  DiagnosticsConfig diagnostics;

  MIBiasInit mi_init() const;
  // Throws ConfigError naming the offending field.
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

// Throws ConfigError on malformed JSON, unknown keys, type errors or
// invalid values.
ExperimentConfig parse_config(std::string_view json);
// Relative corpus paths are resolved against the config file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);
// Every field, in a fixed order; parse_config(emit_config(c)) == c.
std::string emit_config(const ExperimentConfig& config);

}  // namespace mirnn

#endif  // MIRNN_CONFIG_H_
