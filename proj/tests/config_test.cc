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

#include "mirnn/config.h"

#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mirnn/errors.h"

namespace mirnn {
namespace {

std::string error_of(std::string_view json) {
  try {
    parse_config(json);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST_CASE("defaults") {
  const ExperimentConfig c = parse_config("{}");
  CHECK(c == ExperimentConfig{});
  CHECK(c.mi_init() == MIBiasInit{1, 0.5, 0.5, 0});
  CHECK(c.diagnostics.probes == std::vector<size_t>{1, 5, 10});
  CHECK(c.diagnostics.sweep_r_w == std::vector<double>{0.02, 0.1, 0.3, 0.6});
  CHECK(c.diagnostics.saturation == 0.9);
  CHECK(c.diagnostics.probe_sequences == 512);
  CHECK(c.diagnostics.probe_origin == ProbeOrigin::kStart);
}

TEST_CASE("full config round trip") {
  const std::string text = R"({
    "cell": "gru", "mode": "mi_simple", "hidden": 17, "activation": "sigmoid",
    "seq_len": 9, "batch": 3, "lr": 0.00125, "epochs": 4,
    "mi_init": {"alpha": 2, "beta1": 0.25, "beta2": 0.75, "b": -0.1},
    "init": {"r_w": 0.3, "r_u": 0.01, "r_out": 0.05}, "clip": 5.0, "seed": 99,
    "corpus": "text/corpus.txt", "byte_mode": true,
    "split": {"train": 0.8, "valid": 0.15, "test": 0.05},
    "diagnostics": {"probes": [1, 2], "probe_origin": "final", "probe_sequences": 64, "saturation": 0.95,
                    "bins": 10, "sweep_r_w": [0.02, 0.6], "seeds": [4, 5]}
  })";
  const ExperimentConfig c = parse_config(text);
  CHECK(c.cell == CellFamily::kGru);
  CHECK(c.mode == IntegrationMode::kMiSimple);
  CHECK(c.hidden == 17);
  CHECK(c.mi_init() == MIBiasInit{2, 0.25, 0.75, -0.1});
  CHECK(c.r_u == 0.01);
  CHECK(c.split.valid == 0.15);
  CHECK(c.diagnostics.seeds == std::vector<uint64_t>{4, 5});
  CHECK(c.diagnostics.probe_origin == ProbeOrigin::kFinal);
  CHECK(parse_config(emit_config(c)) == c);
  CHECK(emit_config(parse_config(emit_config(c))) == emit_config(c));
}

TEST_CASE("presets by name") {
  CHECK(parse_config(R"({"mi_init": "ptb-rnn"})").mi_init() == MIBiasInit{2, 0.5, 0.5, 0});
  CHECK(parse_config(R"({"mi_init": "ones"})").mi_init() == MIBiasInit{1, 1, 1, 0});
  const auto c = parse_config(R"({"mi_init": "ones"})");
  CHECK(parse_config(emit_config(c)) == c);
  CHECK(error_of(R"({"mi_init": "hutter"})").find("hutter") != std::string::npos);
}

TEST_CASE("unknown keys are rejected with their name") {
  CHECK(error_of(R"({"hiden": 10})").find("hiden") != std::string::npos);
  CHECK(error_of(R"({"init": {"r_x": 1}})").find("r_x") != std::string::npos);
  CHECK(error_of(R"({"split": {"dev": 0.1}})").find("dev") != std::string::npos);
  CHECK(error_of(R"({"diagnostics": {"probe": [1]}})").find("probe") != std::string::npos);
  CHECK(error_of(R"({"mi_init": {"alpha": 1, "beta1": 1, "beta2": 1, "b": 0, "c": 1}})")
            .find("'c'") != std::string::npos);
}

TEST_CASE("type and value errors") {
  CHECK_FALSE(error_of("{").empty());
  CHECK_FALSE(error_of("[]").empty());
  CHECK_FALSE(error_of(R"({"hidden": "128"})").empty());
  CHECK_FALSE(error_of(R"({"hidden": -1})").empty());
  CHECK_FALSE(error_of(R"({"hidden": 1.5})").empty());
  CHECK_FALSE(error_of(R"({"hidden": 0})").empty());
  CHECK_FALSE(error_of(R"({"seq_len": 0})").empty());
  CHECK_FALSE(error_of(R"({"lr": 0})").empty());
  CHECK_FALSE(error_of(R"({"cell": "transformer"})").empty());
  CHECK_FALSE(error_of(R"({"byte_mode": 1})").empty());
  CHECK_FALSE(error_of(R"({"init": {"r_w": 0}})").empty());
  CHECK_FALSE(error_of(R"({"split": {"train": 0.9, "valid": 0.2}})").empty());
  CHECK(error_of(R"({"seq_len": 5, "diagnostics": {"probes": [10]}})").empty());
  CHECK_FALSE(error_of(R"({"diagnostics": {"saturation": 1.0}})").empty());
  CHECK_FALSE(error_of(R"({"diagnostics": {"seeds": []}})").empty());
  CHECK(error_of(R"({"diagnostics": {"probe_origin": "end"}})").find("end") !=
        std::string::npos);
  CHECK_FALSE(error_of(R"({"mi_init": {"alpha": 1}})").empty());
}

TEST_CASE("load_config resolves the corpus against the config directory") {
  const auto dir = std::filesystem::temp_directory_path() / "mirnn_config_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "c.json") << R"({"corpus": "data/x.txt"})";
  CHECK(load_config(dir / "c.json").corpus == (dir / "data/x.txt").string());
  std::ofstream(dir / "abs.json") << R"({"corpus": "/srv/x.txt"})";
  CHECK(load_config(dir / "abs.json").corpus == "/srv/x.txt");
  CHECK_THROWS_AS(load_config(dir / "missing.json"), ConfigError);
}

}  // namespace
}  // namespace mirnn
