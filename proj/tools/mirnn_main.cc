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

// mirnn: train, evaluate, diagnose and verify MI recurrent networks.
//
// Exit codes: 0 success, 1 unexpected error, 2 bad configuration or usage,
// 3 unreadable or malformed input file, 4 training divergence, 5 a
// verification check failed.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mirnn/config.h"
#include "mirnn/diagnostics.h"
#include "mirnn/errors.h"
#include "mirnn/train.h"
#include "mirnn/verify.h"

namespace {

enum ExitCode {
  kOk = 0,
  kUnexpected = 1,
  kConfigExit = 2,
  kIngestionExit = 3,
  kDivergenceExit = 4,
  kVerifyExit = 5,
};

std::filesystem::path output_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("MIRNN_OUT_DIR"); env != nullptr && *env != '\0')
    return env;
  return "mirnn_out";
}

int cmd_train(const std::string& config_path, const std::string& resume,
              const std::string& out) {
  mirnn::TrainOptions options;
  options.out_dir = output_dir(out);
  if (!resume.empty()) options.resume = resume;
  options.log = &std::cerr;
  const auto result = mirnn::run_train(mirnn::load_config(config_path), options);
  std::cout << "best valid BPC " << result.best_valid_bpc << "\n"
            << "metrics " << result.metrics_path.string() << "\n"
            << "checkpoint " << result.best_checkpoint.string() << "\n";
  return kOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& split_name) {
  const mirnn::Split split = mirnn::parse_split(split_name);
  if (split == mirnn::Split::kTrain)
    throw mirnn::ConfigError("eval --split must be valid or test");
  const mirnn::Checkpoint ck = mirnn::load_checkpoint(ckpt_path);
  const mirnn::Dataset data = mirnn::load_dataset(ck.config);
  if (!(data.vocab == ck.vocab))
    throw mirnn::IngestionError("checkpoint vocabulary does not match the corpus");
  const auto& tokens = data.split(split);
  const mirnn::LossReport r = mirnn::evaluate(ck.model, tokens, ck.config.seq_len);
  nlohmann::ordered_json j;
  j["split"] = split_name;
  j["epoch"] = ck.epoch;
  j["bpc"] = r.bpc;
  j["nll_nats"] = r.nll_nats;
  j["characters"] = r.count;
  j["unknown"] = split == mirnn::Split::kValid ? data.unk_valid : data.unk_test;
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_diagnose(const std::string& config_path, const std::string& experiment,
                 const std::string& out) {
  const auto report =
      mirnn::run_diagnose(mirnn::load_config(config_path), experiment, &std::cerr);
  const auto dir = output_dir(out);
  mirnn::emit_report(report, dir);
  std::cout << "report written to " << dir.string() << "\n";
  return kOk;
}

int cmd_verify(uint64_t seed, const std::string& out) {
  mirnn::VerifyOptions options;
  options.seed = seed;
  const auto checks = mirnn::run_verify(options);
  const std::string manifest = mirnn::verify_manifest(checks, seed);
  std::cout << manifest;
  const auto dir = output_dir(out);
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "verify.json") << manifest;
  return mirnn::all_passed(checks) ? kOk : kVerifyExit;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiplicative-integration recurrent networks"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out;
  app.add_option("--out", out, "Output directory (default $MIRNN_OUT_DIR or ./mirnn_out)");

  std::string config_path, resume, ckpt, split, experiment;
  uint64_t seed = 1;

  auto* train = app.add_subcommand("train", "Train a character-level model");
  train->add_option("--config", config_path, "Experiment config (JSON)")->required();
  train->add_option("--resume", resume, "Checkpoint to continue from");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  eval->add_option("--split", split, "valid or test")
      ->required()
      ->check(CLI::IsMember({"valid", "test"}));

  auto* diagnose = app.add_subcommand("diagnose", "Run a diagnostic experiment");
  diagnose->add_option("--config", config_path, "Experiment config (JSON)")->required();
  diagnose->add_option("--experiment", experiment, "norms, hist, sweep or curves")
      ->required()
      ->check(CLI::IsMember({"norms", "hist", "sweep", "curves"}));

  auto* verify = app.add_subcommand("verify", "Run the oracle suite");
  verify->add_option("--seed", seed, "First instance seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigExit;
  }

  try {
    if (*train) return cmd_train(config_path, resume, out);
    if (*eval) return cmd_eval(ckpt, split);
    if (*diagnose) return cmd_diagnose(config_path, experiment, out);
    if (*verify) return cmd_verify(seed, out);
  } catch (const mirnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigExit;
  } catch (const mirnn::IngestionError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kIngestionExit;
  } catch (const mirnn::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kDivergenceExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexpected;
  }
  return kUnexpected;
}
