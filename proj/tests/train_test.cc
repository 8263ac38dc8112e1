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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "mirnn/errors.h"

namespace mirnn {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mirnn_train_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A small corpus with enough structure to learn something in a few epochs.
fs::path toy_corpus() {
  const fs::path path = fs::temp_directory_path() / "mirnn_train_test_corpus.txt";
  std::string text;
  const char* words[] = {"the ", "cat ", "sat ", "on ", "a ", "mat ", "and ", "ran "};
  uint64_t x = 7;
  for (int i = 0; i < 600; ++i) {
    x = x * 6364136223846793005ULL + 1442695040888963407ULL;
    text += words[(x >> 33) % 8];
  }
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

ExperimentConfig toy_config() {
  ExperimentConfig c;
  c.corpus = toy_corpus().string();
  c.hidden = 12;
  c.seq_len = 10;
  c.batch = 4;
  c.lr = 1e-2;
  c.epochs = 2;
  c.r_w = c.r_u = c.r_out = 0.1;
  c.split = {0.8, 0.1, 0.1};
  return c;
}

TEST_CASE("dataset builds its vocabulary from the training split") {
  Corpus corpus;
  corpus.text = std::u32string(90, U'a') + U"bbbbbxxxxx";
  const Dataset d = make_dataset(corpus, {0.9, 0.05, 0.05});
  CHECK(d.vocab.symbol_count() == 1);
  CHECK(d.train.size() == 90);
  CHECK(d.valid.size() == 5);
  CHECK(d.unk_valid == 5);
  CHECK(d.unk_test == 5);
  CHECK(&d.split(Split::kTest) == &d.test);
}

TEST_CASE("init_model respects ranges and seeds") {
  ExperimentConfig c = toy_config();
  c.r_out = 0.05;
  Rng a(1), b(1);
  const Model m = init_model(c, 9, a);
  CHECK(m.vocab_size() == 9);
  CHECK(max_abs(m.readout.V.span()) < 0.05);
  CHECK(max_abs(m.readout.c.span()) == 0.0);
  const Model n = init_model(c, 9, b);
  CHECK(m.readout.V == n.readout.V);
  CHECK(m.cell.blocks[0].W == n.cell.blocks[0].W);
}

TEST_CASE("evaluate an untrained zero-readout model at log2 V") {
  ExperimentConfig c = toy_config();
  Rng rng(2);
  Model m = init_model(c, 27, rng);
  m.readout.V.fill(0.0);
  std::vector<int> tokens(101);
  for (size_t i = 0; i < tokens.size(); ++i) tokens[i] = static_cast<int>(i % 27);
  const LossReport r = evaluate(m, tokens, 10);
  CHECK(r.count == 100);
  CHECK(std::abs(r.bpc - std::log2(27.0)) <= 1e-10);
  CHECK_THROWS_AS(evaluate(m, std::vector<int>(5, 0), 10), InvalidArgument);
}

TEST_CASE("metrics csv layout") {
  std::vector<EpochMetrics> h{{0, std::nullopt, 4.5, 1e-4}, {1, 3.25, 3.0, 5e-5}};
  CHECK(metrics_csv(h) == "epoch,train_bpc,valid_bpc,lr\n0,NA,4.5,0.0001\n1,3.25,3,5.0000000000000002e-05\n");
  CHECK(metrics_csv({}) == "epoch,train_bpc,valid_bpc,lr\n");
}

TEST_CASE("zero epochs records only the initial validation BPC") {
  ExperimentConfig c = toy_config();
  c.epochs = 0;
  const fs::path dir = scratch_dir("zero");
  const TrainResult r = run_train(c, {dir, std::nullopt, nullptr});
  REQUIRE(r.history.size() == 1);
  CHECK(r.history[0].epoch == 0);
  CHECK_FALSE(r.history[0].train_bpc.has_value());
  const Checkpoint ck = load_checkpoint(r.last_checkpoint);
  CHECK(ck.epoch == 0);
  CHECK(ck.adam.step == 0);
  Rng rng(c.seed);
  const Dataset data = load_dataset(c);
  const Model fresh = init_model(c, data.vocab.size(), rng);
  CHECK(ck.model.readout.V == fresh.readout.V);
  CHECK(ck.model.cell.blocks[0].U == fresh.cell.blocks[0].U);
  CHECK(read_bytes(r.metrics_path).find("0,NA,") != std::string::npos);
}

TEST_CASE("training lowers the validation BPC and writes checkpoints") {
  ExperimentConfig c = toy_config();
  c.epochs = 4;
  const fs::path dir = scratch_dir("learn");
  const TrainResult r = run_train(c, {dir, std::nullopt, nullptr});
  REQUIRE(r.history.size() == 5);
  CHECK(r.history.back().valid_bpc < r.history.front().valid_bpc - 0.5);
  CHECK(r.history[1].train_bpc.has_value());
  CHECK(fs::exists(r.best_checkpoint));
  const Checkpoint best = load_checkpoint(r.best_checkpoint);
  CHECK(best.best_valid_bpc == r.best_valid_bpc);
  const Dataset data = load_dataset(c);
  CHECK(evaluate(best.model, data.valid, c.seq_len).bpc == r.best_valid_bpc);
}

TEST_CASE("checkpoint bytes round trip") {
  ExperimentConfig c = toy_config();
  Trainer t(c, load_dataset(c));
  t.run_epoch();
  const Checkpoint ck = t.checkpoint();
  const std::string bytes = serialize_checkpoint(ck);
  CHECK(bytes.substr(0, 8) == "MIRNNCKP");
  const Checkpoint back = parse_checkpoint(bytes);
  CHECK(back.config == ck.config);
  CHECK(back.vocab == ck.vocab);
  CHECK(back.epoch == 1);
  CHECK(back.adam.step == ck.adam.step);
  CHECK(back.adam.m == ck.adam.m);
  CHECK(back.adam.v == ck.adam.v);
  CHECK(back.rng_state == ck.rng_state);
  CHECK(back.history == ck.history);
  const auto a = back.model.tensors();
  const auto b = ck.model.tensors();
  for (size_t k = 0; k < a.size(); ++k)
    CHECK(std::equal(a[k].begin(), a[k].end(), b[k].begin()));
  CHECK(serialize_checkpoint(back) == bytes);
}

TEST_CASE("malformed checkpoints are rejected") {
  ExperimentConfig c = toy_config();
  const std::string bytes = serialize_checkpoint(Trainer(c, load_dataset(c)).checkpoint());
  CHECK_THROWS_AS(parse_checkpoint("garbage"), IngestionError);
  CHECK_THROWS_AS(parse_checkpoint("XIRNNCKP" + bytes.substr(8)), IngestionError);
  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 8)), IngestionError);
  CHECK_THROWS_AS(parse_checkpoint(bytes + "x"), IngestionError);
  std::string bad_len = bytes;
  bad_len[15] = '\x7f';
  CHECK_THROWS_AS(parse_checkpoint(bad_len), IngestionError);
  std::string bad_version = bytes;
  const size_t pos = bad_version.find("\"version\":1");
  REQUIRE(pos != std::string::npos);
  bad_version[pos + 10] = '9';
  CHECK_THROWS_AS(parse_checkpoint(bad_version), IngestionError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), IngestionError);
}

TEST_CASE("resuming equals an uninterrupted run") {
  ExperimentConfig c = toy_config();
  c.epochs = 3;
  const fs::path straight = scratch_dir("straight");
  run_train(c, {straight, std::nullopt, nullptr});

  const fs::path split = scratch_dir("split");
  ExperimentConfig first = c;
  first.epochs = 1;
  run_train(first, {split, std::nullopt, nullptr});
  run_train(c, {split, split / "last.ckpt", nullptr});

  CHECK(read_bytes(straight / "metrics.csv") == read_bytes(split / "metrics.csv"));
  CHECK(read_bytes(straight / "last.ckpt") == read_bytes(split / "last.ckpt"));
  CHECK(read_bytes(straight / "best.ckpt") == read_bytes(split / "best.ckpt"));
}

TEST_CASE("resume rejects a different config") {
  ExperimentConfig c = toy_config();
  c.epochs = 1;
  const fs::path dir = scratch_dir("mismatch");
  run_train(c, {dir, std::nullopt, nullptr});
  ExperimentConfig other = c;
  other.hidden = 13;
  CHECK_THROWS_AS(run_train(other, {dir, dir / "last.ckpt", nullptr}), ConfigError);
}

TEST_CASE("identical runs produce identical files") {
  ExperimentConfig c = toy_config();
  const fs::path a = scratch_dir("det_a"), b = scratch_dir("det_b");
  run_train(c, {a, std::nullopt, nullptr});
  run_train(c, {b, std::nullopt, nullptr});
  for (const char* f : {"metrics.csv", "best.ckpt", "last.ckpt"})
    CHECK(read_bytes(a / f) == read_bytes(b / f));
  ExperimentConfig d = c;
  d.seed = 2;
  const fs::path e = scratch_dir("det_e");
  run_train(d, {e, std::nullopt, nullptr});
  CHECK(read_bytes(a / "metrics.csv") != read_bytes(e / "metrics.csv"));
}

TEST_CASE("divergence keeps the last good checkpoint") {
  ExperimentConfig c = toy_config();
  c.activation = Activation::kIdentity;
  c.mode = IntegrationMode::kAdditive;
  c.lr = 1e30;
  c.seq_len = 30;
  c.epochs = 5;
  const fs::path dir = scratch_dir("diverge");
  CHECK_THROWS_AS(run_train(c, {dir, std::nullopt, nullptr}), DivergenceError);
  const Checkpoint last = load_checkpoint(dir / "last.ckpt");
  for (auto t : last.model.tensors()) CHECK(all_finite(t));
  const std::string csv = read_bytes(dir / "metrics.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(last.epoch + 2));
}

TEST_CASE("too short a validation split is a config error") {
  ExperimentConfig c = toy_config();
  c.split = {1.0, 0.0, 0.0};
  CHECK_THROWS_AS(Trainer(c, load_dataset(c)), ConfigError);
}

}  // namespace
}  // namespace mirnn
