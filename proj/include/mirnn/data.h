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

// Character corpora: decoding, contiguous splitting, vocabulary and
// fixed-length window batching.

#ifndef MIRNN_DATA_H_
#define MIRNN_DATA_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mirnn/tensor.h"

namespace mirnn {

struct Corpus {
  // One element per character (a Unicode code point, or a raw byte in byte
  // mode).
  std::u32string text;
  bool byte_mode = false;
};

// Decodes UTF-8 (strict; a leading BOM is dropped) or raw bytes. Throws
// IngestionError for empty input or malformed UTF-8, with the byte offset.
Corpus decode_corpus(std::string_view bytes, bool byte_mode = false);
Corpus load_corpus(const std::filesystem::path& path, bool byte_mode = false);

std::string encode_utf8(std::u32string_view text);

enum class Split { kTrain, kValid, kTest };
std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct SplitFractions {
  double train = 0.9;
  double valid = 0.05;
  double test = 0.05;

  bool operator==(const SplitFractions&) const = default;
};

struct CorpusSplits {
  std::u32string train;
  std::u32string valid;
  std::u32string test;
};

// Contiguous train -> valid -> test. train and valid get floor(len * f);
// when the fractions sum to one the remainder goes to test, otherwise test
// gets floor(len * f_test) and the tail is unused. Throws ConfigError for
// negative fractions, a zero train fraction or a sum above one.
CorpusSplits split_corpus(std::u32string_view text,
                          const SplitFractions& fractions);

// Symbols sorted by code point, followed by one reserved UNK index that
// absorbs characters never seen when the vocabulary was built.
class CharVocab {
 public:
  CharVocab() = default;
  static CharVocab FromText(std::u32string_view text);
  // Throws InvalidArgument for duplicate symbols.
  static CharVocab FromSymbols(std::vector<char32_t> symbols);

  // Symbol count plus the UNK slot.
  size_t size() const { return symbols_.size() + 1; }
  size_t symbol_count() const { return symbols_.size(); }
  int unk_index() const { return static_cast<int>(symbols_.size()); }
  const std::vector<char32_t>& symbols() const { return symbols_; }

  int encode(char32_t c) const;
  std::vector<int> encode(std::u32string_view text,
                          size_t* unk_count = nullptr) const;
  // UNK decodes to U+FFFD.
  std::u32string decode(std::span<const int> indices) const;

  // {"format": "mirnn-vocab", "version": 1, "symbols": [...]}
  std::string to_json() const;
  static CharVocab FromJson(std::string_view json);

  bool operator==(const CharVocab& other) const {
    return symbols_ == other.symbols_;
  }

 private:
  std::vector<char32_t> symbols_;
};

struct SequenceBatch {
  Split split = Split::kTrain;
  std::vector<std::vector<int>> inputs;
  std::vector<std::vector<int>> targets;

  size_t size() const { return inputs.size(); }
};

// Number of non-overlapping windows of T inputs (plus one shifted target)
// that fit in a segment of |length| symbols.
inline size_t window_count(size_t length, size_t seq_len) {
  return length == 0 ? 0 : (length - 1) / seq_len;
}

// Pull-based stream of mini-batches over non-overlapping windows. Window k
// covers tokens [kT, kT + T]; inputs are its first T symbols and targets the
// last T. start_epoch() reshuffles the window order with the stream's own
// RNG, whose state can be saved and restored.
class BatchStream {
 public:
  // Throws InvalidArgument unless tokens.size() > seq_len, seq_len >= 1 and
  // batch >= 1.
  BatchStream(std::vector<int> tokens, size_t seq_len, size_t batch,
              Split split, uint64_t seed);

  void start_epoch(bool shuffle = true);
  std::optional<SequenceBatch> next();

  size_t windows() const { return order_.size(); }
  size_t seq_len() const { return seq_len_; }
  std::span<const int> window_inputs(size_t k) const;
  std::span<const int> window_targets(size_t k) const;
  const std::vector<size_t>& order() const { return order_; }

  const Rng::State& rng_state() const { return rng_.state(); }
  void set_rng_state(const Rng::State& state) { rng_ = Rng::FromState(state); }

 private:
  std::vector<int> tokens_;
  size_t seq_len_;
  size_t batch_;
  Split split_;
  Rng rng_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
};

}  // namespace mirnn

#endif  // MIRNN_DATA_H_
