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

#include "mirnn/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "mirnn/errors.h"

namespace mirnn {
namespace {

// Decodes one UTF-8 sequence starting at |i|; returns the code point and
// advances |i|, or throws with the offset of the bad lead byte.
char32_t decode_one(std::string_view s, size_t& i) {
  const size_t start = i;
  const auto byte = [&](size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char lead = byte(i);
  size_t len;
  char32_t cp;
  if (lead < 0x80) {
    ++i;
    return lead;
  } else if ((lead & 0xE0) == 0xC0) {
    len = 2;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
    cp = lead & 0x07;
  } else {
    throw IngestionError("invalid UTF-8 lead byte", static_cast<long long>(start));
  }
  if (start + len > s.size())
    throw IngestionError("truncated UTF-8 sequence", static_cast<long long>(start));
  for (size_t k = 1; k < len; ++k) {
    const unsigned char c = byte(start + k);
    if ((c & 0xC0) != 0x80)
      throw IngestionError("invalid UTF-8 continuation byte",
                           static_cast<long long>(start + k));
    cp = (cp << 6) | (c & 0x3F);
  }
  static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))
    throw IngestionError("invalid UTF-8 code point", static_cast<long long>(start));
  i = start + len;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

size_t floor_share(size_t n, double fraction) {
  // The epsilon keeps products such as 100 * 0.29 from rounding down a step.
  return static_cast<size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
}

}  // namespace

Corpus decode_corpus(std::string_view bytes, bool byte_mode) {
  Corpus corpus;
  corpus.byte_mode = byte_mode;
  if (byte_mode) {
    corpus.text.reserve(bytes.size());
    for (char c : bytes) corpus.text.push_back(static_cast<unsigned char>(c));
  } else {
    size_t i = 0;
    if (bytes.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
    corpus.text.reserve(bytes.size() - i);
    while (i < bytes.size()) corpus.text.push_back(decode_one(bytes, i));
  }
  if (corpus.text.empty()) throw IngestionError("corpus is empty");
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, bool byte_mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open corpus '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  try {
    return decode_corpus(bytes, byte_mode);
  } catch (const IngestionError& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

std::string encode_utf8(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t c : text) append_utf8(out, c);
  return out;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "valid") return Split::kValid;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(name) + "'");
}

CorpusSplits split_corpus(std::u32string_view text,
                          const SplitFractions& f) {
  const double sum = f.train + f.valid + f.test;
  if (!(f.train > 0.0) || f.valid < 0.0 || f.test < 0.0 || sum > 1.0 + 1e-9)
    throw ConfigError(
        "split fractions must be non-negative with train > 0 and sum <= 1");
  const size_t n = text.size();
  const size_t n_train = floor_share(n, f.train);
  const size_t n_valid = floor_share(n, f.valid);
  size_t n_test = std::abs(sum - 1.0) <= 1e-9 ? n - n_train - n_valid
                                              : floor_share(n, f.test);
  n_test = std::min(n_test, n - n_train - n_valid);
  CorpusSplits s;
  s.train = std::u32string(text.substr(0, n_train));
  s.valid = std::u32string(text.substr(n_train, n_valid));
  s.test = std::u32string(text.substr(n_train + n_valid, n_test));
  return s;
}

CharVocab CharVocab::FromText(std::u32string_view text) {
  std::vector<char32_t> symbols(text.begin(), text.end());
  std::sort(symbols.begin(), symbols.end());
  symbols.erase(std::unique(symbols.begin(), symbols.end()), symbols.end());
  CharVocab v;
  v.symbols_ = std::move(symbols);
  return v;
}

CharVocab CharVocab::FromSymbols(std::vector<char32_t> symbols) {
  std::sort(symbols.begin(), symbols.end());
  if (std::adjacent_find(symbols.begin(), symbols.end()) != symbols.end())
    throw InvalidArgument("CharVocab: duplicate symbol");
  CharVocab v;
  v.symbols_ = std::move(symbols);
  return v;
}

int CharVocab::encode(char32_t c) const {
  auto it = std::lower_bound(symbols_.begin(), symbols_.end(), c);
  if (it == symbols_.end() || *it != c) return unk_index();
  return static_cast<int>(it - symbols_.begin());
}

std::vector<int> CharVocab::encode(std::u32string_view text,
                                   size_t* unk_count) const {
  std::vector<int> out;
  out.reserve(text.size());
  size_t unk = 0;
  for (char32_t c : text) {
    out.push_back(encode(c));
    if (out.back() == unk_index()) ++unk;
  }
  if (unk_count != nullptr) *unk_count = unk;
  return out;
}

std::u32string CharVocab::decode(std::span<const int> indices) const {
  std::u32string out;
  out.reserve(indices.size());
  for (int k : indices) {
    if (k < 0 || static_cast<size_t>(k) > symbols_.size())
      throw InvalidArgument("CharVocab::decode: index " + std::to_string(k) +
                            " out of range");
    out.push_back(k == unk_index() ? U'\uFFFD' : symbols_[k]);
  }
  return out;
}

std::string CharVocab::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "mirnn-vocab";
  j["version"] = 1;
  auto& arr = j["symbols"] = nlohmann::ordered_json::array();
  for (char32_t c : symbols_) arr.push_back(encode_utf8(std::u32string(1, c)));
  return j.dump();
}

CharVocab CharVocab::FromJson(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("vocab JSON: ") + e.what());
  }
  if (j.value("format", "") != "mirnn-vocab" || j.value("version", 0) != 1 ||
      !j.contains("symbols") || !j["symbols"].is_array())
    throw IngestionError("vocab JSON: expected mirnn-vocab version 1");
  std::vector<char32_t> symbols;
  for (const auto& s : j["symbols"]) {
    if (!s.is_string()) throw IngestionError("vocab JSON: symbol must be a string");
    Corpus c = decode_corpus(s.get<std::string>());
    if (c.text.size() != 1)
      throw IngestionError("vocab JSON: each symbol must be one character");
    symbols.push_back(c.text[0]);
  }
  try {
    return FromSymbols(std::move(symbols));
  } catch (const InvalidArgument& e) {
    throw IngestionError(std::string("vocab JSON: ") + e.what());
  }
}

BatchStream::BatchStream(std::vector<int> tokens, size_t seq_len,
                         size_t batch, Split split, uint64_t seed)
    : tokens_(std::move(tokens)),
      seq_len_(seq_len),
      batch_(batch),
      split_(split),
      rng_(seed) {
  if (seq_len_ == 0 || batch_ == 0)
    throw InvalidArgument("BatchStream: sequence length and batch must be >= 1");
  if (tokens_.size() <= seq_len_)
    throw InvalidArgument("BatchStream: " + std::string(to_string(split)) +
                          " segment of " + std::to_string(tokens_.size()) +
                          " symbols is too short for T=" +
                          std::to_string(seq_len_));
  order_.resize(window_count(tokens_.size(), seq_len_));
  for (size_t k = 0; k < order_.size(); ++k) order_[k] = k;
  cursor_ = 0;
}

void BatchStream::start_epoch(bool shuffle) {
  for (size_t k = 0; k < order_.size(); ++k) order_[k] = k;
  if (shuffle) {
    for (size_t k = order_.size(); k > 1; --k)
      std::swap(order_[k - 1], order_[rng_.below(k)]);
  }
  cursor_ = 0;
}

std::optional<SequenceBatch> BatchStream::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  SequenceBatch b;
  b.split = split_;
  const size_t end = std::min(order_.size(), cursor_ + batch_);
  for (; cursor_ < end; ++cursor_) {
    auto in = window_inputs(order_[cursor_]);
    auto tg = window_targets(order_[cursor_]);
    b.inputs.emplace_back(in.begin(), in.end());
    b.targets.emplace_back(tg.begin(), tg.end());
  }
  return b;
}

std::span<const int> BatchStream::window_inputs(size_t k) const {
  return std::span<const int>(tokens_).subspan(k * seq_len_, seq_len_);
}

std::span<const int> BatchStream::window_targets(size_t k) const {
  return std::span<const int>(tokens_).subspan(k * seq_len_ + 1, seq_len_);
}

}  // namespace mirnn
