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

#ifndef MIRNN_ERRORS_H_
#define MIRNN_ERRORS_H_

#include <stdexcept>
#include <string>

namespace mirnn {

// Shapes or values handed to a public operation violate its contract.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A configuration (file, preset, sampler range) cannot be honored.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Corpus or vocabulary input could not be read or decoded.
class IngestionError : public std::runtime_error {
 public:
  IngestionError(const std::string& what, long long offset = -1)
      : std::runtime_error(offset >= 0
                               ? what + " (at byte offset " +
                                     std::to_string(offset) + ")"
                               : what),
        offset_(offset) {}

  // Byte offset of the offending input, or -1 when not applicable.
  long long offset() const { return offset_; }

 private:
  long long offset_;
};

// Training produced a non-finite value.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mirnn

#endif  // MIRNN_ERRORS_H_
