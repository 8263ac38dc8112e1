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

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>

#include "json.hpp"
#include "mirnn/errors.h"

namespace mirnn {
namespace {

using Json = nlohmann::ordered_json;

void reject_unknown(const Json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

double get_number(const Json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("'" + key + "' must be a number");
  return v.get<double>();
}

uint64_t get_uint(const Json& v, const std::string& key) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<int64_t>() >= 0))
    throw ConfigError("'" + key + "' must be a non-negative integer");
  return v.get<uint64_t>();
}

std::string get_string(const Json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError("'" + key + "' must be a string");
  return v.get<std::string>();
}

bool get_bool(const Json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError("'" + key + "' must be a boolean");
  return v.get<bool>();
}

MIBiasInit parse_mi_values(const Json& v) {
  reject_unknown(v, {"alpha", "beta1", "beta2", "b"}, "mi_init");
  MIBiasInit mi;
  for (const char* k : {"alpha", "beta1", "beta2", "b"})
    if (!v.contains(k)) throw ConfigError(std::string("mi_init needs '") + k + "'");
  mi.alpha = get_number(v["alpha"], "mi_init.alpha");
  mi.beta1 = get_number(v["beta1"], "mi_init.beta1");
  mi.beta2 = get_number(v["beta2"], "mi_init.beta2");
  mi.b = get_number(v["b"], "mi_init.b");
  return mi;
}

DiagnosticsConfig parse_diagnostics(const Json& v) {
  reject_unknown(v,
                 {"probes", "probe_origin", "probe_sequences", "saturation",
                  "bins", "sweep_r_w", "seeds"},
                 "diagnostics");
  DiagnosticsConfig d;
  if (v.contains("probes")) {
    if (!v["probes"].is_array()) throw ConfigError("'probes' must be an array");
    d.probes.clear();
    for (const auto& p : v["probes"]) d.probes.push_back(get_uint(p, "probes"));
  }
  if (v.contains("probe_origin"))
    d.probe_origin =
        parse_probe_origin(get_string(v["probe_origin"], "probe_origin"));
  if (v.contains("probe_sequences"))
    d.probe_sequences = get_uint(v["probe_sequences"], "probe_sequences");
  if (v.contains("saturation"))
    d.saturation = get_number(v["saturation"], "saturation");
  if (v.contains("bins")) d.bins = get_uint(v["bins"], "bins");
  if (v.contains("sweep_r_w")) {
    if (!v["sweep_r_w"].is_array())
      throw ConfigError("'sweep_r_w' must be an array");
    d.sweep_r_w.clear();
    for (const auto& r : v["sweep_r_w"])
      d.sweep_r_w.push_back(get_number(r, "sweep_r_w"));
  }
  if (v.contains("seeds")) {
    if (!v["seeds"].is_array()) throw ConfigError("'seeds' must be an array");
    d.seeds.clear();
    for (const auto& s : v["seeds"]) d.seeds.push_back(get_uint(s, "seeds"));
  }
  return d;
}

}  // namespace

std::string_view to_string(ProbeOrigin origin) {
  return origin == ProbeOrigin::kStart ? "start" : "final";
}

ProbeOrigin parse_probe_origin(std::string_view name) {
  if (name == "start") return ProbeOrigin::kStart;
  if (name == "final") return ProbeOrigin::kFinal;
  throw ConfigError("unknown probe_origin '" + std::string(name) +
                    "' (expected start or final)");
}

MIBiasInit ExperimentConfig::mi_init() const {
  return mi_values ? *mi_values : mi_bias_preset(mi_preset);
}

void ExperimentConfig::validate() const {
  if (hidden < 1) throw ConfigError("'hidden' must be >= 1");
  if (seq_len < 1) throw ConfigError("'seq_len' must be >= 1");
  if (batch < 1) throw ConfigError("'batch' must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("'lr' must be > 0");
  if (!mi_values) mi_bias_preset(mi_preset);
  for (double r : {r_w, r_u, r_out})
    if (!(r > 0.0) || !std::isfinite(r))
      throw ConfigError("init ranges 'r_w', 'r_u', 'r_out' must be > 0");
  if (clip < 0.0) throw ConfigError("'clip' must be >= 0");
  const double sum = split.train + split.valid + split.test;
  if (!(split.train > 0.0) || split.valid < 0.0 || split.test < 0.0 ||
      sum > 1.0 + 1e-9)
    throw ConfigError("'split' fractions must be >= 0, train > 0, sum <= 1");
  if (diagnostics.probes.empty()) throw ConfigError("'probes' must be non-empty");
  if (!(diagnostics.saturation > 0.0 && diagnostics.saturation < 1.0))
    throw ConfigError("'saturation' must lie in (0, 1)");
  if (diagnostics.bins < 1) throw ConfigError("'bins' must be >= 1");
  if (diagnostics.probe_sequences < 1)
    throw ConfigError("'probe_sequences' must be >= 1");
  for (double r : diagnostics.sweep_r_w)
    if (!(r > 0.0)) throw ConfigError("'sweep_r_w' values must be > 0");
  if (diagnostics.seeds.empty()) throw ConfigError("'seeds' must be non-empty");
}

ExperimentConfig parse_config(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j,
                 {"cell", "mode", "hidden", "activation", "seq_len", "batch",
                  "lr", "epochs", "mi_init", "init", "clip", "seed", "corpus",
                  "byte_mode", "split", "diagnostics"},
                 "config");
  ExperimentConfig c;
  if (j.contains("cell")) c.cell = parse_cell_family(get_string(j["cell"], "cell"));
  if (j.contains("mode"))
    c.mode = parse_integration_mode(get_string(j["mode"], "mode"));
  if (j.contains("hidden")) c.hidden = get_uint(j["hidden"], "hidden");
  if (j.contains("activation"))
    c.activation = parse_activation(get_string(j["activation"], "activation"));
  if (j.contains("seq_len")) c.seq_len = get_uint(j["seq_len"], "seq_len");
  if (j.contains("batch")) c.batch = get_uint(j["batch"], "batch");
  if (j.contains("lr")) c.lr = get_number(j["lr"], "lr");
  if (j.contains("epochs")) c.epochs = get_uint(j["epochs"], "epochs");
  if (j.contains("mi_init")) {
    const Json& mi = j["mi_init"];
    if (mi.is_string()) {
      c.mi_preset = mi.get<std::string>();
    } else {
      c.mi_values = parse_mi_values(mi);
    }
  }
  if (j.contains("init")) {
    const Json& init = j["init"];
    reject_unknown(init, {"r_w", "r_u", "r_out"}, "init");
    if (init.contains("r_w")) c.r_w = get_number(init["r_w"], "r_w");
    if (init.contains("r_u")) c.r_u = get_number(init["r_u"], "r_u");
    if (init.contains("r_out")) c.r_out = get_number(init["r_out"], "r_out");
  }
  if (j.contains("clip")) c.clip = get_number(j["clip"], "clip");
  if (j.contains("seed")) c.seed = get_uint(j["seed"], "seed");
  if (j.contains("corpus")) c.corpus = get_string(j["corpus"], "corpus");
  if (j.contains("byte_mode")) c.byte_mode = get_bool(j["byte_mode"], "byte_mode");
  if (j.contains("split")) {
    const Json& s = j["split"];
    reject_unknown(s, {"train", "valid", "test"}, "split");
    if (s.contains("train")) c.split.train = get_number(s["train"], "split.train");
    if (s.contains("valid")) c.split.valid = get_number(s["valid"], "split.valid");
    if (s.contains("test")) c.split.test = get_number(s["test"], "split.test");
  }
  if (j.contains("diagnostics")) c.diagnostics = parse_diagnostics(j["diagnostics"]);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  ExperimentConfig c;
  try {
    c = parse_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!c.corpus.empty()) {
    std::filesystem::path corpus(c.corpus);
    if (corpus.is_relative())
      c.corpus = (path.parent_path() / corpus).lexically_normal().string();
  }
  return c;
}

std::string emit_config(const ExperimentConfig& c) {
  Json j;
  j["cell"] = to_string(c.cell);
  j["mode"] = to_string(c.mode);
  j["hidden"] = c.hidden;
  j["activation"] = to_string(c.activation);
  j["seq_len"] = c.seq_len;
  j["batch"] = c.batch;
  j["lr"] = c.lr;
  j["epochs"] = c.epochs;
  if (c.mi_values) {
    j["mi_init"] = {{"alpha", c.mi_values->alpha},
                    {"beta1", c.mi_values->beta1},
                    {"beta2", c.mi_values->beta2},
                    {"b", c.mi_values->b}};
  } else {
    j["mi_init"] = c.mi_preset;
  }
  j["init"] = {{"r_w", c.r_w}, {"r_u", c.r_u}, {"r_out", c.r_out}};
  j["clip"] = c.clip;
  j["seed"] = c.seed;
  j["corpus"] = c.corpus;
  j["byte_mode"] = c.byte_mode;
  j["split"] = {{"train", c.split.train},
                {"valid", c.split.valid},
                {"test", c.split.test}};
  j["diagnostics"] = {{"probes", c.diagnostics.probes},
                      {"probe_origin", to_string(c.diagnostics.probe_origin)},
                      {"probe_sequences", c.diagnostics.probe_sequences},
                      {"saturation", c.diagnostics.saturation},
                      {"bins", c.diagnostics.bins},
                      {"sweep_r_w", c.diagnostics.sweep_r_w},
                      {"seeds", c.diagnostics.seeds}};
  return j.dump(2) + "\n";
}

}  // namespace mirnn
