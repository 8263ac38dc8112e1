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

#include "mirnn/diagnostics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>

#include "json.hpp"
#include "mirnn/errors.h"

namespace mirnn {
namespace {

using Json = nlohmann::ordered_json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IngestionError("short write to '" + path.string() + "'");
}

}  // namespace

ExperimentConfig ModelSpec::apply(ExperimentConfig base) const {
  base.cell = cell;
  base.mode = mode;
  base.activation = activation;
  return base;
}

std::vector<size_t> probe_windows(size_t tokens, size_t seq_len, size_t count) {
  const size_t n = std::min(window_count(tokens, seq_len), count);
  std::vector<size_t> out(n);
  for (size_t k = 0; k < n; ++k) out[k] = k;
  return out;
}

size_t probe_state(size_t t, size_t seq_len, ProbeOrigin origin) {
  if (t > seq_len)
    throw InvalidArgument("probe t=" + std::to_string(t) +
                          " exceeds the window length " +
                          std::to_string(seq_len));
  return origin == ProbeOrigin::kStart ? t : seq_len - t;
}

std::vector<double> mean_log_norms(const Model& model,
                                   std::span<const int> tokens, size_t seq_len,
                                   std::span<const size_t> windows,
                                   std::span<const size_t> probes,
                                   ProbeOrigin origin) {
  std::vector<size_t> states;
  for (size_t t : probes) states.push_back(probe_state(t, seq_len, origin));
  const CellState h0 = CellState::Zeros(model.cell.family, model.cell.hidden_size());
  BackwardOptions options;
  options.scope = LossScope::kFinalStep;
  Model scratch = Model::ZerosLike(model);
  std::vector<double> sums(probes.size(), 0.0);
  std::vector<size_t> used(probes.size(), 0);
  for (size_t w : windows) {
    const size_t start = w * seq_len;
    if (start + seq_len >= tokens.size())
      throw InvalidArgument("probe window " + std::to_string(w) +
                            " runs past the end of the tokens");
    UnrollRecord rec =
        unroll_forward(model, tokens.subspan(start, seq_len), h0);
    BackwardResult res = backward_through_time(
        model, rec, tokens.subspan(start + 1, seq_len), options, scratch);
    for (size_t p = 0; p < probes.size(); ++p) {
      const double v = res.trace.log_norms[states[p]];
      if (v == kLogZeroSentinel) continue;
      sums[p] += v;
      ++used[p];
    }
  }
  std::vector<double> out(probes.size());
  for (size_t p = 0; p < probes.size(); ++p)
    out[p] = used[p] == 0 ? kLogZeroSentinel
                          : sums[p] / static_cast<double>(used[p]);
  return out;
}

double log_norm_via_jacobians(const Model& model, std::span<const int> inputs,
                              std::span<const int> targets, size_t t,
                              ProbeOrigin origin) {
  const size_t steps = inputs.size();
  const size_t state = probe_state(t, steps, origin);
  const CellState h0 = CellState::Zeros(model.cell.family, model.cell.hidden_size());
  UnrollRecord rec = unroll_forward(model, inputs, h0);
  BackwardOptions options;
  options.scope = LossScope::kFinalStep;
  Model scratch = Model::ZerosLike(model);
  BackwardResult res = backward_through_time(model, rec, targets, options, scratch);
  Vector g = res.d_h[steps];
  if (state < steps) g = matvec(jacobian_product(model.cell, rec, steps, state), g);
  const double n = norm2(g);
  return n > 0.0 ? std::log(n) : kLogZeroSentinel;
}

std::vector<NormCurve> gradient_norm_experiment(
    const ExperimentConfig& base, const Dataset& data,
    const std::vector<ModelSpec>& specs) {
  const auto& probes = base.diagnostics.probes;
  const std::vector<size_t> windows = probe_windows(
      data.train.size(), base.seq_len, base.diagnostics.probe_sequences);
  std::vector<NormCurve> curves;
  for (const ModelSpec& spec : specs) {
    NormCurve curve{spec.tag, {}};
    auto record = [&](const Model& model, size_t epoch) {
      const auto values =
          mean_log_norms(model, data.train, base.seq_len, windows, probes,
                         base.diagnostics.probe_origin);
      for (size_t p = 0; p < probes.size(); ++p)
        curve.points.push_back({epoch, probes[p], values[p]});
    };
    Trainer trainer(spec.apply(base), data);
    record(trainer.model(), 0);
    while (trainer.epoch() < base.epochs) {
      trainer.run_epoch();
      record(trainer.model(), trainer.epoch());
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

ActivationHistogram ActivationHistogram::Empty(size_t bins, double threshold) {
  if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
  ActivationHistogram h;
  h.edges.resize(bins + 1);
  for (size_t i = 0; i <= bins; ++i)
    h.edges[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  h.threshold = threshold;
  return h;
}

void ActivationHistogram::add(double value) {
  const size_t bins = counts.size();
  const double pos = (value + 1.0) * 0.5 * static_cast<double>(bins);
  size_t bin = 0;
  if (pos >= static_cast<double>(bins)) {
    bin = bins - 1;
  } else if (pos > 0.0) {
    bin = static_cast<size_t>(pos);
  }
  ++counts[bin];
  ++total;
  if (std::abs(value) > threshold) ++saturated;
}

void ActivationHistogram::add(std::span<const double> values) {
  for (double v : values) add(v);
}

double ActivationHistogram::saturation_fraction() const {
  return total == 0 ? 0.0
                    : static_cast<double>(saturated) / static_cast<double>(total);
}

ActivationHistogram activation_histogram(const Model& model,
                                         std::span<const int> tokens,
                                         size_t seq_len, size_t bins,
                                         double threshold) {
  ActivationHistogram hist = ActivationHistogram::Empty(bins, threshold);
  const CellState h0 = CellState::Zeros(model.cell.family, model.cell.hidden_size());
  const size_t windows = window_count(tokens.size(), seq_len);
  for (size_t k = 0; k < windows; ++k) {
    UnrollRecord rec =
        unroll_forward(model, tokens.subspan(k * seq_len, seq_len), h0);
    for (size_t t = 1; t < rec.states.size(); ++t) hist.add(rec.states[t].h.span());
  }
  return hist;
}

RunRecord train_run(const ExperimentConfig& base, const Dataset& data,
                    const ModelSpec& spec, uint64_t seed, double r_w,
                    const RunLogger& log) {
  ExperimentConfig config = spec.apply(base);
  config.seed = seed;
  config.r_w = r_w;
  RunRecord run;
  run.model = spec.tag;
  run.seed = seed;
  run.r_w = r_w;
  Trainer trainer(config, data);
  if (log) log(run, trainer.history().back());
  try {
    while (trainer.epoch() < config.epochs) {
      const EpochMetrics& m = trainer.run_epoch();
      if (log) log(run, m);
    }
  } catch (const DivergenceError& e) {
    run.diverged = true;
    run.error = e.what();
  }
  run.history = trainer.history();
  run.final_model = trainer.model();
  run.test_bpc = run.diverged
                     ? kNaN
                     : evaluate(trainer.model(), data.test, config.seq_len).bpc;
  return run;
}

bool SweepRow::operator==(const SweepRow& other) const {
  if (model != other.model || r_w != other.r_w || seed != other.seed ||
      diverged != other.diverged)
    return false;
  return diverged ? std::isnan(test_bpc) == std::isnan(other.test_bpc)
                  : test_bpc == other.test_bpc;
}

std::vector<SweepRow> scaling_sweep(const ExperimentConfig& base,
                                    const Dataset& data,
                                    const std::vector<ModelSpec>& specs,
                                    std::span<const double> r_w_values,
                                    std::span<const uint64_t> seeds,
                                    std::ostream* warnings,
                                    const RunLogger& log) {
  if (r_w_values.empty()) throw ConfigError("sweep needs at least one r_W value");
  std::vector<SweepRow> rows;
  for (const ModelSpec& spec : specs) {
    for (double r_w : r_w_values) {
      for (uint64_t seed : seeds) {
        RunRecord run = train_run(base, data, spec, seed, r_w, log);
        if (run.diverged && warnings != nullptr)
          *warnings << "warning: " << spec.tag << " r_w=" << fmt(r_w)
                    << " seed=" << seed << " diverged: " << run.error << "\n";
        rows.push_back({spec.tag, r_w, seed, run.test_bpc, run.diverged});
      }
    }
  }
  return rows;
}

double population_std(std::span<const double> values) {
  // Welford's update.
  double m = 0.0;
  double s = 0.0;
  size_t n = 0;
  for (double x : values) {
    ++n;
    const double d = x - m;
    m += d / static_cast<double>(n);
    s += d * (x - m);
  }
  return n == 0 ? 0.0 : std::sqrt(s / static_cast<double>(n));
}

std::vector<SweepSummary> summarize_sweep(std::span<const SweepRow> rows,
                                          std::ostream* warnings) {
  std::vector<SweepSummary> out;
  auto summary_for = [&](const std::string& model) -> SweepSummary& {
    for (auto& s : out)
      if (s.model == model) return s;
    out.push_back({model, {}, {}, 0.0, 0.0, 0});
    return out.back();
  };
  std::map<std::pair<std::string, double>, std::vector<double>> groups;
  for (const SweepRow& row : rows) {
    SweepSummary& s = summary_for(row.model);
    if (row.diverged) {
      ++s.diverged;
      if (warnings != nullptr)
        *warnings << "warning: excluding diverged run " << row.model
                  << " r_w=" << fmt(row.r_w) << " seed=" << row.seed << "\n";
      continue;
    }
    auto& g = groups[{row.model, row.r_w}];
    if (g.empty()) {
      s.r_w.push_back(row.r_w);
    }
    g.push_back(row.test_bpc);
  }
  for (SweepSummary& s : out) {
    for (double r : s.r_w) s.mean_bpc.push_back(mean(groups[{s.model, r}]));
    s.std = population_std(s.mean_bpc);
    if (!s.mean_bpc.empty()) {
      const auto [lo, hi] = std::minmax_element(s.mean_bpc.begin(), s.mean_bpc.end());
      s.spread = *hi - *lo;
    }
  }
  return out;
}

std::vector<CurveRow> curve_rows(const RunRecord& run) {
  std::vector<CurveRow> rows;
  for (const auto& m : run.history)
    rows.push_back({run.model, run.seed, m.epoch, m.valid_bpc});
  return rows;
}

std::string_view to_string(TrendVerdict verdict) {
  switch (verdict) {
    case TrendVerdict::kPass: return "pass";
    case TrendVerdict::kInconclusive: return "inconclusive";
    case TrendVerdict::kFail: return "fail";
  }
  return "?";
}

TrendComparison compare_lower_is_better(std::span<const double> baseline,
                                        std::span<const double> candidate) {
  TrendComparison c;
  c.baseline_mean = mean(baseline);
  c.candidate_mean = mean(candidate);
  c.difference = c.baseline_mean - c.candidate_mean;
  if (baseline.size() < 3 || candidate.size() < 3) {
    c.standard_error = kNaN;
    c.verdict = TrendVerdict::kInconclusive;
    return c;
  }
  c.standard_error = std::sqrt(
      sample_variance(baseline) / static_cast<double>(baseline.size()) +
      sample_variance(candidate) / static_cast<double>(candidate.size()));
  if (c.difference > c.standard_error) {
    c.verdict = TrendVerdict::kPass;
  } else if (c.difference < -c.standard_error) {
    c.verdict = TrendVerdict::kFail;
  } else {
    c.verdict = TrendVerdict::kInconclusive;
  }
  return c;
}

std::string norms_csv(const std::vector<NormCurve>& curves) {
  std::string out = "epoch,t,model,log_norm\n";
  for (const auto& c : curves)
    for (const auto& p : c.points)
      out += std::to_string(p.epoch) + "," + std::to_string(p.t) + "," + c.model +
             "," + fmt(p.log_norm) + "\n";
  return out;
}

std::string hist_csv(const std::vector<HistogramResult>& histograms) {
  std::string out = "model,bin_lo,bin_hi,count\n";
  for (const auto& h : histograms)
    for (size_t i = 0; i < h.histogram.counts.size(); ++i)
      out += h.model + "," + fmt(h.histogram.edges[i]) + "," +
             fmt(h.histogram.edges[i + 1]) + "," +
             std::to_string(h.histogram.counts[i]) + "\n";
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "model,r_w,seed,test_bpc,diverged\n";
  for (const auto& r : rows)
    out += r.model + "," + fmt(r.r_w) + "," + std::to_string(r.seed) + "," +
           (r.diverged ? std::string("NA") : fmt(r.test_bpc)) + "," +
           (r.diverged ? "1" : "0") + "\n";
  return out;
}

std::string curves_csv(const std::vector<CurveRow>& rows) {
  std::string out = "model,seed,epoch,valid_bpc\n";
  for (const auto& r : rows)
    out += r.model + "," + std::to_string(r.seed) + "," + std::to_string(r.epoch) +
           "," + fmt(r.valid_bpc) + "\n";
  return out;
}

std::string summary_json(const DiagnosticsReport& report) {
  Json j;
  j["format"] = "mirnn-diagnostics";
  j["version"] = kReportVersion;
  j["experiment"] = report.experiment;
  j["seed"] = report.seed;
  j["seeds"] = report.seeds;
  j["budget"] = {{"epochs", report.epochs},
                 {"hidden", report.hidden},
                 {"seq_len", report.seq_len},
                 {"batch", report.batch},
                 {"lr", report.lr}};
  j["corpus"] = report.corpus;
  j["probe_origin"] = to_string(report.probe_origin);
  Json norms = Json::array();
  for (const auto& c : report.norms) {
    Json points = Json::array();
    for (const auto& p : c.points) points.push_back({p.epoch, p.t, p.log_norm});
    norms.push_back({{"model", c.model}, {"points", points}});
  }
  j["norms"] = norms;
  Json hists = Json::array();
  for (const auto& h : report.histograms)
    hists.push_back({{"model", h.model},
                     {"threshold", h.histogram.threshold},
                     {"edges", h.histogram.edges},
                     {"counts", h.histogram.counts},
                     {"total", h.histogram.total},
                     {"saturated", h.histogram.saturated},
                     {"saturation_fraction", h.histogram.saturation_fraction()}});
  j["histograms"] = hists;
  Json sweep = Json::array();
  for (const auto& r : report.sweep)
    sweep.push_back({{"model", r.model},
                     {"r_w", r.r_w},
                     {"seed", r.seed},
                     {"test_bpc", r.diverged ? Json(nullptr) : Json(r.test_bpc)},
                     {"diverged", r.diverged}});
  j["sweep"] = sweep;
  Json summaries = Json::array();
  for (const auto& s : summarize_sweep(report.sweep))
    summaries.push_back({{"model", s.model},
                         {"r_w", s.r_w},
                         {"mean_bpc", s.mean_bpc},
                         {"std", s.std},
                         {"spread", s.spread},
                         {"diverged", s.diverged}});
  j["sweep_summary"] = summaries;
  Json curves = Json::array();
  for (const auto& r : report.curves)
    curves.push_back({{"model", r.model},
                      {"seed", r.seed},
                      {"epoch", r.epoch},
                      {"valid_bpc", r.valid_bpc}});
  j["curves"] = curves;
  return j.dump(2) + "\n";
}

DiagnosticsReport parse_summary_json(std::string_view text) {
  DiagnosticsReport r;
  try {
    const Json j = Json::parse(text);
    if (j.at("format") != "mirnn-diagnostics")
      throw IngestionError("summary: wrong format tag");
    if (j.at("version") != kReportVersion)
      throw IngestionError("summary: unsupported version");
    r.experiment = j.at("experiment").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    r.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    const Json& b = j.at("budget");
    r.epochs = b.at("epochs").get<size_t>();
    r.hidden = b.at("hidden").get<size_t>();
    r.seq_len = b.at("seq_len").get<size_t>();
    r.batch = b.at("batch").get<size_t>();
    r.lr = b.at("lr").get<double>();
    r.corpus = j.at("corpus").get<std::string>();
    r.probe_origin = parse_probe_origin(j.at("probe_origin").get<std::string>());
    for (const auto& c : j.at("norms")) {
      NormCurve curve{c.at("model").get<std::string>(), {}};
      for (const auto& p : c.at("points"))
        curve.points.push_back(
            {p.at(0).get<size_t>(), p.at(1).get<size_t>(), p.at(2).get<double>()});
      r.norms.push_back(std::move(curve));
    }
    for (const auto& h : j.at("histograms")) {
      HistogramResult hr;
      hr.model = h.at("model").get<std::string>();
      hr.histogram.threshold = h.at("threshold").get<double>();
      hr.histogram.edges = h.at("edges").get<std::vector<double>>();
      hr.histogram.counts = h.at("counts").get<std::vector<size_t>>();
      hr.histogram.total = h.at("total").get<size_t>();
      hr.histogram.saturated = h.at("saturated").get<size_t>();
      if (hr.histogram.edges.size() != hr.histogram.counts.size() + 1)
        throw IngestionError("summary: histogram edges do not match counts");
      r.histograms.push_back(std::move(hr));
    }
    for (const auto& s : j.at("sweep")) {
      SweepRow row;
      row.model = s.at("model").get<std::string>();
      row.r_w = s.at("r_w").get<double>();
      row.seed = s.at("seed").get<uint64_t>();
      row.diverged = s.at("diverged").get<bool>();
      row.test_bpc = s.at("test_bpc").is_null() ? kNaN : s.at("test_bpc").get<double>();
      r.sweep.push_back(std::move(row));
    }
    for (const auto& c : j.at("curves"))
      r.curves.push_back({c.at("model").get<std::string>(), c.at("seed").get<uint64_t>(),
                          c.at("epoch").get<size_t>(), c.at("valid_bpc").get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw IngestionError(std::string("summary: ") + e.what());
  } catch (const ConfigError& e) {
    throw IngestionError(std::string("summary: ") + e.what());
  }
  return r;
}

void emit_report(const DiagnosticsReport& report,
                 const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw IngestionError("cannot create report directory '" + dir.string() +
                         "': " + ec.message());
  write_file(dir / "norms.csv", norms_csv(report.norms));
  write_file(dir / "hist.csv", hist_csv(report.histograms));
  write_file(dir / "sweep.csv", sweep_csv(report.sweep));
  write_file(dir / "curves.csv", curves_csv(report.curves));
  write_file(dir / "summary.json", summary_json(report));
}

DiagnosticsReport run_diagnose(const ExperimentConfig& config,
                               std::string_view experiment, std::ostream* log) {
  config.validate();
  DiagnosticsReport report;
  report.experiment = std::string(experiment);
  report.seed = config.seed;
  report.seeds = {config.seed};
  report.epochs = config.epochs;
  report.hidden = config.hidden;
  report.seq_len = config.seq_len;
  report.probe_origin = config.diagnostics.probe_origin;
  report.batch = config.batch;
  report.lr = config.lr;
  report.corpus = std::filesystem::path(config.corpus).filename().string();

  if (experiment != "norms" && experiment != "hist" && experiment != "sweep" &&
      experiment != "curves")
    throw ConfigError("unknown experiment '" + std::string(experiment) +
                      "' (expected norms, hist, sweep or curves)");
  const Dataset data = load_dataset(config);
  RunLogger logger;
  if (log != nullptr)
    logger = [log](const RunRecord& run, const EpochMetrics& m) {
      *log << run.model << " seed " << run.seed << " r_w " << fmt(run.r_w)
           << " epoch " << m.epoch << " valid_bpc " << fmt(m.valid_bpc) << "\n";
      log->flush();
    };

  if (experiment == "norms") {
    for (size_t t : config.diagnostics.probes)
      if (t > config.seq_len)
        throw ConfigError("probe t=" + std::to_string(t) + " exceeds 'seq_len'");
    report.norms = gradient_norm_experiment(config, data, {kLinRnn, kLinMiRnn});
  } else if (experiment == "hist") {
    for (const ModelSpec& spec : {kVanillaRnn, kMiRnn}) {
      RunRecord run = train_run(config, data, spec, config.seed, config.r_w, logger);
      if (run.diverged) throw DivergenceError(spec.tag + ": " + run.error);
      report.histograms.push_back(
          {spec.tag, activation_histogram(run.final_model, data.valid,
                                          config.seq_len, config.diagnostics.bins,
                                          config.diagnostics.saturation)});
    }
  } else if (experiment == "sweep") {
    report.seeds = config.diagnostics.seeds;
    report.sweep = scaling_sweep(config, data, {kVanillaRnn, kMiRnn},
                                 config.diagnostics.sweep_r_w,
                                 config.diagnostics.seeds, log, logger);
  } else {
    report.seeds = config.diagnostics.seeds;
    for (const ModelSpec& spec : {kVanillaRnn, kMiRnnSimple, kMiRnn}) {
      for (uint64_t seed : config.diagnostics.seeds) {
        RunRecord run = train_run(config, data, spec, seed, config.r_w, logger);
        if (run.diverged && log != nullptr)
          *log << "warning: " << spec.tag << " seed " << seed
               << " diverged: " << run.error << "\n";
        auto rows = curve_rows(run);
        report.curves.insert(report.curves.end(), rows.begin(), rows.end());
      }
    }
  }
  return report;
}

}  // namespace mirnn
