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

// Gradient-flow and saturation diagnostics: gradient-norm curves over
// training, hidden-activation histograms, the weight-scale sweep and
// validation-curve comparisons, plus their CSV/JSON reports.

#ifndef MIRNN_DIAGNOSTICS_H_
#define MIRNN_DIAGNOSTICS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mirnn/bptt.h"
#include "mirnn/config.h"
#include "mirnn/train.h"

namespace mirnn {

// A model variant compared in an experiment; everything else comes from the
// base config.
struct ModelSpec {
  std::string tag;
  CellFamily cell = CellFamily::kRnn;
  IntegrationMode mode = IntegrationMode::kAdditive;
  Activation activation = Activation::kTanh;

  ExperimentConfig apply(ExperimentConfig base) const;
};

inline const ModelSpec kLinRnn{"lin-RNN", CellFamily::kRnn,
                               IntegrationMode::kAdditive, Activation::kIdentity};
inline const ModelSpec kLinMiRnn{"lin-MI-RNN", CellFamily::kRnn,
                                 IntegrationMode::kMiGeneral,
                                 Activation::kIdentity};
inline const ModelSpec kVanillaRnn{"RNN", CellFamily::kRnn,
                                   IntegrationMode::kAdditive, Activation::kTanh};
inline const ModelSpec kMiRnnSimple{"MI-RNN-simple", CellFamily::kRnn,
                                    IntegrationMode::kMiSimple,
                                    Activation::kTanh};
inline const ModelSpec kMiRnn{"MI-RNN", CellFamily::kRnn,
                              IntegrationMode::kMiGeneral, Activation::kTanh};

// ---------------------------------------------------------------------------
// Gradient norms

struct NormPoint {
  size_t epoch = 0;
  size_t t = 0;
  double log_norm = 0.0;

  bool operator==(const NormPoint&) const = default;
};

struct NormCurve {
  std::string model;
  std::vector<NormPoint> points;

  bool operator==(const NormCurve&) const = default;
};

// The first min(count, windows) training windows, in corpus order.
std::vector<size_t> probe_windows(size_t tokens, size_t seq_len, size_t count);

// Index into the T + 1 states h_0..h_T of a window for probe |t|.
size_t probe_state(size_t t, size_t seq_len, ProbeOrigin origin);

// For each probe, the mean over |windows| of log ||dC/dh||_2 at the probed
// state, where C is the loss of the final prediction only and each window
// is unrolled from a zero state. Windows whose gradient at that step is
// exactly zero are left out of the mean; a probe with no usable window gets
// kLogZeroSentinel. Probes must satisfy t <= seq_len.
std::vector<double> mean_log_norms(const Model& model,
                                   std::span<const int> tokens,
                                   size_t seq_len,
                                   std::span<const size_t> windows,
                                   std::span<const size_t> probes,
                                   ProbeOrigin origin = ProbeOrigin::kStart);

// The same quantity for one window computed by multiplying dC/dh_T by an
// explicit jacobian_product chain instead of running the backward pass.
double log_norm_via_jacobians(const Model& model, std::span<const int> inputs,
                              std::span<const int> targets, size_t t,
                              ProbeOrigin origin = ProbeOrigin::kStart);

// Trains each spec from the same seed and records mean_log_norms after
// every epoch, epoch 0 being the untrained model.
std::vector<NormCurve> gradient_norm_experiment(
    const ExperimentConfig& base, const Dataset& data,
    const std::vector<ModelSpec>& specs);

// ---------------------------------------------------------------------------
// Activation histograms

struct ActivationHistogram {
  std::vector<double> edges;  // bins + 1 edges spanning [-1, 1]
  std::vector<size_t> counts;
  size_t total = 0;
  size_t saturated = 0;
  double threshold = 0.9;

  static ActivationHistogram Empty(size_t bins, double threshold);
  // Values outside [-1, 1] land in the outermost bins.
  void add(double value);
  void add(std::span<const double> values);
  double saturation_fraction() const;

  bool operator==(const ActivationHistogram&) const = default;
};

// Hidden activations h_t, t = 1..T, of every non-overlapping window of
// |tokens|, each unrolled from a zero state.
ActivationHistogram activation_histogram(const Model& model,
                                         std::span<const int> tokens,
                                         size_t seq_len, size_t bins,
                                         double threshold);

struct HistogramResult {
  std::string model;
  ActivationHistogram histogram;

  bool operator==(const HistogramResult&) const = default;
};

// ---------------------------------------------------------------------------
// Training runs shared by the sweep, curve and histogram experiments

struct RunRecord {
  std::string model;
  uint64_t seed = 0;
  double r_w = 0.0;
  std::vector<EpochMetrics> history;
  bool diverged = false;
  std::string error;
  double test_bpc = 0.0;  // NaN when diverged
  Model final_model;
};

using RunLogger = std::function<void(const RunRecord&, const EpochMetrics&)>;

// Trains spec.apply(base) with the given seed and W range for base.epochs.
// A DivergenceError is caught and recorded rather than propagated.
RunRecord train_run(const ExperimentConfig& base, const Dataset& data,
                    const ModelSpec& spec, uint64_t seed, double r_w,
                    const RunLogger& log = {});

// ---------------------------------------------------------------------------
// Weight-scale sweep

struct SweepRow {
  std::string model;
  double r_w = 0.0;
  uint64_t seed = 0;
  double test_bpc = 0.0;
  bool diverged = false;

  bool operator==(const SweepRow& other) const;
};

struct SweepSummary {
  std::string model;
  // Seed-averaged test BPC per r_W value, in sweep order; r_W values whose
  // runs all diverged are absent.
  std::vector<double> r_w;
  std::vector<double> mean_bpc;
  double std = 0.0;     // population standard deviation of mean_bpc
  double spread = 0.0;  // max - min of mean_bpc
  size_t diverged = 0;

  bool operator==(const SweepSummary&) const = default;
};

// U keeps base.r_u for every run; only W's range changes.
std::vector<SweepRow> scaling_sweep(const ExperimentConfig& base,
                                    const Dataset& data,
                                    const std::vector<ModelSpec>& specs,
                                    std::span<const double> r_w_values,
                                    std::span<const uint64_t> seeds,
                                    std::ostream* warnings = nullptr,
                                    const RunLogger& log = {});

// Diverged rows are excluded, with a line per excluded row on |warnings|.
std::vector<SweepSummary> summarize_sweep(std::span<const SweepRow> rows,
                                          std::ostream* warnings = nullptr);

double population_std(std::span<const double> values);

// ---------------------------------------------------------------------------
// Validation curves

struct CurveRow {
  std::string model;
  uint64_t seed = 0;
  size_t epoch = 0;
  double valid_bpc = 0.0;

  bool operator==(const CurveRow&) const = default;
};

std::vector<CurveRow> curve_rows(const RunRecord& run);

// ---------------------------------------------------------------------------
// Trend verdicts

enum class TrendVerdict { kPass, kInconclusive, kFail };

std::string_view to_string(TrendVerdict verdict);

struct TrendComparison {
  double baseline_mean = 0.0;
  double candidate_mean = 0.0;
  double difference = 0.0;  // baseline_mean - candidate_mean
  double standard_error = 0.0;
  TrendVerdict verdict = TrendVerdict::kInconclusive;
};

// Lower is better. Pass when the candidate's mean is below the baseline's
// by more than the pooled standard error sqrt(s_b^2/n_b + s_c^2/n_c) (sample
// variances), fail when it is above by more than that, inconclusive
// otherwise or when either side has fewer than three values.
TrendComparison compare_lower_is_better(std::span<const double> baseline,
                                        std::span<const double> candidate);

// ---------------------------------------------------------------------------
// Reports

struct DiagnosticsReport {
  std::string experiment;
  uint64_t seed = 0;
  std::vector<uint64_t> seeds;
  size_t epochs = 0;
  size_t hidden = 0;
  size_t seq_len = 0;
  size_t batch = 0;
  double lr = 0.0;
  std::string corpus;
  ProbeOrigin probe_origin = ProbeOrigin::kStart;
  std::vector<NormCurve> norms;
  std::vector<HistogramResult> histograms;
  std::vector<SweepRow> sweep;
  std::vector<CurveRow> curves;

  bool operator==(const DiagnosticsReport&) const = default;
};

inline constexpr int kReportVersion = 1;

std::string norms_csv(const std::vector<NormCurve>& curves);
std::string hist_csv(const std::vector<HistogramResult>& histograms);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string curves_csv(const std::vector<CurveRow>& rows);
std::string summary_json(const DiagnosticsReport& report);
// Throws IngestionError for a malformed summary.
DiagnosticsReport parse_summary_json(std::string_view json);

// Writes norms.csv, hist.csv, sweep.csv, curves.csv and summary.json into
// |dir|, creating it if needed. Throws IngestionError if a file cannot be
// written.
void emit_report(const DiagnosticsReport& report,
                 const std::filesystem::path& dir);

// Runs one named experiment (norms, hist, sweep or curves) as configured.
DiagnosticsReport run_diagnose(const ExperimentConfig& config,
                               std::string_view experiment,
                               std::ostream* log = nullptr);

}  // namespace mirnn

#endif  // MIRNN_DIAGNOSTICS_H_
