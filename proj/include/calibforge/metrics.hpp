// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#pragma once

// Reliability binning and calibration metrics for binary predictions.
//
// Confidences are partitioned into M equal-width bins I_m = ((m-1)/M, m/M],
// m = 1..M. A confidence of exactly 0 is assigned to bin 1 so the bins form a
// total partition of [0, 1]. Bin boundaries are the doubles k/M; membership is
// decided by comparing against those doubles, never by rounding c*M alone.

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace calibforge::metrics {

inline constexpr int kDefaultBins = 10;

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-12;

double clamp_probability(double p) noexcept;

struct PredictionRecord {
  double confidence = 0.0;  // max(prob)
  int predicted_label = 0;  // argmax(prob), lowest index wins ties
  int true_label = 0;
  std::array<double, 2> prob{0.5, 0.5};
};

// Builds a record from a probability vector, deriving confidence and argmax.
// Throws InvalidArgument if prob is not a probability vector (1e-9) or the
// label is not 0/1.
PredictionRecord make_record(const std::array<double, 2>& prob, int true_label);

int argmax(const std::array<double, 2>& v) noexcept;

struct BinStats {
  int index = 1;  // 1-based
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  // NaN when count == 0.
  double accuracy = 0.0;
  double mean_confidence = 0.0;

  bool empty() const noexcept { return count == 0; }
  double gap() const noexcept;  // |accuracy - mean_confidence|, NaN when empty
};

struct NllResult {
  double sum = 0.0;
  double mean = 0.0;
};

struct CalibrationReport {
  std::size_t n = 0;
  int num_bins = kDefaultBins;
  double accuracy = 0.0;
  double ece = 0.0;
  double mce = 0.0;
  double nll_sum = 0.0;
  double nll_mean = 0.0;
  std::vector<BinStats> bins;
};

int bin_index(double confidence, int num_bins);

std::vector<BinStats> compute_bins(std::span<const PredictionRecord> records, int num_bins);

// Sum over bins of (|B_m| / n) * |acc - conf|. Empty bins contribute nothing.
double ece(std::span<const BinStats> bins, std::size_t n);

// Largest |acc - conf| over the nonempty bins.
double mce(std::span<const BinStats> bins);

NllResult nll(std::span<const PredictionRecord> records);

double accuracy(std::span<const PredictionRecord> records);

CalibrationReport build_report(std::span<const PredictionRecord> records, int num_bins = kDefaultBins);

// Report emission.
nlohmann::ordered_json report_to_json(const CalibrationReport& report);
CalibrationReport report_from_json(const nlohmann::json& j);

// CSV with header bin_lo,bin_hi,count,accuracy,confidence,gap. Empty bins
// carry the literal "empty" in their accuracy, confidence and gap columns.
std::string reliability_csv(const CalibrationReport& report);

// Accuracy bars against the identity diagonal, with the confidence gap drawn
// on top of each bar.
std::string reliability_svg(const CalibrationReport& report, const std::string& title);

}  // namespace calibforge::metrics
