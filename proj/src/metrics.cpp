// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#include "calibforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "calibforge/error.hpp"

namespace calibforge::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double boundary(int k, int num_bins) { return static_cast<double>(k) / static_cast<double>(num_bins); }

}  // namespace

double clamp_probability(double p) noexcept { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

int argmax(const std::array<double, 2>& v) noexcept { return v[1] > v[0] ? 1 : 0; }

PredictionRecord make_record(const std::array<double, 2>& prob, int true_label) {
  if (true_label != 0 && true_label != 1) throw InvalidArgument("true label must be 0 or 1");
  if (!(prob[0] >= 0.0) || !(prob[1] >= 0.0) || std::abs(prob[0] + prob[1] - 1.0) > 1e-9)
    throw InvalidArgument("prob_vector must be nonnegative and sum to 1");
  PredictionRecord r;
  r.prob = prob;
  r.predicted_label = argmax(prob);
  r.confidence = prob[r.predicted_label];
  r.true_label = true_label;
  return r;
}

double BinStats::gap() const noexcept { return empty() ? kNaN : std::abs(accuracy - mean_confidence); }

int bin_index(double confidence, int num_bins) {
  if (num_bins <= 0) throw InvalidArgument("number of bins must be positive");
  if (!(confidence >= 0.0 && confidence <= 1.0)) throw InvalidArgument("confidence must lie in [0, 1]");
  int m = static_cast<int>(std::ceil(confidence * num_bins));
  m = std::clamp(m, 1, num_bins);
  // c*M can round across a boundary; settle against the boundary doubles.
  while (m > 1 && confidence <= boundary(m - 1, num_bins)) --m;
  while (m < num_bins && confidence > boundary(m, num_bins)) ++m;
  return m;
}

std::vector<BinStats> compute_bins(std::span<const PredictionRecord> records, int num_bins) {
  if (num_bins <= 0) throw InvalidArgument("number of bins must be positive");
  if (records.empty()) throw InvalidArgument("cannot bin an empty record set");

  std::vector<std::size_t> correct(num_bins, 0);
  std::vector<double> conf_sum(num_bins, 0.0);
  std::vector<BinStats> bins(num_bins);
  for (int m = 1; m <= num_bins; ++m) {
    bins[m - 1].index = m;
    bins[m - 1].lo = boundary(m - 1, num_bins);
    bins[m - 1].hi = boundary(m, num_bins);
  }
  for (const auto& r : records) {
    const int m = bin_index(r.confidence, num_bins) - 1;
    bins[m].count += 1;
    conf_sum[m] += r.confidence;
    if (r.predicted_label == r.true_label) correct[m] += 1;
  }
  for (int m = 0; m < num_bins; ++m) {
    auto& b = bins[m];
    if (b.count == 0) {
      b.accuracy = kNaN;
      b.mean_confidence = kNaN;
    } else {
      b.accuracy = static_cast<double>(correct[m]) / static_cast<double>(b.count);
      b.mean_confidence = conf_sum[m] / static_cast<double>(b.count);
    }
  }
  return bins;
}

double ece(std::span<const BinStats> bins, std::size_t n) {
  if (n == 0) throw InvalidArgument("ECE needs a positive sample count");
  double total = 0.0;
  for (const auto& b : bins) {
    if (b.empty()) continue;
    total += static_cast<double>(b.count) / static_cast<double>(n) * std::abs(b.accuracy - b.mean_confidence);
  }
  return total;
}

double mce(std::span<const BinStats> bins) {
  double worst = -1.0;
  for (const auto& b : bins) {
    if (b.empty()) continue;
    worst = std::max(worst, std::abs(b.accuracy - b.mean_confidence));
  }
  if (worst < 0.0) throw InvalidArgument("MCE needs at least one nonempty bin");
  return worst;
}

NllResult nll(std::span<const PredictionRecord> records) {
  if (records.empty()) throw InvalidArgument("NLL of an empty record set");
  NllResult out;
  for (const auto& r : records) {
    if (r.true_label != 0 && r.true_label != 1) throw InvalidArgument("true label must be 0 or 1");
    out.sum -= std::log(clamp_probability(r.prob[r.true_label]));
  }
  out.mean = out.sum / static_cast<double>(records.size());
  return out;
}

double accuracy(std::span<const PredictionRecord> records) {
  if (records.empty()) throw InvalidArgument("accuracy of an empty record set");
  std::size_t correct = 0;
  for (const auto& r : records) correct += r.predicted_label == r.true_label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

CalibrationReport build_report(std::span<const PredictionRecord> records, int num_bins) {
  CalibrationReport rep;
  rep.n = records.size();
  rep.num_bins = num_bins;
  rep.bins = compute_bins(records, num_bins);
  rep.accuracy = accuracy(records);
  rep.ece = ece(rep.bins, rep.n);
  rep.mce = mce(rep.bins);
  const auto l = nll(records);
  rep.nll_sum = l.sum;
  rep.nll_mean = l.mean;
  return rep;
}

}  // namespace calibforge::metrics
