// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#pragma once

// Post-hoc logit scalers fit by minimizing mean validation NLL:
//   temperature  softmax(z / T),           T > 0
//   vector       softmax(diag(w) z),       no bias
//   matrix       softmax(W z + b)

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace calibforge::scaling {

using Logits = std::array<double, 2>;

enum class ScalerKind { Temperature, Vector, Matrix };

std::string_view to_string(ScalerKind kind) noexcept;
ScalerKind parse_scaler_kind(std::string_view name);

struct ScalerParams {
  ScalerKind kind = ScalerKind::Temperature;
  double temperature = 1.0;
  std::array<double, 2> w_diag{1.0, 1.0};
  std::array<double, 4> W{1.0, 0.0, 0.0, 1.0};  // row-major 2x2
  std::array<double, 2> b{0.0, 0.0};

  static ScalerParams identity(ScalerKind kind);

  // Transformed logits; throws InvalidArgument for T <= 0 or non-finite entries.
  Logits transform(const Logits& z) const;
};

struct ScaledPrediction {
  std::array<double, 2> prob{0.5, 0.5};
  int label = 0;
  double confidence = 0.5;
};

ScaledPrediction apply_scaler(const ScalerParams& scaler, const Logits& z);

double mean_nll(const ScalerParams& scaler, std::span<const Logits> logits, std::span<const int> labels);

struct FitLogEntry {
  int iter = 0;
  double nll = 0.0;
  double grad_norm = 0.0;
};

struct FitOptions {
  int max_iterations = 5000;
  double learning_rate = 1e-2;  // Adam, vector and matrix scalers
  double grad_tolerance = 1e-6;
};

struct FitResult {
  ScalerParams params;
  double initial_nll = 0.0;
  double final_nll = 0.0;
  int iterations = 0;
  bool converged = false;
  // Set when the temperature search ended on its bracket [1e-2, 1e2].
  bool warning = false;
  std::string status;
  std::vector<FitLogEntry> log;
};

inline constexpr double kMinTemperature = 1e-2;
inline constexpr double kMaxTemperature = 1e2;

// Golden-section search over log T in [log 1e-2, log 1e2], then three
// safeguarded Newton steps in log T.
FitResult fit_temperature(std::span<const Logits> logits, std::span<const int> labels);

// Full-batch Adam from the identity. Returns the best iterate seen, so the
// result is never worse than the identity.
FitResult fit_vector(std::span<const Logits> logits, std::span<const int> labels, const FitOptions& options = {});
FitResult fit_matrix(std::span<const Logits> logits, std::span<const int> labels, const FitOptions& options = {});

FitResult fit(ScalerKind kind, std::span<const Logits> logits, std::span<const int> labels,
              const FitOptions& options = {});

// {kind, T} | {kind, w_diag} | {kind, W, b}
nlohmann::ordered_json scaler_to_json(const ScalerParams& scaler);
ScalerParams scaler_from_json(const nlohmann::json& j);

std::string fit_log_csv(std::span<const FitLogEntry> log);

}  // namespace calibforge::scaling
