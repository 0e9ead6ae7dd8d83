// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#pragma once

// The five pipeline commands behind the CLI: gen, train, calibrate, eval and
// compare. Each takes a fully-resolved options struct, writes its artifacts
// under options.out, and throws the error types in error.hpp on failure.
//
// Artifacts in <out>/:
//   gen        train.csv, test.csv, gen_config.json
//   train      model_<name>.txt, train_log_<name>.csv
//   calibrate  scaler_<kind>.json, scaler_<kind>_log.csv
//   eval       report_<name>.json, reliability_<name>.csv/.svg, predictions_<name>.csv
//   compare    comparison.json, comparison.txt

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "calibforge/datagen.hpp"
#include "calibforge/metrics.hpp"
#include "calibforge/nn.hpp"
#include "calibforge/scaling.hpp"

namespace calibforge::pipeline {

inline constexpr std::string_view kToolName = "calibforge";
inline constexpr std::string_view kToolVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kConfigError = 2, kIoError = 3, kMissingArtifact = 4 };

struct GenOptions {
  std::string out = "out";
  std::uint64_t seed = 42;
  std::size_t n_train = 20000;
  std::size_t n_test = 2500;
  datagen::SyntheticConfig generator;  // n_matches and seed are overridden
};

struct TrainOptions {
  std::string out = "out";
  std::uint64_t seed = 42;
  std::string data;  // default <out>/train.csv
  std::string loss = "ce";
  std::string name;  // default: the loss name
  std::vector<std::size_t> hidden{256, 256};
  int epochs = 20;
  double lr = 1e-4;
  std::size_t batch_size = 512;
  int k = 32;  // DU Monte-Carlo samples per training example
  bool antithetic = true;
  double val_fraction = 0.1;
};

struct CalibrateOptions {
  std::string out = "out";
  std::uint64_t seed = 42;
  std::string model;  // default <out>/model_ce.txt
  std::string data;   // default <out>/train.csv; the held-out split is recomputed
  std::string kind = "temperature";
  int max_iterations = 5000;
  double lr = 1e-2;
};

struct EvalOptions {
  std::string out = "out";
  std::uint64_t seed = 42;
  std::string model;  // default <out>/model_ce.txt
  std::string scaler;  // optional
  std::string data;    // default <out>/test.csv
  std::string name;    // default: scaler kind, "du" for DU models, else "none"
  int bins = metrics::kDefaultBins;
  int k = 256;  // DU Monte-Carlo samples per test example
};

struct CompareOptions {
  std::string out = "out";
  std::uint64_t seed = 42;
};

// Strict JSON <-> options. Unknown keys raise ConfigError.
nlohmann::ordered_json to_json(const GenOptions& o);
nlohmann::ordered_json to_json(const TrainOptions& o);
nlohmann::ordered_json to_json(const CalibrateOptions& o);
nlohmann::ordered_json to_json(const EvalOptions& o);
nlohmann::ordered_json to_json(const CompareOptions& o);
void apply_json(const nlohmann::json& j, GenOptions& o);
void apply_json(const nlohmann::json& j, TrainOptions& o);
void apply_json(const nlohmann::json& j, CalibrateOptions& o);
void apply_json(const nlohmann::json& j, EvalOptions& o);
void apply_json(const nlohmann::json& j, CompareOptions& o);

// Fills path defaults that depend on other fields and validates ranges.
void resolve(GenOptions& o);
void resolve(TrainOptions& o);
void resolve(CalibrateOptions& o);
void resolve(EvalOptions& o);
void resolve(CompareOptions& o);

void cmd_gen(GenOptions o);
void cmd_train(TrainOptions o);
void cmd_calibrate(CalibrateOptions o);
void cmd_eval(EvalOptions o);
void cmd_compare(CompareOptions o);

// Per-sample predictions of a model (optionally scaled) on a dataset.
struct Prediction {
  std::vector<double> raw;  // model outputs (logits, plus s for DU models)
  metrics::PredictionRecord record;
  std::optional<double> p_true;
};

std::vector<Prediction> predict(const nn::ModelParams& model, const std::optional<scaling::ScalerParams>& scaler,
                                std::span<const datagen::Sample> samples, int du_samples, std::uint64_t seed);

// The method rows of the comparison table, in order: report name and label.
struct MethodRow {
  std::string_view name;
  std::string_view label;
};
inline constexpr MethodRow kMethods[] = {{"none", "No calibration"},
                                         {"temperature", "Temp. Scaling"},
                                         {"vector", "Vector Scaling"},
                                         {"matrix", "Matrix Scaling"},
                                         {"du", "DU Loss"}};

std::string tool_string();

}  // namespace calibforge::pipeline
