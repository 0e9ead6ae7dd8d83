// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#pragma once

// Dense feed-forward network: ReLU hidden layers, linear output layer,
// softmax/cross-entropy or the data-uncertainty loss, hand-derived backprop
// and Adam.
//
// All parameters live in one flat vector. Layer l owns a row-major
// (out x in) weight block followed by its bias block. Gradients use the same
// layout, so optimizers and finite-difference checks work on plain spans.

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace calibforge::nn {

inline constexpr int kNumClasses = 2;

enum class LossKind { CrossEntropy, DataUncertainty };

std::string_view to_string(LossKind kind) noexcept;
LossKind parse_loss_kind(std::string_view name);  // "ce" | "du"

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

struct ModelParams {
  // Input width, hidden widths, class count. The data-uncertainty head adds
  // one raw output (s) after the class logits, so the last layer then has
  // layer_sizes.back() + 1 rows.
  std::vector<std::size_t> layer_sizes;
  bool du_head = false;
  std::vector<LayerShape> layers;
  std::vector<double> values;

  // All-zero parameters of the given architecture.
  static ModelParams zeros(std::vector<std::size_t> layer_sizes, bool du_head);

  std::size_t input_size() const noexcept { return layer_sizes.front(); }
  std::size_t output_size() const noexcept { return layers.back().out; }
  std::size_t size() const noexcept { return values.size(); }

  std::span<double> weights(std::size_t l) noexcept;
  std::span<const double> weights(std::size_t l) const noexcept;
  std::span<double> bias(std::size_t l) noexcept;
  std::span<const double> bias(std::size_t l) const noexcept;
};

inline std::vector<std::size_t> default_layer_sizes() { return {295, 256, 256, 2}; }

// He-style uniform init: W ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)), b = 0.
ModelParams init_params(std::vector<std::size_t> layer_sizes, bool du_head, std::uint64_t seed);

using Gradients = std::vector<double>;

// Raw outputs: the class logits z, followed by s when du_head is set.
std::vector<double> forward(const ModelParams& params, std::span<const double> x);

std::array<double, 2> softmax(const std::array<double, 2>& z) noexcept;
std::vector<double> softmax(std::span<const double> z);

// -log p[y] with p clamped as in the metrics module.
double cross_entropy(const std::array<double, 2>& p, int y);

struct LossSpec {
  LossKind kind = LossKind::CrossEntropy;
  int mc_samples = 32;  // data-uncertainty loss only
  bool antithetic = true;
};

// Loss of one sample given the network's raw outputs, with its gradient
// w.r.t. those outputs. noise_seed freezes the Monte-Carlo draws of the
// data-uncertainty loss and is ignored for cross-entropy.
struct OutputLoss {
  double loss = 0.0;
  std::array<double, 3> d_raw{0.0, 0.0, 0.0};
  std::array<double, 2> prob{0.5, 0.5};
};
OutputLoss output_loss(std::span<const double> raw, int y, const LossSpec& spec, std::uint64_t noise_seed);

// Single-sample backprop. Adds d loss / d params into grad and returns the
// loss. Straightforward loops; the batched kernels are checked against it.
double backward(const ModelParams& params, std::span<const double> x, int y, const LossSpec& spec,
                std::uint64_t noise_seed, std::span<double> grad);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& config);

// Row-major feature matrix with labels.
struct TrainingSet {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> x;
  std::vector<int> y;

  std::span<const double> row(std::size_t i) const noexcept { return {x.data() + i * cols, cols}; }
};

struct TrainConfig {
  AdamConfig adam;
  int epochs = 20;
  std::size_t batch_size = 512;
  std::uint64_t seed = 42;
  LossSpec loss;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

// Mini-batch Adam with mean-reduced batch loss. Each epoch reshuffles with a
// stream derived from (seed, epoch); DU noise for a sample comes from
// (seed, epoch, batch, row). The result is a pure function of the inputs.
TrainResult train(const TrainingSet& data, ModelParams initial, const TrainConfig& config);

std::string training_log_csv(std::span<const EpochLog> log);

// Text model format. First line is the version tag, then key=value lines.
inline constexpr std::string_view kModelHeader = "calibforge-model v1";

using Metadata = std::vector<std::pair<std::string, std::string>>;

struct ModelFile {
  ModelParams params;
  Metadata metadata;

  const std::string* find(std::string_view key) const;
};

void write_model(std::ostream& os, const ModelParams& params, const Metadata& metadata = {});
ModelFile read_model(std::istream& is);
void save_model(const std::string& path, const ModelParams& params, const Metadata& metadata = {});
ModelFile load_model(const std::string& path);

}  // namespace calibforge::nn
