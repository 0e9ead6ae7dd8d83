// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#pragma once

// Batched network kernels. The OpenMP versions split the selected rows into
// fixed chunks of kChunkRows, process chunks in parallel into private
// buffers, and reduce the chunk results in chunk order, so the output does
// not depend on the thread count. The *_serial versions loop over rows with
// the single-sample routines in nn.hpp and serve as the reference in tests
// and benchmarks.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "calibforge/nn.hpp"

namespace calibforge::kernels {

inline constexpr std::size_t kChunkRows = 64;

struct BatchGradient {
  double loss_sum = 0.0;
  std::size_t correct = 0;  // argmax of the loss probabilities equals the label
  std::size_t rows = 0;
  std::vector<double> grad;  // mean over rows

  double mean_loss() const noexcept { return rows ? loss_sum / static_cast<double>(rows) : 0.0; }
};

// Noise seed of the DU loss for dataset row r: derive_seed(noise_base, {r}).
std::uint64_t row_noise_seed(std::uint64_t noise_base, std::size_t row) noexcept;

BatchGradient batch_gradient(const nn::ModelParams& params, const nn::TrainingSet& data,
                             std::span<const std::size_t> rows, const nn::LossSpec& spec, std::uint64_t noise_base);

BatchGradient batch_gradient_serial(const nn::ModelParams& params, const nn::TrainingSet& data,
                                    std::span<const std::size_t> rows, const nn::LossSpec& spec,
                                    std::uint64_t noise_base);

// Raw outputs for every row of data, row-major (rows x output_size).
std::vector<double> predict_raw(const nn::ModelParams& params, const nn::TrainingSet& data);
std::vector<double> predict_raw_serial(const nn::ModelParams& params, const nn::TrainingSet& data);

}  // namespace calibforge::kernels
