// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#include <algorithm>
#include <numeric>

#include "calibforge/error.hpp"
#include "calibforge/kernels.hpp"
#include "calibforge/nn.hpp"
#include "calibforge/rng.hpp"
#include "format.hpp"

namespace calibforge::nn {

TrainResult train(const TrainingSet& data, ModelParams initial, const TrainConfig& config) {
  if (data.rows == 0) throw InvalidArgument("cannot train on an empty dataset");
  if (data.cols != initial.input_size()) throw InvalidArgument("dataset width does not match the model input");
  if (!(config.adam.learning_rate >= 0.0)) throw InvalidArgument("learning rate must be nonnegative");
  if (config.epochs < 1) throw InvalidArgument("epochs must be at least 1");
  if (config.batch_size == 0) throw InvalidArgument("batch size must be positive");
  if ((config.loss.kind == LossKind::DataUncertainty) != initial.du_head)
    throw InvalidArgument("loss kind does not match the model head");

  TrainResult result;
  result.params = std::move(initial);
  auto& params = result.params;
  AdamState adam(params.size());

  std::vector<std::size_t> order(data.rows);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, {0x5348, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    std::size_t batch = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch) {
      const std::size_t len = std::min(config.batch_size, order.size() - begin);
      const std::span<const std::size_t> rows(order.data() + begin, len);
      const auto noise_base = derive_seed(config.seed, {0x4e4f, static_cast<std::uint64_t>(epoch), batch});
      const auto g = kernels::batch_gradient(params, data, rows, config.loss, noise_base);
      loss_sum += g.loss_sum;
      correct += g.correct;
      // lr = 0 leaves parameters untouched by construction.
      if (config.adam.learning_rate > 0.0) adam_step(params.values, g.grad, adam, config.adam);
    }
    result.log.push_back(EpochLog{epoch, loss_sum / static_cast<double>(data.rows),
                                  static_cast<double>(correct) / static_cast<double>(data.rows)});
  }
  return result;
}

std::string training_log_csv(std::span<const EpochLog> log) {
  std::string out = "epoch,loss,train_acc\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch);
    out += ',';
    detail::append_double(out, e.loss);
    out += ',';
    detail::append_double(out, e.train_acc);
    out += '\n';
  }
  return out;
}

}  // namespace calibforge::nn
