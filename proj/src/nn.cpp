// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#include "calibforge/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "calibforge/du_loss.hpp"
#include "calibforge/error.hpp"
#include "calibforge/metrics.hpp"
#include "calibforge/rng.hpp"

namespace calibforge::nn {

std::string_view to_string(LossKind kind) noexcept {
  return kind == LossKind::CrossEntropy ? "ce" : "du";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "ce") return LossKind::CrossEntropy;
  if (name == "du") return LossKind::DataUncertainty;
  throw InvalidArgument("unknown loss kind '" + std::string(name) + "' (expected ce or du)");
}

ModelParams ModelParams::zeros(std::vector<std::size_t> layer_sizes, bool du_head) {
  if (layer_sizes.size() < 2) throw InvalidArgument("a network needs at least input and output sizes");
  if (std::find(layer_sizes.begin(), layer_sizes.end(), std::size_t{0}) != layer_sizes.end())
    throw InvalidArgument("layer sizes must be positive");
  if (layer_sizes.back() != static_cast<std::size_t>(kNumClasses))
    throw InvalidArgument("output layer must have 2 classes");

  ModelParams p;
  p.layer_sizes = std::move(layer_sizes);
  p.du_head = du_head;
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    LayerShape s;
    s.in = p.layer_sizes[l];
    s.out = p.layer_sizes[l + 1];
    if (du_head && l + 2 == p.layer_sizes.size()) s.out += 1;
    s.weight_offset = offset;
    offset += s.in * s.out;
    s.bias_offset = offset;
    offset += s.out;
    p.layers.push_back(s);
  }
  p.values.assign(offset, 0.0);
  return p;
}

std::span<double> ModelParams::weights(std::size_t l) noexcept {
  return {values.data() + layers[l].weight_offset, layers[l].in * layers[l].out};
}
std::span<const double> ModelParams::weights(std::size_t l) const noexcept {
  return {values.data() + layers[l].weight_offset, layers[l].in * layers[l].out};
}
std::span<double> ModelParams::bias(std::size_t l) noexcept {
  return {values.data() + layers[l].bias_offset, layers[l].out};
}
std::span<const double> ModelParams::bias(std::size_t l) const noexcept {
  return {values.data() + layers[l].bias_offset, layers[l].out};
}

ModelParams init_params(std::vector<std::size_t> layer_sizes, bool du_head, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(std::move(layer_sizes), du_head);
  Rng rng(derive_seed(seed, {0x1417}));
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(p.layers[l].in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : p.weights(l)) w = dist(rng);
  }
  return p;
}

std::vector<double> forward(const ModelParams& params, std::span<const double> x) {
  if (x.size() != params.input_size())
    throw InvalidArgument("input has " + std::to_string(x.size()) + " features, model expects " +
                          std::to_string(params.input_size()));
  std::vector<double> act(x.begin(), x.end());
  std::vector<double> next;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& s = params.layers[l];
    const auto w = params.weights(l);
    const auto b = params.bias(l);
    next.assign(s.out, 0.0);
    for (std::size_t o = 0; o < s.out; ++o) {
      double z = b[o];
      for (std::size_t i = 0; i < s.in; ++i) z += w[o * s.in + i] * act[i];
      next[o] = (l + 1 < params.layers.size()) ? std::max(z, 0.0) : z;
    }
    act.swap(next);
  }
  return act;
}

std::array<double, 2> softmax(const std::array<double, 2>& z) noexcept {
  const double m = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - m);
  const double e1 = std::exp(z[1] - m);
  const double s = e0 + e1;
  return {e0 / s, e1 / s};
}

std::vector<double> softmax(std::span<const double> z) {
  if (z.empty()) return {};
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
  for (double& v : p) v /= s;
  return p;
}

double cross_entropy(const std::array<double, 2>& p, int y) {
  if (y != 0 && y != 1) throw InvalidArgument("label must be 0 or 1");
  return -std::log(metrics::clamp_probability(p[y]));
}

OutputLoss output_loss(std::span<const double> raw, int y, const LossSpec& spec, std::uint64_t noise_seed) {
  OutputLoss r;
  if (spec.kind == LossKind::CrossEntropy) {
    if (raw.size() < 2) throw InvalidArgument("cross-entropy needs 2 logits");
    r.prob = softmax(std::array<double, 2>{raw[0], raw[1]});
    r.loss = cross_entropy(r.prob, y);
    // Softmax-CE identity: d loss / d z = p - onehot(y). Exact zero once p[y] is clamped.
    const double py = r.prob[y];
    if (py >= metrics::kProbClamp && py <= 1.0 - metrics::kProbClamp) {
      r.d_raw[0] = r.prob[0] - (y == 0 ? 1.0 : 0.0);
      r.d_raw[1] = r.prob[1] - (y == 1 ? 1.0 : 0.0);
    }
    return r;
  }
  const auto out = du::DensityOutput::from_raw(raw);
  const auto g = du::du_loss_grad(out, y, du::MCConfig{spec.mc_samples, noise_seed, spec.antithetic});
  r.loss = g.loss;
  r.prob = g.prob;
  r.d_raw = {g.d_mu[0], g.d_mu[1], g.d_s_raw};
  return r;
}

double backward(const ModelParams& params, std::span<const double> x, int y, const LossSpec& spec,
                std::uint64_t noise_seed, std::span<double> grad) {
  if (x.size() != params.input_size()) throw InvalidArgument("input size does not match the model");
  if (grad.size() != params.size()) throw InvalidArgument("gradient buffer size does not match the model");
  if ((spec.kind == LossKind::DataUncertainty) != params.du_head)
    throw InvalidArgument("loss kind does not match the model head");

  const std::size_t L = params.layers.size();
  // acts[l] is the input to layer l; acts[L] holds the raw outputs.
  std::vector<std::vector<double>> acts(L + 1);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < L; ++l) {
    const auto& s = params.layers[l];
    const auto w = params.weights(l);
    const auto b = params.bias(l);
    acts[l + 1].assign(s.out, 0.0);
    for (std::size_t o = 0; o < s.out; ++o) {
      double z = b[o];
      for (std::size_t i = 0; i < s.in; ++i) z += w[o * s.in + i] * acts[l][i];
      acts[l + 1][o] = (l + 1 < L) ? std::max(z, 0.0) : z;
    }
  }

  const OutputLoss top = output_loss(acts[L], y, spec, noise_seed);
  std::vector<double> delta(top.d_raw.begin(), top.d_raw.begin() + static_cast<long>(params.output_size()));
  for (std::size_t l = L; l-- > 0;) {
    const auto& s = params.layers[l];
    const auto w = params.weights(l);
    double* gw = grad.data() + s.weight_offset;
    double* gb = grad.data() + s.bias_offset;
    std::vector<double> prev(s.in, 0.0);
    for (std::size_t o = 0; o < s.out; ++o) {
      gb[o] += delta[o];
      for (std::size_t i = 0; i < s.in; ++i) {
        gw[o * s.in + i] += delta[o] * acts[l][i];
        prev[i] += delta[o] * w[o * s.in + i];
      }
    }
    if (l > 0) {
      // ReLU: the post-activation value is zero exactly where the unit was inactive.
      for (std::size_t i = 0; i < s.in; ++i)
        if (acts[l][i] <= 0.0) prev[i] = 0.0;
    }
    delta.swap(prev);
  }
  return top.loss;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const AdamConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size())
    throw InvalidArgument("Adam: parameter, gradient and state sizes differ");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * g;
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

}  // namespace calibforge::nn
