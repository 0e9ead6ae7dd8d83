// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#include "calibforge/du_loss.hpp"

#include <cmath>
#include <random>

#include "calibforge/error.hpp"
#include "calibforge/metrics.hpp"
#include "calibforge/nn.hpp"
#include "calibforge/rng.hpp"

namespace calibforge::du {

double DensityOutput::sigma() const noexcept { return std::exp(s_raw); }

DensityOutput DensityOutput::from_raw(std::span<const double> raw) {
  if (raw.size() != 3) throw InvalidArgument("density output needs 3 raw values (mu1, mu2, s)");
  return DensityOutput{{raw[0], raw[1]}, raw[2]};
}

std::vector<Eps> draw_noise(const MCConfig& mc) {
  if (mc.samples < 1) throw InvalidArgument("Monte-Carlo sample count must be at least 1");
  const auto k = static_cast<std::size_t>(mc.samples);
  std::vector<Eps> draws;
  draws.reserve(k);
  Rng rng(mc.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  while (draws.size() < k) {
    const Eps e{normal(rng), normal(rng)};
    draws.push_back(e);
    if (mc.antithetic && draws.size() < k) draws.push_back({-e[0], -e[1]});
  }
  return draws;
}

std::array<double, 2> sample_logits(const DensityOutput& out, const Eps& eps) noexcept {
  const double s = out.sigma();
  return {out.mu[0] + s * eps[0], out.mu[1] + s * eps[1]};
}

std::array<double, 2> expected_prob(const DensityOutput& out, std::span<const Eps> draws) {
  if (draws.empty()) throw InvalidArgument("expected_prob needs at least one draw");
  std::array<double, 2> acc{0.0, 0.0};
  for (const auto& e : draws) {
    const auto p = nn::softmax(sample_logits(out, e));
    acc[0] += p[0];
    acc[1] += p[1];
  }
  const double k = static_cast<double>(draws.size());
  return {acc[0] / k, acc[1] / k};
}

std::array<double, 2> expected_prob(const DensityOutput& out, const MCConfig& mc) {
  return expected_prob(out, draw_noise(mc));
}

MCEstimate estimate_expected_prob(const DensityOutput& out, const MCConfig& mc) {
  const auto draws = draw_noise(mc);
  MCEstimate est;
  est.prob = expected_prob(out, draws);

  // Independent units: antithetic pairs, or single draws.
  const std::size_t step = mc.antithetic ? 2 : 1;
  const std::size_t units = draws.size() / step;
  if (units < 2) return est;
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < units; ++i) {
    double v = 0.0;
    for (std::size_t j = 0; j < step; ++j) v += nn::softmax(sample_logits(out, draws[i * step + j]))[0];
    v /= static_cast<double>(step);
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  const double var = m2 / static_cast<double>(units - 1);
  est.std_error = std::sqrt(var / static_cast<double>(units));
  return est;
}

double du_loss(const DensityOutput& out, int y, std::span<const Eps> draws) {
  return nn::cross_entropy(expected_prob(out, draws), y);
}

double du_loss(const DensityOutput& out, int y, const MCConfig& mc) { return du_loss(out, y, draw_noise(mc)); }

DensityGrad du_loss_grad(const DensityOutput& out, int y, std::span<const Eps> draws) {
  if (y != 0 && y != 1) throw InvalidArgument("label must be 0 or 1");
  if (draws.empty()) throw InvalidArgument("du_loss_grad needs at least one draw");
  const double sigma = out.sigma();
  const double k = static_cast<double>(draws.size());

  // P_y = (1/K) sum_k p_k[y];  d p_k[y] / d u_k = p_k[y] * (onehot(y) - p_k).
  std::array<double, 2> mean_p{0.0, 0.0};
  std::array<double, 2> d_u_sum{0.0, 0.0};
  double d_s_sum = 0.0;
  for (const auto& e : draws) {
    const auto p = nn::softmax(sample_logits(out, e));
    mean_p[0] += p[0];
    mean_p[1] += p[1];
    const double g0 = p[y] * ((y == 0 ? 1.0 : 0.0) - p[0]);
    const double g1 = p[y] * ((y == 1 ? 1.0 : 0.0) - p[1]);
    d_u_sum[0] += g0;
    d_u_sum[1] += g1;
    d_s_sum += (g0 * e[0] + g1 * e[1]) * sigma;
  }
  mean_p[0] /= k;
  mean_p[1] /= k;

  DensityGrad g;
  g.prob = mean_p;
  const double py = mean_p[y];
  g.loss = -std::log(metrics::clamp_probability(py));
  // The clamp is flat outside its range.
  if (py < metrics::kProbClamp || py > 1.0 - metrics::kProbClamp) return g;
  const double scale = -1.0 / (py * k);
  g.d_mu = {scale * d_u_sum[0], scale * d_u_sum[1]};
  g.d_s_raw = scale * d_s_sum;
  return g;
}

DensityGrad du_loss_grad(const DensityOutput& out, int y, const MCConfig& mc) {
  return du_loss_grad(out, y, draw_noise(mc));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double binary_collapse(double u1, double u2) noexcept { return sigmoid(u1 - u2); }

double binary_collapse_softmax(double u1, double u2) noexcept { return nn::softmax({u1, u2})[0]; }

BinaryCollapse collapse(const DensityOutput& out, const Eps& eps) noexcept {
  BinaryCollapse c;
  c.mu_c = out.mu[0] - out.mu[1];
  c.sigma_c = out.sigma() * std::sqrt(2.0);
  c.p1 = sigmoid(c.mu_c + out.sigma() * (eps[0] - eps[1]));
  return c;
}

}  // namespace calibforge::du
