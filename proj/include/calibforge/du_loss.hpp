// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#pragma once

// Data-uncertainty loss for binary classification.
//
// A density head predicts logit means mu(x) and a raw scale s(x); the noise
// scale is sigma(x) = exp(s(x)), shared by both logits. Logits are sampled by
// reparameterization, u = mu + sigma * eps with eps ~ N(0, I), the class
// probability is the Monte-Carlo mean of softmax(u), and the loss is the
// cross-entropy of the label against that mean.
//
// With two classes, softmax(u)[0] = Sigmoid(u1 - u2) = Sigmoid(mu_c + sigma_c * z)
// where mu_c = mu1 - mu2, z ~ N(0, 1) and sigma_c = sigma * sqrt(2): the
// difference of two independent unit normals has variance 2.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace calibforge::du {

using Eps = std::array<double, 2>;

struct DensityOutput {
  std::array<double, 2> mu{0.0, 0.0};
  double s_raw = 0.0;

  double sigma() const noexcept;

  // raw = (mu_1, mu_2, s) as produced by a network with the DU head.
  static DensityOutput from_raw(std::span<const double> raw);
};

struct MCConfig {
  int samples = 32;
  std::uint64_t seed = 0;
  // Pairs each draw eps with -eps; an odd sample count leaves the last draw unpaired.
  bool antithetic = true;
};

inline constexpr int kDefaultTrainSamples = 32;
inline constexpr int kDefaultEvalSamples = 256;

// The K frozen standard-normal draws of an MCConfig. Same config, same draws.
std::vector<Eps> draw_noise(const MCConfig& mc);

std::array<double, 2> sample_logits(const DensityOutput& out, const Eps& eps) noexcept;

std::array<double, 2> expected_prob(const DensityOutput& out, std::span<const Eps> draws);
std::array<double, 2> expected_prob(const DensityOutput& out, const MCConfig& mc);

// Monte-Carlo estimate of E[p] together with the standard error of its first
// component. With antithetic sampling the error is computed over pair means.
struct MCEstimate {
  std::array<double, 2> prob{0.5, 0.5};
  double std_error = 0.0;
};
MCEstimate estimate_expected_prob(const DensityOutput& out, const MCConfig& mc);

double du_loss(const DensityOutput& out, int y, std::span<const Eps> draws);
double du_loss(const DensityOutput& out, int y, const MCConfig& mc);

// Pathwise gradient with the draws held fixed.
struct DensityGrad {
  double loss = 0.0;
  std::array<double, 2> d_mu{0.0, 0.0};
  double d_s_raw = 0.0;
  std::array<double, 2> prob{0.5, 0.5};  // E[p] used in the loss
};
DensityGrad du_loss_grad(const DensityOutput& out, int y, std::span<const Eps> draws);
DensityGrad du_loss_grad(const DensityOutput& out, int y, const MCConfig& mc);

// p1 = exp(u1) / (exp(u1) + exp(u2)), evaluated as Sigmoid(u1 - u2).
double binary_collapse(double u1, double u2) noexcept;
// The same probability through the two-way softmax.
double binary_collapse_softmax(double u1, double u2) noexcept;

double sigmoid(double x) noexcept;

// One sample of the collapsed binary form.
struct BinaryCollapse {
  double mu_c = 0.0;
  double sigma_c = 0.0;  // sigma * sqrt(2)
  double p1 = 0.5;
};
BinaryCollapse collapse(const DensityOutput& out, const Eps& eps) noexcept;

}  // namespace calibforge::du
