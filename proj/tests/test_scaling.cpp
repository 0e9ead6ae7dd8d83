// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "calibforge/error.hpp"
#include "calibforge/nn.hpp"
#include "calibforge/scaling.hpp"

namespace sc = calibforge::scaling;
using calibforge::InvalidArgument;
using sc::Logits;

namespace {

struct ValSet {
  std::vector<Logits> z;
  std::vector<int> y;
};

// Labels drawn from softmax(true_z); the stored logits are true_z * scale.
ValSet sample_set(std::size_t n, double scale, std::uint64_t seed, double spread = 2.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ValSet v;
  for (std::size_t i = 0; i < n; ++i) {
    const Logits t{g(rng), g(rng)};
    const double p0 = 1.0 / (1.0 + std::exp(t[1] - t[0]));
    v.y.push_back(u(rng) < p0 ? 0 : 1);
    v.z.push_back({t[0] * scale, t[1] * scale});
  }
  return v;
}

// Independent NLL of softmax(A z + c), written out without the library.
double affine_nll(const ValSet& v, const std::array<double, 4>& A, const std::array<double, 2>& c) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.z.size(); ++i) {
    const double a0 = A[0] * v.z[i][0] + A[1] * v.z[i][1] + c[0];
    const double a1 = A[2] * v.z[i][0] + A[3] * v.z[i][1] + c[1];
    const double m = std::max(a0, a1);
    const double lse = m + std::log(std::exp(a0 - m) + std::exp(a1 - m));
    s += lse - (v.y[i] == 0 ? a0 : a1);
  }
  return s / static_cast<double>(v.z.size());
}

}  // namespace

TEST(ApplyScaler, IdentitiesMatchSoftmax) {
  const Logits z{1.7, -0.4};
  const auto ref = calibforge::nn::softmax(z);
  for (auto kind : {sc::ScalerKind::Temperature, sc::ScalerKind::Vector, sc::ScalerKind::Matrix}) {
    const auto p = sc::apply_scaler(sc::ScalerParams::identity(kind), z);
    EXPECT_EQ(p.prob, ref);
    EXPECT_EQ(p.label, 0);
    EXPECT_EQ(p.confidence, ref[0]);
  }
}

TEST(ApplyScaler, LargeTemperatureFlattens) {
  auto s = sc::ScalerParams::identity(sc::ScalerKind::Temperature);
  s.temperature = 1e6;
  const auto p = sc::apply_scaler(s, {3.0, 0.0});
  EXPECT_NEAR(p.prob[0], 0.5, 1e-5);
  EXPECT_NEAR(p.prob[1], 0.5, 1e-5);
}

TEST(ApplyScaler, Transforms) {
  auto v = sc::ScalerParams::identity(sc::ScalerKind::Vector);
  v.w_diag = {2.0, -1.0};
  EXPECT_EQ(v.transform({1.5, 3.0}), (Logits{3.0, -3.0}));
  auto m = sc::ScalerParams::identity(sc::ScalerKind::Matrix);
  m.W = {1.0, 2.0, 3.0, 4.0};
  m.b = {0.5, -0.5};
  EXPECT_EQ(m.transform({1.0, 1.0}), (Logits{3.5, 6.5}));
  const auto p = sc::apply_scaler(m, {1.0, 1.0});
  EXPECT_EQ(p.label, 1);
}

TEST(ApplyScaler, Errors) {
  auto s = sc::ScalerParams::identity(sc::ScalerKind::Temperature);
  s.temperature = 0.0;
  EXPECT_THROW(sc::apply_scaler(s, {1.0, 0.0}), InvalidArgument);
  s.temperature = -2.0;
  EXPECT_THROW(sc::apply_scaler(s, {1.0, 0.0}), InvalidArgument);
  s.temperature = 1.0;
  EXPECT_THROW(sc::apply_scaler(s, {NAN, 0.0}), InvalidArgument);
  EXPECT_THROW(sc::apply_scaler(s, {INFINITY, 0.0}), InvalidArgument);
}

TEST(ApplyScaler, ProbabilitiesSumToOne) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0, 10);
  for (int k = 0; k < 1000; ++k) {
    sc::ScalerParams m = sc::ScalerParams::identity(sc::ScalerKind::Matrix);
    m.W = {g(rng), g(rng), g(rng), g(rng)};
    m.b = {g(rng), g(rng)};
    const auto p = sc::apply_scaler(m, {g(rng), g(rng)});
    EXPECT_NEAR(p.prob[0] + p.prob[1], 1.0, 1e-12);
  }
}

TEST(Temperature, PreservesArgmax) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0, 5);
  std::uniform_real_distribution<double> logt(std::log(1e-3), std::log(1e3));
  auto s = sc::ScalerParams::identity(sc::ScalerKind::Temperature);
  for (int k = 0; k < 5000; ++k) {
    const Logits z{g(rng), g(rng)};
    s.temperature = std::exp(logt(rng));
    EXPECT_EQ(sc::apply_scaler(s, z).label, calibforge::nn::softmax(z)[1] > calibforge::nn::softmax(z)[0] ? 1 : 0);
  }
  const auto tie = sc::apply_scaler(s, {0.3, 0.3});
  EXPECT_EQ(tie.label, 0);
}

TEST(Temperature, ConfidenceDecreasesInT) {
  auto s = sc::ScalerParams::identity(sc::ScalerKind::Temperature);
  const Logits z{2.0, -1.0};
  double prev = 1.0;
  for (double T : {0.1, 0.5, 1.0, 1.5, 3.0, 10.0, 100.0}) {
    s.temperature = T;
    const double c = sc::apply_scaler(s, z).confidence;
    EXPECT_LT(c, prev);
    prev = c;
  }
}

TEST(Temperature, RecoversGeneratingScale) {
  const double T0 = 2.5;
  const auto v = sample_set(50000, T0, 3);
  const auto r = sc::fit_temperature(v.z, v.y);
  EXPECT_NEAR(r.params.temperature, T0, 0.05 * T0);
  EXPECT_FALSE(r.warning);
  EXPECT_LE(r.final_nll, r.initial_nll + 1e-9);
}

TEST(Temperature, CalibratedLogitsGiveUnitT) {
  const auto v = sample_set(50000, 1.0, 4);
  const auto r = sc::fit_temperature(v.z, v.y);
  EXPECT_GE(r.params.temperature, 0.95);
  EXPECT_LE(r.params.temperature, 1.05);
}

TEST(Temperature, LocallyOptimal) {
  for (std::uint64_t seed : {5u, 6u, 7u}) {
    const auto v = sample_set(5000, 0.6 + 0.5 * static_cast<double>(seed - 5), seed);
    const auto r = sc::fit_temperature(v.z, v.y);
    auto s = r.params;
    const double f = sc::mean_nll(s, v.z, v.y);
    for (double k : {1.0 - 1e-3, 1.0 + 1e-3}) {
      s.temperature = r.params.temperature * k;
      EXPECT_GE(sc::mean_nll(s, v.z, v.y), f - 1e-9);
    }
  }
}

TEST(Temperature, DegenerateSetClampsWithWarning) {
  // Perfectly separated single-class data: NLL keeps falling as T shrinks.
  std::vector<Logits> z(100, Logits{4.0, -4.0});
  std::vector<int> y(100, 0);
  const auto r = sc::fit_temperature(z, y);
  EXPECT_TRUE(r.warning);
  EXPECT_NEAR(r.params.temperature, sc::kMinTemperature, 1e-6);
  EXPECT_FALSE(r.status.empty());
  // Labels always opposite to the logits: NLL falls as T grows.
  std::vector<int> wrong(100, 1);
  const auto w = sc::fit_temperature(z, wrong);
  EXPECT_TRUE(w.warning);
  EXPECT_NEAR(w.params.temperature, sc::kMaxTemperature, 1e-6 * sc::kMaxTemperature);
}

TEST(Temperature, Errors) {
  std::vector<Logits> none;
  std::vector<int> no_labels;
  EXPECT_THROW(sc::fit_temperature(none, no_labels), InvalidArgument);
  std::vector<Logits> z{{1.0, 0.0}};
  std::vector<int> y{0, 1};
  EXPECT_THROW(sc::fit_temperature(z, y), InvalidArgument);
}

TEST(VectorMatrix, CalibratedLogitsStayNearIdentity) {
  const auto v = sample_set(50000, 1.0, 8);
  const auto rv = sc::fit_vector(v.z, v.y);
  EXPECT_LT(std::abs(rv.params.w_diag[0] - 1.0), 0.1);
  EXPECT_LT(std::abs(rv.params.w_diag[1] - 1.0), 0.1);
  EXPECT_EQ(rv.params.b, (std::array<double, 2>{0.0, 0.0}));
  const auto rm = sc::fit_matrix(v.z, v.y);
  // Softmax is invariant to adding a shared row to W (and c to b); compare
  // in the identifiable differences.
  const auto& W = rm.params.W;
  EXPECT_LT(std::abs((W[0] - W[2]) - 1.0), 0.1);
  EXPECT_LT(std::abs((W[3] - W[1]) - 1.0), 0.1);
  EXPECT_LT(std::abs(rm.params.b[0] - rm.params.b[1]), 0.1);
  for (double w : W) EXPECT_TRUE(std::isfinite(w));
}

TEST(VectorMatrix, MatrixRecoversGeneratingNll) {
  // Labels from softmax(A z + c) with known A, c.
  const std::array<double, 4> A{0.6, -0.3, 0.2, 1.4};
  const std::array<double, 2> c{0.4, -0.2};
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 2.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ValSet v;
  for (int i = 0; i < 20000; ++i) {
    const Logits z{g(rng), g(rng)};
    const double a0 = A[0] * z[0] + A[1] * z[1] + c[0];
    const double a1 = A[2] * z[0] + A[3] * z[1] + c[1];
    v.y.push_back(u(rng) < 1.0 / (1.0 + std::exp(a1 - a0)) ? 0 : 1);
    v.z.push_back(z);
  }
  const auto r = sc::fit_matrix(v.z, v.y);
  const double generating = affine_nll(v, A, c);
  EXPECT_LE(r.final_nll, generating + 1e-3);
  EXPECT_NEAR(sc::mean_nll(r.params, v.z, v.y), affine_nll(v, r.params.W, r.params.b), 1e-12);
}

TEST(VectorMatrix, SingleIterationIsOneAdamStep) {
  const auto v = sample_set(2000, 3.0, 10);  // overconfident
  sc::FitOptions opt;
  opt.max_iterations = 1;
  const auto r = sc::fit_vector(v.z, v.y, opt);
  EXPECT_EQ(r.iterations, 1);
  // Oracle: the first bias-corrected Adam step is -lr * g / (|g| + eps).
  const double h = 1e-6;
  for (int j = 0; j < 2; ++j) {
    std::array<double, 4> up{1, 0, 0, 1}, dn{1, 0, 0, 1};
    up[j * 3] += h;
    dn[j * 3] -= h;
    const double g = (affine_nll(v, up, {0, 0}) - affine_nll(v, dn, {0, 0})) / (2 * h);
    const double expected = 1.0 - opt.learning_rate * g / (std::abs(g) + 1e-8);
    EXPECT_NEAR(r.params.w_diag[j], expected, 1e-6);
  }
  const auto m = sc::fit_matrix(v.z, v.y, opt);
  EXPECT_EQ(m.iterations, 1);
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(std::abs(m.params.W[k] - (k % 3 == 0 ? 1.0 : 0.0)), opt.learning_rate, 1e-6);
}

TEST(VectorMatrix, NeverWorseThanInitialization) {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const auto v = sample_set(500, 0.3 + 0.3 * static_cast<double>(seed - 20), seed);
    for (auto kind : {sc::ScalerKind::Temperature, sc::ScalerKind::Vector, sc::ScalerKind::Matrix}) {
      sc::FitOptions opt;
      opt.max_iterations = 300;
      opt.learning_rate = 0.5;  // deliberately aggressive
      const auto r = sc::fit(kind, v.z, v.y, opt);
      const double init = sc::mean_nll(sc::ScalerParams::identity(kind), v.z, v.y);
      EXPECT_LE(sc::mean_nll(r.params, v.z, v.y), init + 1e-9);
    }
  }
}

TEST(VectorMatrix, NonFiniteLogitsRejected) {
  std::vector<Logits> z{{1.0, 0.0}, {NAN, 1.0}};
  std::vector<int> y{0, 1};
  EXPECT_THROW(sc::fit_vector(z, y), InvalidArgument);
  EXPECT_THROW(sc::fit_matrix(z, y), InvalidArgument);
}

TEST(VectorMatrix, LogRecordsEveryIterate) {
  const auto v = sample_set(1000, 2.0, 11);
  sc::FitOptions opt;
  opt.max_iterations = 25;
  const auto r = sc::fit_matrix(v.z, v.y, opt);
  ASSERT_EQ(r.log.size(), 26u);
  EXPECT_EQ(r.log.front().iter, 0);
  EXPECT_EQ(r.log.front().nll, r.initial_nll);
  const auto csv = sc::fit_log_csv(r.log);
  EXPECT_EQ(csv.rfind("iter,nll,grad_norm\n", 0), 0u);
}

TEST(ScalerJson, RoundTrip) {
  auto t = sc::ScalerParams::identity(sc::ScalerKind::Temperature);
  t.temperature = 1.2345678901234567;
  auto v = sc::ScalerParams::identity(sc::ScalerKind::Vector);
  v.w_diag = {0.7, 1.0 / 3.0};
  auto m = sc::ScalerParams::identity(sc::ScalerKind::Matrix);
  m.W = {0.9, 0.1, -0.2, 1.1};
  m.b = {0.01, -0.02};
  for (const auto& s : {t, v, m}) {
    const auto back = sc::scaler_from_json(nlohmann::json::parse(sc::scaler_to_json(s).dump()));
    EXPECT_EQ(back.kind, s.kind);
    EXPECT_EQ(back.temperature, s.temperature);
    EXPECT_EQ(back.w_diag, s.w_diag);
    EXPECT_EQ(back.W, s.W);
    EXPECT_EQ(back.b, s.b);
  }
  EXPECT_EQ(sc::scaler_to_json(t).dump(), R"({"kind":"temperature","T":1.2345678901234567})");
  EXPECT_ANY_THROW(sc::scaler_from_json(nlohmann::json::parse(R"({"kind":"temperature","T":-1})")));
  EXPECT_ANY_THROW(sc::scaler_from_json(nlohmann::json::parse(R"({"kind":"platt"})")));
  EXPECT_ANY_THROW(sc::scaler_from_json(nlohmann::json::parse(R"({"kind":"matrix","W":[[1,0]],"b":[0,0]})")));
}
