// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

// OpenMP kernels against their serial references on the default network
// shape, one 512-row batch per iteration. Thread count comes from
// OMP_NUM_THREADS.

#include <numeric>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "calibforge/kernels.hpp"
#include "calibforge/nn.hpp"

namespace {

namespace kn = calibforge::kernels;
namespace nn = calibforge::nn;

constexpr std::size_t kRows = 512;

nn::TrainingSet random_set() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  nn::TrainingSet t;
  t.rows = kRows;
  t.cols = nn::default_layer_sizes().front();
  t.x.resize(t.rows * t.cols);
  for (double& v : t.x) v = g(rng);
  t.y.resize(t.rows);
  for (std::size_t i = 0; i < t.rows; ++i) t.y[i] = static_cast<int>(i % 2);
  return t;
}

struct Fixture {
  nn::TrainingSet data = random_set();
  std::vector<std::size_t> rows;
  nn::ModelParams ce = nn::init_params(nn::default_layer_sizes(), false, 1);
  nn::ModelParams du = nn::init_params(nn::default_layer_sizes(), true, 1);

  Fixture() : rows(kRows) { std::iota(rows.begin(), rows.end(), 0); }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

nn::LossSpec spec_for(bool du_loss) {
  nn::LossSpec s;
  if (du_loss) s.kind = nn::LossKind::DataUncertainty;
  return s;
}

template <bool Parallel>
void BM_BatchGradient(benchmark::State& state) {
  const auto& f = fixture();
  const bool du_loss = state.range(0) != 0;
  const auto spec = spec_for(du_loss);
  const auto& params = du_loss ? f.du : f.ce;
  for (auto _ : state) {
    auto g = Parallel ? kn::batch_gradient(params, f.data, f.rows, spec, 7)
                      : kn::batch_gradient_serial(params, f.data, f.rows, spec, 7);
    benchmark::DoNotOptimize(g.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(kRows));
  state.SetLabel(du_loss ? "du k=32" : "ce");
}

template <bool Parallel>
void BM_PredictRaw(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    auto raw = Parallel ? kn::predict_raw(f.ce, f.data) : kn::predict_raw_serial(f.ce, f.data);
    benchmark::DoNotOptimize(raw.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(kRows));
}

}  // namespace

BENCHMARK(BM_BatchGradient<false>)->Name("batch_gradient/serial")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchGradient<true>)->Name("batch_gradient/omp")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictRaw<false>)->Name("predict_raw/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictRaw<true>)->Name("predict_raw/omp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
