// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#include "calibforge/kernels.hpp"

#include <algorithm>

#include "calibforge/error.hpp"
#include "calibforge/metrics.hpp"
#include "calibforge/rng.hpp"

namespace calibforge::kernels {

namespace {

// Activations of one chunk, stored feature-major (width x B) so the inner
// loops run over the chunk's rows with unit stride.
struct ChunkWorkspace {
  std::vector<std::vector<double>> act;  // act[l]: input of layer l; act[L]: raw outputs
  std::vector<double> rows_major;        // B x in copy of a layer input
  std::vector<double> delta;
  std::vector<double> delta_prev;
};

void check_inputs(const nn::ModelParams& params, const nn::TrainingSet& data, std::span<const std::size_t> rows,
                  const nn::LossSpec* spec) {
  if (data.cols != params.input_size()) throw InvalidArgument("dataset width does not match the model input");
  if (data.x.size() != data.rows * data.cols) throw InvalidArgument("dataset feature matrix has the wrong size");
  for (std::size_t r : rows) {
    if (r >= data.rows) throw InvalidArgument("row index out of range");
    if (spec && data.y[r] != 0 && data.y[r] != 1) throw InvalidArgument("labels must be 0 or 1");
  }
  if (spec && (spec->kind == nn::LossKind::DataUncertainty) != params.du_head)
    throw InvalidArgument("loss kind does not match the model head");
}

void chunk_forward(const nn::ModelParams& params, const nn::TrainingSet& data, std::span<const std::size_t> rows,
                   ChunkWorkspace& ws) {
  const std::size_t B = rows.size();
  const std::size_t L = params.layers.size();
  ws.act.resize(L + 1);
  auto& x0 = ws.act[0];
  x0.assign(data.cols * B, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    const auto r = data.row(rows[b]);
    for (std::size_t i = 0; i < data.cols; ++i) x0[i * B + b] = r[i];
  }
  for (std::size_t l = 0; l < L; ++l) {
    const auto& s = params.layers[l];
    const auto w = params.weights(l);
    const auto bias = params.bias(l);
    const double* in = ws.act[l].data();
    auto& out = ws.act[l + 1];
    out.resize(s.out * B);
    for (std::size_t o = 0; o < s.out; ++o) {
      double* z = out.data() + o * B;
      std::fill(z, z + B, bias[o]);
      const double* wrow = w.data() + o * s.in;
      for (std::size_t i = 0; i < s.in; ++i) {
        const double wi = wrow[i];
        if (wi == 0.0) continue;
        const double* xi = in + i * B;
        for (std::size_t b = 0; b < B; ++b) z[b] += wi * xi[b];
      }
      if (l + 1 < L)
        for (std::size_t b = 0; b < B; ++b) z[b] = std::max(z[b], 0.0);
    }
  }
}

struct ChunkResult {
  double loss_sum = 0.0;
  std::size_t correct = 0;
};

ChunkResult chunk_backward(const nn::ModelParams& params, const nn::TrainingSet& data,
                           std::span<const std::size_t> rows, const nn::LossSpec& spec, std::uint64_t noise_base,
                           ChunkWorkspace& ws, std::span<double> grad) {
  chunk_forward(params, data, rows, ws);
  const std::size_t B = rows.size();
  const std::size_t L = params.layers.size();
  const std::size_t n_out = params.output_size();

  ChunkResult res;
  ws.delta.assign(n_out * B, 0.0);
  std::vector<double> raw(n_out);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t o = 0; o < n_out; ++o) raw[o] = ws.act[L][o * B + b];
    const int y = data.y[rows[b]];
    const auto ol = nn::output_loss(raw, y, spec, row_noise_seed(noise_base, rows[b]));
    res.loss_sum += ol.loss;
    res.correct += metrics::argmax(ol.prob) == y ? 1 : 0;
    for (std::size_t o = 0; o < n_out; ++o) ws.delta[o * B + b] = ol.d_raw[o];
  }

  for (std::size_t l = L; l-- > 0;) {
    const auto& s = params.layers[l];
    const auto w = params.weights(l);
    const double* in = ws.act[l].data();
    double* gw = grad.data() + s.weight_offset;
    double* gb = grad.data() + s.bias_offset;

    ws.rows_major.resize(B * s.in);
    for (std::size_t i = 0; i < s.in; ++i)
      for (std::size_t b = 0; b < B; ++b) ws.rows_major[b * s.in + i] = in[i * B + b];

    const bool need_prev = l > 0;
    if (need_prev) ws.delta_prev.assign(s.in * B, 0.0);
    for (std::size_t o = 0; o < s.out; ++o) {
      const double* d = ws.delta.data() + o * B;
      double* gwrow = gw + o * s.in;
      const double* wrow = w.data() + o * s.in;
      for (std::size_t b = 0; b < B; ++b) {
        const double db = d[b];
        if (db == 0.0) continue;
        gb[o] += db;
        const double* xb = ws.rows_major.data() + b * s.in;
        for (std::size_t i = 0; i < s.in; ++i) gwrow[i] += db * xb[i];
      }
      if (!need_prev) continue;
      for (std::size_t i = 0; i < s.in; ++i) {
        const double wi = wrow[i];
        if (wi == 0.0) continue;
        double* dp = ws.delta_prev.data() + i * B;
        for (std::size_t b = 0; b < B; ++b) dp[b] += wi * d[b];
      }
    }
    if (need_prev) {
      for (std::size_t k = 0; k < s.in * B; ++k)
        if (in[k] <= 0.0) ws.delta_prev[k] = 0.0;
      ws.delta.swap(ws.delta_prev);
    }
  }
  return res;
}

}  // namespace

std::uint64_t row_noise_seed(std::uint64_t noise_base, std::size_t row) noexcept {
  return derive_seed(noise_base, {static_cast<std::uint64_t>(row)});
}

BatchGradient batch_gradient(const nn::ModelParams& params, const nn::TrainingSet& data,
                             std::span<const std::size_t> rows, const nn::LossSpec& spec, std::uint64_t noise_base) {
  check_inputs(params, data, rows, &spec);
  if (rows.empty()) throw InvalidArgument("empty batch");
  const std::size_t n_chunks = (rows.size() + kChunkRows - 1) / kChunkRows;
  std::vector<std::vector<double>> partial(n_chunks);
  std::vector<ChunkResult> results(n_chunks);

#pragma omp parallel
  {
    ChunkWorkspace ws;
#pragma omp for schedule(static)
    for (std::size_t c = 0; c < n_chunks; ++c) {
      const std::size_t begin = c * kChunkRows;
      const std::size_t len = std::min(kChunkRows, rows.size() - begin);
      partial[c].assign(params.size(), 0.0);
      results[c] = chunk_backward(params, data, rows.subspan(begin, len), spec, noise_base, ws, partial[c]);
    }
  }

  BatchGradient out;
  out.rows = rows.size();
  out.grad.assign(params.size(), 0.0);
  for (std::size_t c = 0; c < n_chunks; ++c) {
    out.loss_sum += results[c].loss_sum;
    out.correct += results[c].correct;
    const auto& p = partial[c];
    for (std::size_t k = 0; k < p.size(); ++k) out.grad[k] += p[k];
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& g : out.grad) g *= inv;
  return out;
}

BatchGradient batch_gradient_serial(const nn::ModelParams& params, const nn::TrainingSet& data,
                                    std::span<const std::size_t> rows, const nn::LossSpec& spec,
                                    std::uint64_t noise_base) {
  check_inputs(params, data, rows, &spec);
  if (rows.empty()) throw InvalidArgument("empty batch");
  BatchGradient out;
  out.rows = rows.size();
  out.grad.assign(params.size(), 0.0);
  for (std::size_t r : rows) {
    const auto seed = row_noise_seed(noise_base, r);
    out.loss_sum += nn::backward(params, data.row(r), data.y[r], spec, seed, out.grad);
    const auto raw = nn::forward(params, data.row(r));
    const auto ol = nn::output_loss(raw, data.y[r], spec, seed);
    out.correct += metrics::argmax(ol.prob) == data.y[r] ? 1 : 0;
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (double& g : out.grad) g *= inv;
  return out;
}

std::vector<double> predict_raw(const nn::ModelParams& params, const nn::TrainingSet& data) {
  std::vector<std::size_t> all(data.rows);
  for (std::size_t r = 0; r < data.rows; ++r) all[r] = r;
  check_inputs(params, data, all, nullptr);
  const std::size_t n_out = params.output_size();
  const std::size_t L = params.layers.size();
  std::vector<double> out(data.rows * n_out);
  const std::size_t n_chunks = (data.rows + kChunkRows - 1) / kChunkRows;
  const std::span<const std::size_t> rows(all);

#pragma omp parallel
  {
    ChunkWorkspace ws;
#pragma omp for schedule(static)
    for (std::size_t c = 0; c < n_chunks; ++c) {
      const std::size_t begin = c * kChunkRows;
      const std::size_t len = std::min(kChunkRows, data.rows - begin);
      chunk_forward(params, data, rows.subspan(begin, len), ws);
      for (std::size_t b = 0; b < len; ++b)
        for (std::size_t o = 0; o < n_out; ++o) out[(begin + b) * n_out + o] = ws.act[L][o * len + b];
    }
  }
  return out;
}

std::vector<double> predict_raw_serial(const nn::ModelParams& params, const nn::TrainingSet& data) {
  const std::size_t n_out = params.output_size();
  std::vector<double> out;
  out.reserve(data.rows * n_out);
  for (std::size_t r = 0; r < data.rows; ++r) {
    const auto raw = nn::forward(params, data.row(r));
    out.insert(out.end(), raw.begin(), raw.end());
  }
  return out;
}

}  // namespace calibforge::kernels
