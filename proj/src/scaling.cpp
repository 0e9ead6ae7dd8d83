// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#include "calibforge/scaling.hpp"

#include <algorithm>
#include <cmath>

#include "calibforge/error.hpp"
#include "calibforge/metrics.hpp"
#include "calibforge/nn.hpp"
#include "format.hpp"

namespace calibforge::scaling {

std::string_view to_string(ScalerKind kind) noexcept {
  switch (kind) {
    case ScalerKind::Temperature: return "temperature";
    case ScalerKind::Vector: return "vector";
    case ScalerKind::Matrix: return "matrix";
  }
  return "temperature";
}

ScalerKind parse_scaler_kind(std::string_view name) {
  if (name == "temperature") return ScalerKind::Temperature;
  if (name == "vector") return ScalerKind::Vector;
  if (name == "matrix") return ScalerKind::Matrix;
  throw InvalidArgument("unknown scaler kind '" + std::string(name) + "'");
}

ScalerParams ScalerParams::identity(ScalerKind kind) {
  ScalerParams p;
  p.kind = kind;
  return p;
}

Logits ScalerParams::transform(const Logits& z) const {
  switch (kind) {
    case ScalerKind::Temperature:
      if (!(temperature > 0.0) || !std::isfinite(temperature)) throw InvalidArgument("temperature must be positive");
      return {z[0] / temperature, z[1] / temperature};
    case ScalerKind::Vector:
      return {w_diag[0] * z[0], w_diag[1] * z[1]};
    case ScalerKind::Matrix:
      return {W[0] * z[0] + W[1] * z[1] + b[0], W[2] * z[0] + W[3] * z[1] + b[1]};
  }
  return z;
}

ScaledPrediction apply_scaler(const ScalerParams& scaler, const Logits& z) {
  if (!std::isfinite(z[0]) || !std::isfinite(z[1])) throw InvalidArgument("logits must be finite");
  const auto u = scaler.transform(z);
  ScaledPrediction out;
  out.prob = nn::softmax(u);
  out.label = metrics::argmax(u);
  out.confidence = out.prob[out.label];
  return out;
}

namespace {

void check_fit_inputs(std::span<const Logits> logits, std::span<const int> labels) {
  if (logits.empty()) throw InvalidArgument("validation set is empty");
  if (logits.size() != labels.size()) throw InvalidArgument("logits and labels differ in length");
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i][0]) || !std::isfinite(logits[i][1]))
      throw InvalidArgument("non-finite logit at validation row " + std::to_string(i));
    if (labels[i] != 0 && labels[i] != 1) throw InvalidArgument("labels must be 0 or 1");
  }
}

double nll_of(const Logits& u, int y) { return -std::log(metrics::clamp_probability(nn::softmax(u)[y])); }

// Mean NLL of softmax(a z) with first and second derivatives in a = 1/T.
struct InverseTempEval {
  double f = 0.0, fa = 0.0, faa = 0.0;
};

InverseTempEval eval_inverse_temperature(double a, std::span<const Logits> logits, std::span<const int> labels) {
  InverseTempEval e;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto& z = logits[i];
    const auto p = nn::softmax(Logits{a * z[0], a * z[1]});
    e.f += -std::log(metrics::clamp_probability(p[labels[i]]));
    const double mean_z = p[0] * z[0] + p[1] * z[1];
    e.fa += mean_z - z[labels[i]];
    e.faa += p[0] * z[0] * z[0] + p[1] * z[1] * z[1] - mean_z * mean_z;
  }
  const double n = static_cast<double>(logits.size());
  e.f /= n;
  e.fa /= n;
  e.faa /= n;
  return e;
}

// In theta = log T, a = exp(-theta): f_theta = -a f_a, f_thetatheta = a^2 f_aa + a f_a.
struct LogTempEval {
  double f = 0.0, d1 = 0.0, d2 = 0.0;
};

LogTempEval eval_log_temperature(double theta, std::span<const Logits> logits, std::span<const int> labels) {
  const double a = std::exp(-theta);
  const auto e = eval_inverse_temperature(a, logits, labels);
  return {e.f, -a * e.fa, a * a * e.faa + a * e.fa};
}

}  // namespace

double mean_nll(const ScalerParams& scaler, std::span<const Logits> logits, std::span<const int> labels) {
  check_fit_inputs(logits, labels);
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) s += nll_of(scaler.transform(logits[i]), labels[i]);
  return s / static_cast<double>(logits.size());
}

FitResult fit_temperature(std::span<const Logits> logits, std::span<const int> labels) {
  check_fit_inputs(logits, labels);
  const double lo_bound = std::log(kMinTemperature), hi_bound = std::log(kMaxTemperature);
  auto f = [&](double theta) { return eval_log_temperature(theta, logits, labels).f; };

  FitResult res;
  res.params = ScalerParams::identity(ScalerKind::Temperature);
  res.initial_nll = f(0.0);

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo_bound, b = hi_bound;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  int iter = 0;
  while (b - a > 1e-10 && iter < 200) {
    ++iter;
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    const double mid = 0.5 * (a + b);
    const auto ev = eval_log_temperature(mid, logits, labels);
    res.log.push_back({iter, ev.f, std::abs(ev.d1)});
  }
  double theta = 0.5 * (a + b);
  auto ev = eval_log_temperature(theta, logits, labels);

  for (int k = 0; k < 3; ++k) {
    if (!(ev.d2 > 0.0)) break;
    const double cand = std::clamp(theta - ev.d1 / ev.d2, lo_bound, hi_bound);
    const auto ec = eval_log_temperature(cand, logits, labels);
    if (!(ec.f <= ev.f)) break;
    theta = cand;
    ev = ec;
    ++iter;
    res.log.push_back({iter, ev.f, std::abs(ev.d1)});
  }

  res.iterations = iter;
  const double edge_tol = 1e-6;
  res.warning = theta - lo_bound < edge_tol || hi_bound - theta < edge_tol;
  res.converged = !res.warning;
  if (ev.f > res.initial_nll) {
    theta = 0.0;
    ev = eval_log_temperature(theta, logits, labels);
  }
  res.params.temperature = std::exp(theta);
  res.final_nll = ev.f;
  res.status = res.warning ? "warning: temperature clamped to search bound (degenerate validation set)" : "ok";
  return res;
}

namespace {

// Packs the trainable entries of a vector/matrix scaler.
std::vector<double> pack(const ScalerParams& p) {
  if (p.kind == ScalerKind::Vector) return {p.w_diag[0], p.w_diag[1]};
  return {p.W[0], p.W[1], p.W[2], p.W[3], p.b[0], p.b[1]};
}

void unpack(std::span<const double> v, ScalerParams& p) {
  if (p.kind == ScalerKind::Vector) {
    p.w_diag = {v[0], v[1]};
  } else {
    p.W = {v[0], v[1], v[2], v[3]};
    p.b = {v[4], v[5]};
  }
}

// Mean NLL and its gradient in packed order.
double nll_and_grad(const ScalerParams& p, std::span<const Logits> logits, std::span<const int> labels,
                    std::vector<double>& grad) {
  grad.assign(p.kind == ScalerKind::Vector ? 2 : 6, 0.0);
  double f = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const auto& z = logits[i];
    const int y = labels[i];
    const auto u = p.transform(z);
    const auto prob = nn::softmax(u);
    f += -std::log(metrics::clamp_probability(prob[y]));
    const double r0 = prob[0] - (y == 0 ? 1.0 : 0.0);
    const double r1 = prob[1] - (y == 1 ? 1.0 : 0.0);
    if (p.kind == ScalerKind::Vector) {
      grad[0] += r0 * z[0];
      grad[1] += r1 * z[1];
    } else {
      grad[0] += r0 * z[0];
      grad[1] += r0 * z[1];
      grad[2] += r1 * z[0];
      grad[3] += r1 * z[1];
      grad[4] += r0;
      grad[5] += r1;
    }
  }
  const double n = static_cast<double>(logits.size());
  for (double& g : grad) g /= n;
  return f / n;
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

FitResult fit_affine(ScalerKind kind, std::span<const Logits> logits, std::span<const int> labels,
                     const FitOptions& options) {
  check_fit_inputs(logits, labels);
  if (options.max_iterations < 1) throw InvalidArgument("iteration budget must be at least 1");

  FitResult res;
  ScalerParams current = ScalerParams::identity(kind);
  std::vector<double> theta = pack(current), grad;
  double f = nll_and_grad(current, logits, labels, grad);
  double gnorm = norm2(grad);
  res.initial_nll = f;
  res.log.push_back({0, f, gnorm});

  ScalerParams best = current;
  double best_f = f;
  nn::AdamState adam(theta.size());
  const nn::AdamConfig adam_cfg{options.learning_rate, 0.9, 0.999, 1e-8};

  int it = 0;
  while (it < options.max_iterations) {
    if (gnorm < options.grad_tolerance) {
      res.converged = true;
      break;
    }
    ++it;
    nn::adam_step(theta, grad, adam, adam_cfg);
    unpack(theta, current);
    f = nll_and_grad(current, logits, labels, grad);
    gnorm = norm2(grad);
    res.log.push_back({it, f, gnorm});
    if (f < best_f) {
      best_f = f;
      best = current;
    }
  }
  if (!res.converged && gnorm < options.grad_tolerance) res.converged = true;

  res.params = best;
  res.final_nll = best_f;
  res.iterations = it;
  res.status = res.converged ? "ok" : "iteration budget exhausted";
  return res;
}

}  // namespace

FitResult fit_vector(std::span<const Logits> logits, std::span<const int> labels, const FitOptions& options) {
  return fit_affine(ScalerKind::Vector, logits, labels, options);
}

FitResult fit_matrix(std::span<const Logits> logits, std::span<const int> labels, const FitOptions& options) {
  return fit_affine(ScalerKind::Matrix, logits, labels, options);
}

FitResult fit(ScalerKind kind, std::span<const Logits> logits, std::span<const int> labels,
              const FitOptions& options) {
  if (kind == ScalerKind::Temperature) return fit_temperature(logits, labels);
  return fit_affine(kind, logits, labels, options);
}

nlohmann::ordered_json scaler_to_json(const ScalerParams& s) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(s.kind));
  switch (s.kind) {
    case ScalerKind::Temperature: j["T"] = s.temperature; break;
    case ScalerKind::Vector: j["w_diag"] = {s.w_diag[0], s.w_diag[1]}; break;
    case ScalerKind::Matrix:
      j["W"] = {{s.W[0], s.W[1]}, {s.W[2], s.W[3]}};
      j["b"] = {s.b[0], s.b[1]};
      break;
  }
  return j;
}

ScalerParams scaler_from_json(const nlohmann::json& j) {
  try {
    ScalerParams s = ScalerParams::identity(parse_scaler_kind(j.at("kind").get<std::string>()));
    switch (s.kind) {
      case ScalerKind::Temperature:
        s.temperature = j.at("T").get<double>();
        if (!(s.temperature > 0.0)) throw InvalidArgument("scaler temperature must be positive");
        break;
      case ScalerKind::Vector: {
        const auto w = j.at("w_diag").get<std::vector<double>>();
        if (w.size() != 2) throw SchemaError("w_diag must have 2 entries");
        s.w_diag = {w[0], w[1]};
        break;
      }
      case ScalerKind::Matrix: {
        const auto W = j.at("W").get<std::vector<std::vector<double>>>();
        const auto b = j.at("b").get<std::vector<double>>();
        if (W.size() != 2 || W[0].size() != 2 || W[1].size() != 2 || b.size() != 2)
          throw SchemaError("matrix scaler needs a 2x2 W and a 2-vector b");
        s.W = {W[0][0], W[0][1], W[1][0], W[1][1]};
        s.b = {b[0], b[1]};
        break;
      }
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed scaler: ") + e.what());
  }
}

std::string fit_log_csv(std::span<const FitLogEntry> log) {
  std::string out = "iter,nll,grad_norm\n";
  for (const auto& e : log) {
    out += std::to_string(e.iter);
    out += ',';
    detail::append_double(out, e.nll);
    out += ',';
    detail::append_double(out, e.grad_norm);
    out += '\n';
  }
  return out;
}

}  // namespace calibforge::scaling
