// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

// Acceptance run. Each criterion prints one PASS/FAIL line with its runtime
// and a short detail string; the exit status is nonzero if any criterion
// fails. Usage: acceptance <work-dir>. The reference pipeline (seed 42,
// 20000 train / 2500 test, 295 features, 10 bins) runs twice under
// <work-dir>.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibforge/du_loss.hpp"
#include "calibforge/metrics.hpp"
#include "calibforge/nn.hpp"
#include "calibforge/pipeline.hpp"
#include "calibforge/scaling.hpp"

namespace fs = std::filesystem;
namespace du = calibforge::du;
namespace mt = calibforge::metrics;
namespace nn = calibforge::nn;
namespace pl = calibforge::pipeline;
namespace sc = calibforge::scaling;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void run(const std::string& id, const std::string& title, const std::function<Outcome()>& body,
         double budget_seconds = 0.0) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome r;
  try {
    r = body();
  } catch (const std::exception& e) {
    r = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_seconds > 0.0 && secs >= budget_seconds) {
    r.pass = false;
    r.detail += " (over the " + std::to_string(static_cast<int>(budget_seconds)) + " s budget)";
  }
  if (!r.pass) ++g_failures;
  std::printf("%s  %-4s %-44s %8.2fs  %s\n", r.pass ? "PASS" : "FAIL", id.c_str(), title.c_str(), secs,
              r.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

// ---- metrics oracle ---------------------------------------------------------

struct BruteMetrics {
  double ece = 0, mce = 0, nll_sum = 0, nll_mean = 0, accuracy = 0;
};

// Straight from the definitions: bin m holds confidences in ((m-1)/M, m/M],
// with confidence 0 in the first bin.
BruteMetrics brute_metrics(const std::vector<std::array<double, 2>>& probs, const std::vector<int>& labels, int M) {
  const std::size_t n = probs.size();
  BruteMetrics b;
  for (int m = 1; m <= M; ++m) {
    double count = 0, hits = 0, conf = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int pred = probs[i][1] > probs[i][0] ? 1 : 0;
      const double c = probs[i][pred];
      const double lo = static_cast<double>(m - 1) / M, hi = static_cast<double>(m) / M;
      if (!((c > lo && c <= hi) || (m == 1 && c == 0.0))) continue;
      count += 1;
      hits += pred == labels[i];
      conf += c;
    }
    if (count == 0) continue;
    const double gap = std::abs(hits / count - conf / count);
    b.ece += count / static_cast<double>(n) * gap;
    b.mce = std::max(b.mce, gap);
  }
  double correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int pred = probs[i][1] > probs[i][0] ? 1 : 0;
    correct += pred == labels[i];
    b.nll_sum -= std::log(std::min(std::max(probs[i][labels[i]], 1e-12), 1.0 - 1e-12));
  }
  b.accuracy = correct / static_cast<double>(n);
  b.nll_mean = b.nll_sum / static_cast<double>(n);
  return b;
}

Outcome criterion_metrics() {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> size(1, 50), label(0, 1), pick(0, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int bin_choices[] = {1, 5, 10};
  double worst = 0.0;
  for (int set = 0; set < 200; ++set) {
    const int M = bin_choices[set % 3];
    const int n = size(rng);
    std::vector<std::array<double, 2>> probs;
    std::vector<int> labels;
    std::vector<mt::PredictionRecord> records;
    for (int i = 0; i < n; ++i) {
      // Mix in exact boundary values and ties alongside uniform draws.
      double p0 = u(rng);
      if (pick(rng) == 0) p0 = std::round(p0 * M) / M;
      if (pick(rng) == 0) p0 = 0.5;
      probs.push_back({p0, 1.0 - p0});
      labels.push_back(label(rng));
      records.push_back(mt::make_record(probs.back(), labels.back()));
    }
    const auto ref = brute_metrics(probs, labels, M);
    const auto bins = mt::compute_bins(records, M);
    const auto nll = mt::nll(records);
    for (double d : {mt::ece(bins, records.size()) - ref.ece, mt::mce(bins) - ref.mce, nll.sum - ref.nll_sum,
                     nll.mean - ref.nll_mean, mt::accuracy(records) - ref.accuracy})
      worst = std::max(worst, std::abs(d));
  }
  return {worst <= 1e-12, "200 sets, max |diff| = " + fmt(worst, 3)};
}

// ---- gradients ----------------------------------------------------------------

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(d) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

Outcome criterion_gradients() {
  const double h = 1e-6;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> width(1, 8);

  double worst_ce = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto p = nn::init_params({static_cast<std::size_t>(width(rng)), static_cast<std::size_t>(width(rng)),
                              static_cast<std::size_t>(width(rng)), 2},
                             false, 700 + trial);
    for (double& v : p.values) v += 0.1 * g(rng);  // nonzero biases
    std::vector<double> x(p.input_size());
    for (double& v : x) v = g(rng);
    const int y = trial % 2;
    std::vector<double> an(p.values.size(), 0.0);
    nn::backward(p, x, y, {}, 0, an);
    auto loss = [&](const nn::ModelParams& q) {
      const auto z = nn::forward(q, x);
      return nn::cross_entropy(nn::softmax(std::array<double, 2>{z[0], z[1]}), y);
    };
    std::vector<double> fd(p.values.size());
    for (std::size_t k = 0; k < p.values.size(); ++k) {
      auto up = p, dn = p;
      up.values[k] += h;
      dn.values[k] -= h;
      fd[k] = (loss(up) - loss(dn)) / (2 * h);
    }
    worst_ce = std::max(worst_ce, rel_error(an, fd));
  }

  double worst_du = 0.0;
  std::normal_distribution<double> mu(0.0, 2.0);
  std::uniform_real_distribution<double> s(-2.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    du::DensityOutput o;
    o.mu = {mu(rng), mu(rng)};
    o.s_raw = s(rng);
    const int y = trial % 2;
    const auto draws = du::draw_noise(du::MCConfig{64, static_cast<std::uint64_t>(900 + trial), true});
    const auto an = du::du_loss_grad(o, y, draws);
    std::vector<double> fd(3);
    for (int k = 0; k < 3; ++k) {
      auto up = o, dn = o;
      (k < 2 ? up.mu[k] : up.s_raw) += h;
      (k < 2 ? dn.mu[k] : dn.s_raw) -= h;
      fd[k] = (du::du_loss(up, y, draws) - du::du_loss(dn, y, draws)) / (2 * h);
    }
    worst_du = std::max(worst_du, rel_error({an.d_mu[0], an.d_mu[1], an.d_s_raw}, fd));
  }
  return {worst_ce <= 1e-5 && worst_du <= 1e-5,
          "100+100 draws, max rel err CE " + fmt(worst_ce, 3) + ", DU(K=64) " + fmt(worst_du, 3)};
}

Outcome criterion_collapse_identity() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 6.0);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double u1 = g(rng), u2 = g(rng);
    worst = std::max(worst, std::abs(du::binary_collapse(u1, u2) - du::binary_collapse_softmax(u1, u2)));
  }
  return {worst <= 1e-12, "1000 pairs, max |diff| = " + fmt(worst, 3)};
}

// ---- damping against quadrature ----------------------------------------------

// Gauss-Hermite rule for the weight e^{-x^2} (Newton on the orthonormal
// Hermite recurrence).
std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  std::vector<double> x(n), w(n);
  double z = 0.0;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    if (i == 0) z = std::sqrt(2.0 * n + 1) - 1.85575 * std::pow(2.0 * n + 1, -0.16667);
    else if (i == 1) z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2) z = 1.86 * z - 0.86 * x[0];
    else if (i == 3) z = 1.91 * z - 0.91 * x[1];
    else z = 2.0 * z - x[i - 2];
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15) break;
    }
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = w[n - 1 - i] = 2.0 / (pp * pp);
  }
  return {x, w};
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// E[Sigmoid(mu_c + sigma_c Z)] for Z ~ N(0, 1).
double oracle_p1(double mu_c, double sigma_c) {
  static const auto q = gauss_hermite(80);
  double s = 0.0;
  for (std::size_t i = 0; i < q.first.size(); ++i)
    s += q.second[i] * logistic(mu_c + sigma_c * std::sqrt(2.0) * q.first[i]);
  return s / std::sqrt(std::numbers::pi);
}

// Per-logit sigma; the collapsed binary logit then has sigma_c = sigma * sqrt(2).
du::MCEstimate mc_p1(double mu_c, double sigma, std::uint64_t seed) {
  du::DensityOutput o;
  o.mu = {mu_c, 0.0};
  o.s_raw = std::log(sigma);
  return du::estimate_expected_prob(o, du::MCConfig{1'000'000, seed, true});
}

Outcome criterion_damping() {
  bool ok = true;
  double min_margin = 1e300;
  std::uint64_t seed = 4000;
  // P3: damping below the sigmoid at positive mean.
  for (double mu_c : {0.5, 1.0, 2.0}) {
    for (double sigma : {0.5, 1.0}) {
      const double ref = oracle_p1(mu_c, sigma * std::sqrt(2.0));
      const auto est = mc_p1(mu_c, sigma, seed++);
      const double margin = (logistic(mu_c) - est.prob[0]) / est.std_error;
      min_margin = std::min(min_margin, margin);
      ok = ok && ref < logistic(mu_c) && margin > 5.0 && std::abs(est.prob[0] - ref) <= 5.0 * est.std_error;
    }
  }
  // P4: monotone in sigma at mu_c = 1.
  const double sigmas[] = {0.25, 0.5, 1.0, 2.0};
  double prev_ref = 2.0;
  du::MCEstimate prev{{2.0, 0.0}, 0.0};
  for (double s : sigmas) {
    const double ref = oracle_p1(1.0, s * std::sqrt(2.0));
    const auto est = mc_p1(1.0, s, seed++);
    if (prev.std_error > 0.0) {
      const double margin = (prev.prob[0] - est.prob[0]) / (prev.std_error + est.std_error);
      min_margin = std::min(min_margin, margin);
      ok = ok && margin > 5.0;
    }
    ok = ok && ref < prev_ref;
    prev_ref = ref;
    prev = est;
  }
  // P5: the damping gap shrinks at high mean.
  const double s = std::sqrt(2.0);
  ok = ok && logistic(4.0) - oracle_p1(4.0, s) < logistic(1.0) - oracle_p1(1.0, s);
  return {ok, "P3/P4 smallest margin " + fmt(min_margin, 3) + " SE, P5 gaps " + fmt(logistic(4.0) - oracle_p1(4.0, s)) +
                  " < " + fmt(logistic(1.0) - oracle_p1(1.0, s))};
}

// ---- temperature recovery ----------------------------------------------------

Outcome criterion_temperature() {
  // Labels drawn from softmax(t); the model reports scale * t.
  auto make = [](double scale, std::uint64_t seed, std::vector<sc::Logits>& z, std::vector<int>& y,
                 double& generating_nll) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 2.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    generating_nll = 0.0;
    for (int i = 0; i < 50000; ++i) {
      const double t0 = g(rng), t1 = g(rng);
      const double p0 = 1.0 / (1.0 + std::exp(t1 - t0));
      y.push_back(u(rng) < p0 ? 0 : 1);
      z.push_back({t0 * scale, t1 * scale});
      generating_nll -= std::log(y.back() == 0 ? p0 : 1.0 - p0);
    }
    generating_nll /= 50000.0;
  };
  std::vector<sc::Logits> z;
  std::vector<int> y;
  double gen_nll = 0.0;
  make(2.5, 5, z, y, gen_nll);
  const auto fit = sc::fit_temperature(z, y);
  const double gap = fit.final_nll - gen_nll;

  std::vector<sc::Logits> zc;
  std::vector<int> yc;
  double unused = 0.0;
  make(1.0, 6, zc, yc, unused);
  const double T1 = sc::fit_temperature(zc, yc).params.temperature;

  const bool ok = std::abs(gap) <= 1e-3 && T1 >= 0.95 && T1 <= 1.05;
  return {ok, "x2.5 logits: T = " + fmt(fit.params.temperature) + ", NLL - generating = " + fmt(gap, 3) +
                  "; calibrated: T = " + fmt(T1)};
}

// ---- reference pipeline ------------------------------------------------------

void reference_pipeline(const std::string& out) {
  pl::GenOptions g;
  g.out = out;
  pl::cmd_gen(g);
  for (const char* loss : {"ce", "du"}) {
    pl::TrainOptions t;
    t.out = out;
    t.loss = loss;
    pl::cmd_train(t);
  }
  for (const char* kind : {"temperature", "vector", "matrix"}) {
    pl::CalibrateOptions c;
    c.out = out;
    c.kind = kind;
    pl::cmd_calibrate(c);
  }
  pl::EvalOptions e;
  e.out = out;
  pl::cmd_eval(e);
  for (const char* kind : {"temperature", "vector", "matrix"}) {
    e.scaler = (fs::path(out) / (std::string("scaler_") + kind + ".json")).string();
    pl::cmd_eval(e);
  }
  e.scaler.clear();
  e.model = (fs::path(out) / "model_du.txt").string();
  pl::cmd_eval(e);
  pl::CompareOptions cmp;
  cmp.out = out;
  pl::cmd_compare(cmp);
}

std::vector<int> predicted_column(const fs::path& csv) {
  std::istringstream is(slurp(csv));
  std::vector<int> out;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::stringstream ls(line);
    std::string cell;
    for (int k = 0; k <= 7; ++k) std::getline(ls, cell, ',');
    out.push_back(std::stoi(cell));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "calibforge_acceptance";
  const fs::path ref = work / "reference";
  const fs::path first = work / "reference_first";

  run("1", "metric oracle equivalence", criterion_metrics, 5.0);
  run("2", "gradient correctness", criterion_gradients, 30.0);
  run("3", "softmax/sigmoid collapse identity", criterion_collapse_identity);
  run("4", "damping against quadrature (P3-P5)", criterion_damping, 60.0);
  run("5", "temperature recovery", criterion_temperature);

  bool have_run = false;
  double pipeline_seconds = 0.0;
  run("ref", "reference pipeline", [&]() -> Outcome {
    fs::remove_all(work);
    fs::create_directories(work);
    const auto t0 = std::chrono::steady_clock::now();
    reference_pipeline(ref.string());
    pipeline_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    have_run = true;
    return {true, ref.string()};
  });
  if (!have_run) {
    std::printf("reference pipeline failed; skipping criteria 6-9\n");
    return 1;
  }

  const auto none = read_json(ref / "report_none.json");
  const auto temp = read_json(ref / "report_temperature.json");
  const auto dum = read_json(ref / "report_du.json");
  const double T = read_json(ref / "scaler_temperature.json")["T"].get<double>();
  const double ece_none = none["ece"].get<double>();

  run("6", "temperature scaling keeps argmax", [&]() -> Outcome {
    const auto a = predicted_column(ref / "predictions_none.csv");
    const auto b = predicted_column(ref / "predictions_temperature.csv");
    const bool same_acc = none["accuracy"].get<double>() == temp["accuracy"].get<double>();
    return {same_acc && a == b && !a.empty(),
            "accuracy " + fmt(none["accuracy"].get<double>(), 6) + " vs " + fmt(temp["accuracy"].get<double>(), 6) +
                ", " + std::to_string(a.size()) + " argmax labels compared"};
  });

  run("7a", "uncalibrated mid-bin gap > 2% (bins 5-7)", [&]() -> Outcome {
    double best = 0.0;
    int where = 0;
    for (const auto& b : none["bins"]) {
      const int m = b["m"].get<int>();
      if (m < 5 || m > 7 || b["empty"].get<bool>()) continue;
      const double gap = std::abs(b["acc"].get<double>() - b["conf"].get<double>());
      if (gap > best) best = gap, where = m;
    }
    return {best > 0.02, "largest gap " + fmt(100 * best, 3) + "% in bin " + std::to_string(where)};
  });
  run("7b", "temperature ECE >= 30% below uncalibrated", [&]() -> Outcome {
    const double e = temp["ece"].get<double>();
    return {e <= 0.7 * ece_none, "ECE " + fmt(100 * ece_none, 3) + "% -> " + fmt(100 * e, 3) + "% (" +
                                     fmt(100 * (1 - e / ece_none), 3) + "% reduction)"};
  });
  run("7c", "DU ECE >= 30% below uncalibrated", [&]() -> Outcome {
    const double e = dum["ece"].get<double>();
    return {e <= 0.7 * ece_none, "ECE " + fmt(100 * ece_none, 3) + "% -> " + fmt(100 * e, 3) + "% (" +
                                     fmt(100 * (1 - e / ece_none), 3) + "% reduction)"};
  });
  run("7d", "fitted temperature T > 1", [&]() -> Outcome { return {T > 1.0, "T = " + fmt(T, 6)}; });
  run("7e", "reference pipeline under 10 min", [&]() -> Outcome {
    return {pipeline_seconds < 600.0, fmt(pipeline_seconds, 4) + " s"};
  });
  run("8", "oracle ECE: DU no worse than uncalibrated", [&]() -> Outcome {
    const double d = dum["oracle_ece"].get<double>(), u = none["oracle_ece"].get<double>();
    return {d <= u, "oracle ECE DU " + fmt(100 * d, 4) + "% vs uncalibrated " + fmt(100 * u, 4) + "%"};
  });

  run("9", "byte-identical repeat of the reference run", [&]() -> Outcome {
    fs::rename(ref, first);
    reference_pipeline(ref.string());
    std::size_t compared = 0;
    std::vector<std::string> differing;
    for (const auto& entry : fs::directory_iterator(first)) {
      const auto name = entry.path().filename();
      if (!fs::exists(ref / name) || slurp(entry.path()) != slurp(ref / name)) differing.push_back(name.string());
      ++compared;
    }
    const bool ok = differing.empty() && compared > 0;
    std::string detail = std::to_string(compared) + " artifacts compared";
    for (const auto& d : differing) detail += ", differs: " + d;
    return {ok, detail};
  });

  std::printf("%s: %d criteria failed\n", g_failures == 0 ? "ALL PASS" : "FAILURES", g_failures);
  return g_failures == 0 ? 0 : 1;
}
