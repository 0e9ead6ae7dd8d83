// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#include "calibforge/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "calibforge/du_loss.hpp"
#include "calibforge/error.hpp"
#include "calibforge/rng.hpp"

namespace calibforge::datagen {

namespace {

enum Core : std::size_t { kMinute = 0, kGold = 1, kXp = 2, kKillsBlue = 3, kKillsRed = 4 };

// Advantage weights of the core features.
constexpr double kGoldWeight = 0.40;
constexpr double kXpWeight = 0.15;
constexpr double kKillWeight = 0.05;

double quantize(double v, double step) { return std::round(v / step) * step; }

}  // namespace

void validate(const SyntheticConfig& c) {
  if (c.n_matches == 0) throw InvalidArgument("n_matches must be positive");
  if (c.roster_size < 10) throw InvalidArgument("roster_size must be at least 10 (ten picks per match)");
  if (c.num_features < kCoreFeatures + 2 * c.roster_size)
    throw InvalidArgument("num_features must be at least 5 + 2 * roster_size");
  if (c.minute_min < 0 || c.minute_max < c.minute_min) throw InvalidArgument("minute range is empty");
  if (!(c.noise_floor >= 0.0) || !(c.noise_gain >= 0.0)) throw InvalidArgument("noise parameters must be nonnegative");
  if (!(c.noise_floor + c.noise_gain / (1.0 + c.minute_max / 10.0) > 0.0))
    throw InvalidArgument("noise temperature must stay positive");
  if (!std::isfinite(c.advantage_scale) || !std::isfinite(c.comp_effect) || c.comp_effect < 0.0)
    throw InvalidArgument("advantage_scale and comp_effect must be finite, comp_effect nonnegative");
}

nlohmann::ordered_json config_to_json(const SyntheticConfig& c) {
  nlohmann::ordered_json j;
  j["n_matches"] = c.n_matches;
  j["num_features"] = c.num_features;
  j["roster_size"] = c.roster_size;
  j["minute_min"] = c.minute_min;
  j["minute_max"] = c.minute_max;
  j["advantage_scale"] = c.advantage_scale;
  j["comp_effect"] = c.comp_effect;
  j["noise_floor"] = c.noise_floor;
  j["noise_gain"] = c.noise_gain;
  j["seed"] = c.seed;
  return j;
}

SyntheticConfig config_from_json(const nlohmann::json& j, SyntheticConfig c) {
  if (!j.is_object()) throw ConfigError("generator config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n_matches") c.n_matches = v.get<std::size_t>();
      else if (key == "num_features") c.num_features = v.get<std::size_t>();
      else if (key == "roster_size") c.roster_size = v.get<std::size_t>();
      else if (key == "minute_min") c.minute_min = v.get<int>();
      else if (key == "minute_max") c.minute_max = v.get<int>();
      else if (key == "advantage_scale") c.advantage_scale = v.get<double>();
      else if (key == "comp_effect") c.comp_effect = v.get<double>();
      else if (key == "noise_floor") c.noise_floor = v.get<double>();
      else if (key == "noise_gain") c.noise_gain = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw ConfigError("unknown generator config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad generator config value: ") + e.what());
  }
  return c;
}

double noise_temperature(const SyntheticConfig& c, double minute) {
  return c.noise_floor + c.noise_gain / (1.0 + minute / 10.0);
}

std::vector<double> champion_strengths(const SyntheticConfig& c) {
  Rng rng(derive_seed(c.seed, {0xc4a3}));
  std::normal_distribution<double> normal(0.0, c.comp_effect > 0.0 ? c.comp_effect : 1.0);
  std::vector<double> s(c.roster_size);
  for (double& v : s) v = c.comp_effect > 0.0 ? normal(rng) : 0.0;
  return s;
}

double advantage(const SyntheticConfig& c, std::span<const double> strength, std::span<const double> x) {
  if (x.size() != c.num_features) throw InvalidArgument("feature vector has the wrong length");
  const double minute = x[kMinute];
  // A lead of fixed size matters more early in the game.
  const double phase = 20.0 / (minute + 10.0);
  double a = (kGoldWeight * x[kGold] + kXpWeight * x[kXp] + kKillWeight * (x[kKillsRed] - x[kKillsBlue])) * phase;
  const std::size_t R = c.roster_size;
  for (std::size_t j = 0; j < R; ++j) a += (x[kCoreFeatures + R + j] - x[kCoreFeatures + j]) * strength[j];
  return c.advantage_scale * a;
}

double true_probability(const SyntheticConfig& c, std::span<const double> strength, std::span<const double> x) {
  return du::sigmoid(advantage(c, strength, x) / noise_temperature(c, x[kMinute]));
}

Sample generate_match(const SyntheticConfig& c, std::span<const double> strength, std::size_t i) {
  Rng rng(derive_seed(c.seed, {0x6d61, static_cast<std::uint64_t>(i)}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> minute_dist(c.minute_min, c.minute_max);

  Sample s;
  s.features.assign(c.num_features, 0.0);
  auto& x = s.features;
  const int t = minute_dist(rng);
  const double skill = normal(rng);  // unobserved red-minus-blue edge
  const double rt = std::sqrt(static_cast<double>(t));
  x[kMinute] = t;
  x[kGold] = quantize(0.12 * skill * t + 0.35 * rt * normal(rng), 1e-3);
  x[kXp] = quantize(0.8 * x[kGold] + 0.25 * rt * normal(rng), 1e-3);
  std::poisson_distribution<int> kills_red(0.2 * t * std::exp(0.15 * skill) + 1e-9);
  std::poisson_distribution<int> kills_blue(0.2 * t * std::exp(-0.15 * skill) + 1e-9);
  x[kKillsRed] = kills_red(rng);
  x[kKillsBlue] = kills_blue(rng);

  // Ten distinct picks: the first five blue, the rest red.
  std::vector<std::size_t> roster(c.roster_size);
  std::iota(roster.begin(), roster.end(), std::size_t{0});
  for (std::size_t k = 0; k < 10; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, c.roster_size - 1);
    std::swap(roster[k], roster[pick(rng)]);
    x[kCoreFeatures + (k < 5 ? 0 : c.roster_size) + roster[k]] = 1.0;
  }
  for (std::size_t j = kCoreFeatures + 2 * c.roster_size; j < c.num_features; ++j) x[j] = quantize(normal(rng), 1e-3);

  const double p = true_probability(c, strength, x);
  s.p_true = p;
  std::bernoulli_distribution outcome(p);
  s.label = outcome(rng) ? 1 : 0;
  return s;
}

std::vector<Sample> generate_dataset(const SyntheticConfig& c) {
  validate(c);
  const auto strength = champion_strengths(c);
  std::vector<Sample> out(c.n_matches);
  const auto n = static_cast<long long>(c.n_matches);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) out[i] = generate_match(c, strength, static_cast<std::size_t>(i));
  return out;
}

std::vector<std::string> feature_names(std::size_t num_features, std::size_t roster_size) {
  if (num_features < kCoreFeatures + 2 * roster_size)
    throw InvalidArgument("num_features must be at least 5 + 2 * roster_size");
  std::vector<std::string> names{"minute", "gold_diff", "xp_diff", "kills_blue", "kills_red"};
  for (std::size_t j = 0; j < 2 * roster_size; ++j) names.push_back("comp_" + std::to_string(j));
  for (std::size_t j = 0; j < num_features - kCoreFeatures - 2 * roster_size; ++j)
    names.push_back("filler_" + std::to_string(j));
  return names;
}

double true_confidence(double p_true, int predicted_label) noexcept {
  return predicted_label == 1 ? p_true : 1.0 - p_true;
}

double oracle_ece(std::span<const double> predicted, std::span<const double> true_conf) {
  if (predicted.empty()) throw InvalidArgument("oracle_ece of an empty set");
  if (predicted.size() != true_conf.size()) throw InvalidArgument("oracle_ece inputs differ in length");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += std::abs(predicted[i] - true_conf[i]);
  return s / static_cast<double>(predicted.size());
}

double oracle_ece(std::span<const metrics::PredictionRecord> records, std::span<const Sample> samples) {
  if (records.size() != samples.size()) throw InvalidArgument("records and samples differ in length");
  std::vector<double> pred(records.size()), truth(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!samples[i].p_true) throw InvalidArgument("oracle_ece needs p_true for every sample");
    pred[i] = records[i].confidence;
    truth[i] = true_confidence(*samples[i].p_true, records[i].predicted_label);
  }
  return oracle_ece(pred, truth);
}

bool Dataset::has_p_true() const noexcept {
  return !samples.empty() && std::all_of(samples.begin(), samples.end(), [](const Sample& s) { return s.p_true.has_value(); });
}

Split split(std::span<const Sample> data, const std::array<double, 3>& f, std::uint64_t seed) {
  for (double v : f)
    if (!(v >= 0.0)) throw InvalidArgument("split fractions must be nonnegative");
  if (f[0] + f[1] + f[2] > 1.0 + 1e-12) throw InvalidArgument("split fractions sum to more than 1");
  const std::size_t n = data.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x5b17}));
  std::shuffle(idx.begin(), idx.end(), rng);

  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f[1]));
  const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f[2]));
  const std::size_t n_train = n - n_val - n_test;
  Split s;
  s.train.reserve(n_train);
  s.val.reserve(n_val);
  s.test.reserve(n_test);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& sample = data[idx[k]];
    if (k < n_train) s.train.push_back(sample);
    else if (k < n_train + n_val) s.val.push_back(sample);
    else s.test.push_back(sample);
  }
  return s;
}

nn::TrainingSet to_training_set(std::span<const Sample> samples) {
  nn::TrainingSet t;
  t.rows = samples.size();
  t.cols = samples.empty() ? 0 : samples.front().features.size();
  t.x.reserve(t.rows * t.cols);
  t.y.reserve(t.rows);
  for (const auto& s : samples) {
    if (s.features.size() != t.cols) throw InvalidArgument("samples differ in feature count");
    t.x.insert(t.x.end(), s.features.begin(), s.features.end());
    t.y.push_back(s.label);
  }
  return t;
}

}  // namespace calibforge::datagen
