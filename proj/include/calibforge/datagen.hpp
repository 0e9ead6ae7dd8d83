// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#pragma once

// Synthetic match-state data with a known win probability.
//
// Each sample is one snapshot of one match at a random in-game minute. The
// feature layout is
//   minute, gold_diff, xp_diff, kills_blue, kills_red,
//   comp_0 .. comp_{R-1}    1 if the blue team picked champion j
//   comp_R .. comp_{2R-1}   1 if the red team picked champion j - R
//   filler_0 ..             context features with no effect on the outcome
// A match has ten distinct picks, five per team. With the defaults (F = 295,
// R = 100) there are 90 filler columns.
// Differences are red minus blue, gold and experience in thousands. Label 1
// means the red team wins.
//
// The red-win probability is p_true = Sigmoid(a / tau(x)) where a is a linear
// advantage score over the state features and the champion picks, and
// tau(x) = noise_floor + noise_gain / (1 + minute / 10) makes early-game
// snapshots noisier than late-game ones.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "calibforge/metrics.hpp"
#include "calibforge/nn.hpp"

namespace calibforge::datagen {

inline constexpr std::size_t kCoreFeatures = 5;  // minute, gold, xp, kills x2

struct Sample {
  std::vector<double> features;
  int label = 0;  // 0 blue win, 1 red win
  std::optional<double> p_true;
};

struct SyntheticConfig {
  std::size_t n_matches = 20000;
  std::size_t num_features = 295;
  std::size_t roster_size = 100;
  int minute_min = 1;
  int minute_max = 40;
  double advantage_scale = 1.0;
  double comp_effect = 0.08;
  double noise_floor = 0.3;
  double noise_gain = 1.2;
  std::uint64_t seed = 42;

  std::size_t filler_count() const noexcept { return num_features - kCoreFeatures - 2 * roster_size; }
};

void validate(const SyntheticConfig& config);

nlohmann::ordered_json config_to_json(const SyntheticConfig& config);
// Strict: unknown keys raise ConfigError. Missing keys keep their defaults.
SyntheticConfig config_from_json(const nlohmann::json& j, SyntheticConfig base = {});

// Noise temperature of a snapshot at the given minute.
double noise_temperature(const SyntheticConfig& config, double minute);

// Latent advantage a(x) of the red team and the resulting p_true.
double advantage(const SyntheticConfig& config, std::span<const double> champion_strength,
                 std::span<const double> features);
double true_probability(const SyntheticConfig& config, std::span<const double> champion_strength,
                        std::span<const double> features);

// Per-champion strengths drawn from the config seed. Part of the generating model.
std::vector<double> champion_strengths(const SyntheticConfig& config);

std::vector<Sample> generate_dataset(const SyntheticConfig& config);

// Generates match i alone; generate_dataset is the concatenation over i.
Sample generate_match(const SyntheticConfig& config, std::span<const double> champion_strength, std::size_t i);

std::vector<std::string> feature_names(std::size_t num_features, std::size_t roster_size);

// Probability that the predicted class is right according to p_true.
double true_confidence(double p_true, int predicted_label) noexcept;

// Mean |predicted confidence - true confidence of the predicted class|.
double oracle_ece(std::span<const double> predicted_confidence, std::span<const double> true_conf);
double oracle_ece(std::span<const metrics::PredictionRecord> records, std::span<const Sample> samples);

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<Sample> samples;

  bool has_p_true() const noexcept;
  std::size_t num_features() const noexcept { return feature_names.size(); }
};

// CSV: header of feature names, then label and an optional p_true column.
// Lines starting with '#' before the header are comments.
void write_dataset(const std::string& path, const Dataset& data, const std::string& comment = {});
Dataset read_dataset(const std::string& path);
std::string dataset_csv(const Dataset& data, const std::string& comment = {});
Dataset parse_dataset(const std::string& text);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

// Seeded shuffle, then floor(n * f_val) rows to val, floor(n * f_test) rows to
// test and the remainder to train. Fractions must be nonnegative with sum <= 1.
Split split(std::span<const Sample> data, const std::array<double, 3>& fractions, std::uint64_t seed);

nn::TrainingSet to_training_set(std::span<const Sample> samples);

}  // namespace calibforge::datagen
