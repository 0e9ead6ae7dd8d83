// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#include "calibforge/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "calibforge/du_loss.hpp"
#include "calibforge/error.hpp"
#include "calibforge/kernels.hpp"
#include "calibforge/rng.hpp"
#include "format.hpp"

namespace calibforge::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string tool_string() { return std::string(kToolName) + " " + std::string(kToolVersion); }

namespace {

template <class Assign>
void strict_apply(const json& j, std::string_view section, Assign&& assign) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    try {
      known = assign(key, value);
    } catch (const json::exception& e) {
      throw ConfigError("bad value for " + std::string(section) + "." + key + ": " + e.what());
    }
    if (!known) throw ConfigError("unknown " + std::string(section) + " config key '" + key + "'");
  }
}

std::string path_in(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw IoError("failed writing '" + path + "'");
}

json read_json(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ParseError("'" + path + "' is not valid JSON: " + e.what(), 0);
  }
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw IoError(what + " '" + path + "' does not exist");
}

void log_config(std::string_view command, const ojson& config) {
  std::cerr << kToolName << ' ' << command << ": resolved config " << config.dump() << '\n';
}

ojson provenance(std::string_view command, const ojson& config) {
  ojson j;
  j["tool"] = tool_string();
  j["command"] = std::string(command);
  j["config"] = config;
  return j;
}

std::string csv_comment(std::string_view command, const ojson& config) {
  return tool_string() + " " + std::string(command) + " config=" + config.dump();
}

}  // namespace

// ---------------------------------------------------------------------------
// options <-> JSON

ojson to_json(const GenOptions& o) {
  ojson j;
  j["out"] = o.out;
  j["seed"] = o.seed;
  j["n_train"] = o.n_train;
  j["n_test"] = o.n_test;
  auto g = datagen::config_to_json(o.generator);
  g.erase("n_matches");
  g.erase("seed");
  j["generator"] = g;
  return j;
}

void apply_json(const json& j, GenOptions& o) {
  strict_apply(j, "gen", [&](const std::string& k, const json& v) {
    if (k == "out") o.out = v.get<std::string>();
    else if (k == "seed") o.seed = v.get<std::uint64_t>();
    else if (k == "n_train") o.n_train = v.get<std::size_t>();
    else if (k == "n_test") o.n_test = v.get<std::size_t>();
    else if (k == "generator") {
      if (v.is_object() && (v.contains("n_matches") || v.contains("seed")))
        throw ConfigError("generator.n_matches and generator.seed are set through n_train/n_test and seed");
      o.generator = datagen::config_from_json(v, o.generator);
    } else return false;
    return true;
  });
}

ojson to_json(const TrainOptions& o) {
  ojson j;
  j["out"] = o.out;
  j["seed"] = o.seed;
  j["data"] = o.data;
  j["loss"] = o.loss;
  j["name"] = o.name;
  j["hidden"] = o.hidden;
  j["epochs"] = o.epochs;
  j["lr"] = o.lr;
  j["batch_size"] = o.batch_size;
  j["k"] = o.k;
  j["antithetic"] = o.antithetic;
  j["val_fraction"] = o.val_fraction;
  return j;
}

void apply_json(const json& j, TrainOptions& o) {
  strict_apply(j, "train", [&](const std::string& k, const json& v) {
    if (k == "out") o.out = v.get<std::string>();
    else if (k == "seed") o.seed = v.get<std::uint64_t>();
    else if (k == "data") o.data = v.get<std::string>();
    else if (k == "loss") o.loss = v.get<std::string>();
    else if (k == "name") o.name = v.get<std::string>();
    else if (k == "hidden") o.hidden = v.get<std::vector<std::size_t>>();
    else if (k == "epochs") o.epochs = v.get<int>();
    else if (k == "lr") o.lr = v.get<double>();
    else if (k == "batch_size") o.batch_size = v.get<std::size_t>();
    else if (k == "k") o.k = v.get<int>();
    else if (k == "antithetic") o.antithetic = v.get<bool>();
    else if (k == "val_fraction") o.val_fraction = v.get<double>();
    else return false;
    return true;
  });
}

ojson to_json(const CalibrateOptions& o) {
  ojson j;
  j["out"] = o.out;
  j["seed"] = o.seed;
  j["model"] = o.model;
  j["data"] = o.data;
  j["kind"] = o.kind;
  j["max_iterations"] = o.max_iterations;
  j["lr"] = o.lr;
  return j;
}

void apply_json(const json& j, CalibrateOptions& o) {
  strict_apply(j, "calibrate", [&](const std::string& k, const json& v) {
    if (k == "out") o.out = v.get<std::string>();
    else if (k == "seed") o.seed = v.get<std::uint64_t>();
    else if (k == "model") o.model = v.get<std::string>();
    else if (k == "data") o.data = v.get<std::string>();
    else if (k == "kind") o.kind = v.get<std::string>();
    else if (k == "max_iterations") o.max_iterations = v.get<int>();
    else if (k == "lr") o.lr = v.get<double>();
    else return false;
    return true;
  });
}

ojson to_json(const EvalOptions& o) {
  ojson j;
  j["out"] = o.out;
  j["seed"] = o.seed;
  j["model"] = o.model;
  j["scaler"] = o.scaler;
  j["data"] = o.data;
  j["name"] = o.name;
  j["bins"] = o.bins;
  j["k"] = o.k;
  return j;
}

void apply_json(const json& j, EvalOptions& o) {
  strict_apply(j, "eval", [&](const std::string& k, const json& v) {
    if (k == "out") o.out = v.get<std::string>();
    else if (k == "seed") o.seed = v.get<std::uint64_t>();
    else if (k == "model") o.model = v.get<std::string>();
    else if (k == "scaler") o.scaler = v.get<std::string>();
    else if (k == "data") o.data = v.get<std::string>();
    else if (k == "name") o.name = v.get<std::string>();
    else if (k == "bins") o.bins = v.get<int>();
    else if (k == "k") o.k = v.get<int>();
    else return false;
    return true;
  });
}

ojson to_json(const CompareOptions& o) {
  ojson j;
  j["out"] = o.out;
  j["seed"] = o.seed;
  return j;
}

void apply_json(const json& j, CompareOptions& o) {
  strict_apply(j, "compare", [&](const std::string& k, const json& v) {
    if (k == "out") o.out = v.get<std::string>();
    else if (k == "seed") o.seed = v.get<std::uint64_t>();
    else return false;
    return true;
  });
}

// ---------------------------------------------------------------------------
// resolution

void resolve(GenOptions& o) {
  if (o.n_train == 0) throw ConfigError("n_train must be positive");
  o.generator.n_matches = o.n_train + o.n_test;
  o.generator.seed = o.seed;
  try {
    datagen::validate(o.generator);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

void resolve(TrainOptions& o) {
  if (o.data.empty()) o.data = path_in(o.out, "train.csv");
  try {
    nn::parse_loss_kind(o.loss);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (o.name.empty()) o.name = o.loss;
  if (o.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(o.lr >= 0.0) || !std::isfinite(o.lr)) throw ConfigError("lr must be a nonnegative number");
  if (o.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (o.k < 1) throw ConfigError("k must be at least 1");
  if (!(o.val_fraction >= 0.0 && o.val_fraction < 1.0)) throw ConfigError("val_fraction must lie in [0, 1)");
  for (std::size_t h : o.hidden)
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
}

void resolve(CalibrateOptions& o) {
  if (o.model.empty()) o.model = path_in(o.out, "model_ce.txt");
  if (o.data.empty()) o.data = path_in(o.out, "train.csv");
  try {
    scaling::parse_scaler_kind(o.kind);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (o.max_iterations < 1) throw ConfigError("max_iterations must be at least 1");
  if (!(o.lr > 0.0)) throw ConfigError("lr must be positive");
}

void resolve(EvalOptions& o) {
  if (o.model.empty()) o.model = path_in(o.out, "model_ce.txt");
  if (o.data.empty()) o.data = path_in(o.out, "test.csv");
  if (o.bins < 1) throw ConfigError("bins must be at least 1");
  if (o.k < 1) throw ConfigError("k must be at least 1");
}

void resolve(CompareOptions&) {}

// ---------------------------------------------------------------------------
// commands

void cmd_gen(GenOptions o) {
  resolve(o);
  const auto config = to_json(o);
  log_config("gen", config);
  ensure_dir(o.out);

  const auto all = datagen::generate_dataset(o.generator);
  const auto names = datagen::feature_names(o.generator.num_features, o.generator.roster_size);
  const auto split_at = all.begin() + static_cast<long>(o.n_train);
  const datagen::Dataset train{names, {all.begin(), split_at}};
  const datagen::Dataset test{names, {split_at, all.end()}};
  const auto comment = csv_comment("gen", config);
  datagen::write_dataset(path_in(o.out, "train.csv"), train, comment);
  datagen::write_dataset(path_in(o.out, "test.csv"), test, comment);

  auto meta = provenance("gen", config);
  meta["generator"] = datagen::config_to_json(o.generator);
  write_text(path_in(o.out, "gen_config.json"), meta.dump(2) + "\n");
}

namespace {

datagen::Dataset load_data(const std::string& path) {
  require_file(path, "dataset");
  return datagen::read_dataset(path);
}

// Train/validation split of a training file, shared by train and calibrate.
datagen::Split train_val_split(const datagen::Dataset& data, double val_fraction, std::uint64_t seed) {
  return datagen::split(data.samples, {1.0 - val_fraction, val_fraction, 0.0}, seed);
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError("model metadata " + what + " is not an integer");
  }
}

}  // namespace

void cmd_train(TrainOptions o) {
  resolve(o);
  const auto config = to_json(o);
  log_config("train", config);
  const auto data = load_data(o.data);
  if (data.samples.empty()) throw ConfigError("training data '" + o.data + "' is empty");
  ensure_dir(o.out);

  const auto parts = train_val_split(data, o.val_fraction, o.seed);
  if (parts.train.empty()) throw ConfigError("no training rows left after the validation split");
  const auto train_set = datagen::to_training_set(parts.train);

  const auto kind = nn::parse_loss_kind(o.loss);
  std::vector<std::size_t> sizes{data.num_features()};
  sizes.insert(sizes.end(), o.hidden.begin(), o.hidden.end());
  sizes.push_back(nn::kNumClasses);
  auto init = nn::init_params(sizes, kind == nn::LossKind::DataUncertainty, o.seed);

  nn::TrainConfig tc;
  tc.adam.learning_rate = o.lr;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.seed = o.seed;
  tc.loss = {kind, o.k, o.antithetic};
  const auto result = nn::train(train_set, std::move(init), tc);

  nn::Metadata meta{{"tool", tool_string()},
                    {"loss", o.loss},
                    {"split_seed", std::to_string(o.seed)},
                    {"val_fraction", detail::fmt_double(o.val_fraction)},
                    {"config", config.dump()}};
  nn::save_model(path_in(o.out, "model_" + o.name + ".txt"), result.params, meta);
  write_text(path_in(o.out, "train_log_" + o.name + ".csv"), nn::training_log_csv(result.log));
}

namespace {

nn::ModelFile load_model_checked(const std::string& path) {
  require_file(path, "model file");
  return nn::load_model(path);
}

// Class logits of a model: z, or mu for DU models.
std::vector<scaling::Logits> class_logits(const nn::ModelParams& model, std::span<const datagen::Sample> samples) {
  const auto set = datagen::to_training_set(samples);
  if (!samples.empty() && set.cols != model.input_size())
    throw SchemaError("dataset has " + std::to_string(set.cols) + " features, model expects " +
                      std::to_string(model.input_size()));
  const auto raw = kernels::predict_raw(model, set);
  const std::size_t w = model.output_size();
  std::vector<scaling::Logits> z(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) z[i] = {raw[i * w], raw[i * w + 1]};
  return z;
}

}  // namespace

void cmd_calibrate(CalibrateOptions o) {
  resolve(o);
  const auto config = to_json(o);
  log_config("calibrate", config);
  const auto mf = load_model_checked(o.model);
  if (mf.params.du_head) throw ConfigError("scalers apply to cross-entropy models only");
  const auto data = load_data(o.data);

  std::uint64_t split_seed = o.seed;
  double val_fraction = 0.1;
  if (const auto* s = mf.find("split_seed")) split_seed = parse_u64(*s, "split_seed");
  if (const auto* v = mf.find("val_fraction"); v && !detail::parse_double(*v, val_fraction))
    throw SchemaError("model metadata val_fraction is not a number");
  const auto parts = train_val_split(data, val_fraction, split_seed);
  if (parts.val.empty()) throw ConfigError("validation split is empty");

  const auto logits = class_logits(mf.params, parts.val);
  std::vector<int> labels;
  for (const auto& s : parts.val) labels.push_back(s.label);
  const auto kind = scaling::parse_scaler_kind(o.kind);
  const auto fit = scaling::fit(kind, logits, labels, {o.max_iterations, o.lr, 1e-6});
  if (fit.warning) std::cerr << kToolName << " calibrate: " << fit.status << '\n';

  ensure_dir(o.out);
  auto j = scaling::scaler_to_json(fit.params);
  auto meta = provenance("calibrate", config);
  meta["validation_rows"] = parts.val.size();
  meta["initial_nll"] = fit.initial_nll;
  meta["final_nll"] = fit.final_nll;
  meta["iterations"] = fit.iterations;
  meta["converged"] = fit.converged;
  meta["warning"] = fit.warning;
  meta["status"] = fit.status;
  j["meta"] = meta;
  const std::string stem = "scaler_" + std::string(scaling::to_string(kind));
  write_text(path_in(o.out, stem + ".json"), j.dump(2) + "\n");
  write_text(path_in(o.out, stem + "_log.csv"), scaling::fit_log_csv(fit.log));
}

std::vector<Prediction> predict(const nn::ModelParams& model, const std::optional<scaling::ScalerParams>& scaler,
                                std::span<const datagen::Sample> samples, int du_samples, std::uint64_t seed) {
  const auto set = datagen::to_training_set(samples);
  if (!samples.empty() && set.cols != model.input_size())
    throw SchemaError("dataset has " + std::to_string(set.cols) + " features, model expects " +
                      std::to_string(model.input_size()));
  const auto raw = samples.empty() ? std::vector<double>{} : kernels::predict_raw(model, set);
  const std::size_t w = model.output_size();
  std::vector<Prediction> out(samples.size());
  const auto n = static_cast<long long>(samples.size());
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    auto& p = out[i];
    p.raw.assign(raw.begin() + static_cast<long>(i * w), raw.begin() + static_cast<long>((i + 1) * w));
    p.p_true = samples[i].p_true;
    std::array<double, 2> prob;
    if (model.du_head) {
      // DU confidence is the Monte-Carlo mean of softmax over sampled logits.
      const du::MCConfig mc{du_samples, derive_seed(seed, {0xe7a1, static_cast<std::uint64_t>(i)}), true};
      prob = du::expected_prob(du::DensityOutput::from_raw(p.raw), mc);
    } else if (scaler) {
      prob = scaling::apply_scaler(*scaler, {p.raw[0], p.raw[1]}).prob;
    } else {
      prob = nn::softmax(std::array<double, 2>{p.raw[0], p.raw[1]});
    }
    p.record = metrics::make_record(prob, samples[i].label);
  }
  return out;
}

namespace {

std::string predictions_csv(std::span<const Prediction> preds, const std::string& comment) {
  std::string out = "# " + comment + "\n";
  out += "index,logit_0,logit_1,s_raw,prob_0,prob_1,confidence,predicted,true,p_true\n";
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    out += std::to_string(i);
    out += ',';
    detail::append_double(out, p.raw[0]);
    out += ',';
    detail::append_double(out, p.raw[1]);
    out += ',';
    if (p.raw.size() > 2) detail::append_double(out, p.raw[2]);
    out += ',';
    detail::append_double(out, p.record.prob[0]);
    out += ',';
    detail::append_double(out, p.record.prob[1]);
    out += ',';
    detail::append_double(out, p.record.confidence);
    out += ',' + std::to_string(p.record.predicted_label) + ',' + std::to_string(p.record.true_label) + ',';
    if (p.p_true) detail::append_double(out, *p.p_true);
    out += '\n';
  }
  return out;
}

}  // namespace

void cmd_eval(EvalOptions o) {
  resolve(o);
  const auto mf = load_model_checked(o.model);
  std::optional<scaling::ScalerParams> scaler;
  if (!o.scaler.empty()) {
    require_file(o.scaler, "scaler file");
    scaler = scaling::scaler_from_json(read_json(o.scaler));
    if (mf.params.du_head) throw ConfigError("scalers apply to cross-entropy models only");
  }
  if (o.name.empty()) o.name = scaler ? std::string(scaling::to_string(scaler->kind)) : mf.params.du_head ? "du" : "none";
  const auto config = to_json(o);
  log_config("eval", config);

  const auto data = load_data(o.data);
  if (data.samples.empty()) throw ConfigError("evaluation data '" + o.data + "' is empty");
  const auto preds = predict(mf.params, scaler, data.samples, o.k, o.seed);
  std::vector<metrics::PredictionRecord> records;
  records.reserve(preds.size());
  for (const auto& p : preds) records.push_back(p.record);
  const auto report = metrics::build_report(records, o.bins);

  ojson j = provenance("eval", config);
  j["method"] = o.name;
  const auto body = metrics::report_to_json(report);
  for (const auto& [k, v] : body.items()) j[k] = v;
  if (data.has_p_true()) j["oracle_ece"] = datagen::oracle_ece(records, data.samples);

  ensure_dir(o.out);
  write_text(path_in(o.out, "report_" + o.name + ".json"), j.dump(2) + "\n");
  write_text(path_in(o.out, "reliability_" + o.name + ".csv"), metrics::reliability_csv(report));
  write_text(path_in(o.out, "reliability_" + o.name + ".svg"), metrics::reliability_svg(report, o.name));
  write_text(path_in(o.out, "predictions_" + o.name + ".csv"), predictions_csv(preds, csv_comment("eval", config)));
}

void cmd_compare(CompareOptions o) {
  resolve(o);
  const auto config = to_json(o);
  log_config("compare", config);

  std::vector<std::string> missing;
  for (const auto& m : kMethods) {
    const auto p = path_in(o.out, "report_" + std::string(m.name) + ".json");
    if (!fs::exists(p)) missing.push_back(p);
  }
  if (!missing.empty()) {
    std::string msg = "missing evaluation reports:";
    for (const auto& p : missing) msg += " " + p;
    throw MissingArtifact(msg);
  }

  ojson rows = ojson::array();
  std::string table;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %12s %8s %8s %8s %15s\n", "Method", "Accuracy[%]", "ECE[%]", "MCE[%]", "NLL",
                "Oracle ECE[%]");
  table += line;
  table += std::string(72, '-') + "\n";
  for (const auto& m : kMethods) {
    const auto j = read_json(path_in(o.out, "report_" + std::string(m.name) + ".json"));
    const auto rep = metrics::report_from_json(j);
    ojson row;
    row["method"] = std::string(m.label);
    row["report"] = std::string(m.name);
    row["accuracy"] = rep.accuracy;
    row["ece"] = rep.ece;
    row["mce"] = rep.mce;
    row["nll_mean"] = rep.nll_mean;
    row["nll_sum"] = rep.nll_sum;
    row["n"] = rep.n;
    const bool has_oracle = j.contains("oracle_ece");
    if (has_oracle) row["oracle_ece"] = j.at("oracle_ece").get<double>();
    char oracle[32] = "-";
    if (has_oracle) std::snprintf(oracle, sizeof(oracle), "%.2f", 100.0 * j.at("oracle_ece").get<double>());
    std::snprintf(line, sizeof(line), "%-16s %12.2f %8.2f %8.2f %8.4f %15s\n", std::string(m.label).c_str(),
                  100.0 * rep.accuracy, 100.0 * rep.ece, 100.0 * rep.mce, rep.nll_mean, oracle);
    table += line;
    rows.push_back(std::move(row));
  }
  ojson j = provenance("compare", config);
  j["nll"] = "mean";
  j["rows"] = std::move(rows);
  write_text(path_in(o.out, "comparison.json"), j.dump(2) + "\n");
  write_text(path_in(o.out, "comparison.txt"), table);
  std::cout << table;
}

}  // namespace calibforge::pipeline
