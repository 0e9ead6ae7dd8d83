// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

// calibforge: synthetic data -> training -> post-hoc calibration -> evaluation.
//
//   calibforge gen       [--n N] [--n-test N] [--features F] ...
//   calibforge train     [--loss ce|du] [--k K] [--epochs E] [--lr LR] ...
//   calibforge calibrate [--kind temperature|vector|matrix] [--model PATH] ...
//   calibforge eval      [--model PATH] [--scaler PATH] [--bins M] ...
//   calibforge compare
//
// Global flags: --seed, --config <json>, --out <dir>. A config file holds
// optional top-level "seed" and "out" plus one object per command
// ("gen", "train", ...). Flags given on the command line win.

#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "calibforge/error.hpp"
#include "calibforge/pipeline.hpp"

namespace cf = calibforge;
namespace pl = calibforge::pipeline;
using json = nlohmann::json;

namespace {

// Records an option into `overrides[key]` only when it is given.
template <class T>
CLI::Option* add_override(CLI::App* app, const std::string& flag, json& overrides, const std::string& key,
                          const std::string& help) {
  return app->add_option_function<T>(flag, [&overrides, key](const T& v) { overrides[key] = v; }, help);
}

json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw cf::ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw cf::ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw cf::ConfigError("config file must hold a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "seed" || k == "out" || k == "gen" || k == "train" || k == "calibrate" || k == "eval" || k == "compare")
      continue;
    throw cf::ConfigError("unknown top-level config key '" + k + "'");
  }
  return j;
}

// config file section < top-level config keys < global flags < command flags
template <class Options>
Options resolve_options(const std::string& section, const json& file, const json& global, const json& command) {
  Options o;
  json merged = json::object();
  if (file.contains("seed")) merged["seed"] = file["seed"];
  if (file.contains("out")) merged["out"] = file["out"];
  if (file.contains(section)) {
    if (!file[section].is_object()) throw cf::ConfigError("config section '" + section + "' must be an object");
    merged.merge_patch(file[section]);
  }
  merged.merge_patch(global);
  merged.merge_patch(command);
  pl::apply_json(merged, o);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"calibforge: confidence calibration toolkit for binary win prediction"};
  app.set_version_flag("--version", pl::tool_string());
  app.require_subcommand(1);
  app.fallthrough();

  json global = json::object();
  std::string config_path;
  add_override<std::uint64_t>(&app, "--seed", global, "seed", "Top-level seed (default 42)");
  add_override<std::string>(&app, "--out", global, "out", "Output directory (default out)");
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);

  json gen = json::object(), gen_generator = json::object();
  auto* g = app.add_subcommand("gen", "Generate synthetic train/test match data");
  add_override<std::size_t>(g, "--n", gen, "n_train", "Training matches (default 20000)");
  add_override<std::size_t>(g, "--n-test", gen, "n_test", "Test matches (default 2500)");
  add_override<std::size_t>(g, "--features", gen_generator, "num_features", "Feature count F (default 295)");
  add_override<std::size_t>(g, "--roster", gen_generator, "roster_size", "Champion roster size R (default 100)");
  add_override<double>(g, "--noise-floor", gen_generator, "noise_floor", "Noise temperature floor");
  add_override<double>(g, "--noise-gain", gen_generator, "noise_gain", "Early-game noise gain");
  add_override<double>(g, "--advantage-scale", gen_generator, "advantage_scale", "Advantage coefficient scale");

  json train = json::object();
  auto* t = app.add_subcommand("train", "Train a win predictor (cross-entropy or DU loss)");
  add_override<std::string>(t, "--data", train, "data", "Training CSV (default <out>/train.csv)");
  add_override<std::string>(t, "--loss", train, "loss", "ce or du")->check(CLI::IsMember({"ce", "du"}));
  add_override<std::string>(t, "--name", train, "name", "Model name (default: loss name)");
  add_override<std::vector<std::size_t>>(t, "--hidden", train, "hidden", "Hidden layer widths")->delimiter(',');
  add_override<int>(t, "--epochs", train, "epochs", "Epochs (default 20)");
  add_override<double>(t, "--lr", train, "lr", "Adam learning rate (default 1e-4)");
  add_override<std::size_t>(t, "--batch", train, "batch_size", "Batch size (default 512)");
  add_override<int>(t, "--k", train, "k", "DU Monte-Carlo samples (default 32)");
  add_override<bool>(t, "--antithetic", train, "antithetic", "Antithetic DU sampling (default true)");
  add_override<double>(t, "--val-fraction", train, "val_fraction", "Held-out validation fraction (default 0.1)");

  json cal = json::object();
  auto* c = app.add_subcommand("calibrate", "Fit a post-hoc scaler on the held-out validation split");
  add_override<std::string>(c, "--model", cal, "model", "Model file (default <out>/model_ce.txt)");
  add_override<std::string>(c, "--data", cal, "data", "Training CSV the split is drawn from");
  add_override<std::string>(c, "--kind", cal, "kind", "temperature, vector or matrix")
      ->check(CLI::IsMember({"temperature", "vector", "matrix"}));
  add_override<int>(c, "--max-iter", cal, "max_iterations", "Iteration budget (vector/matrix)");

  json ev = json::object();
  auto* e = app.add_subcommand("eval", "Evaluate a model (optionally scaled) and emit reports");
  add_override<std::string>(e, "--model", ev, "model", "Model file (default <out>/model_ce.txt)");
  add_override<std::string>(e, "--scaler", ev, "scaler", "Scaler JSON");
  add_override<std::string>(e, "--data", ev, "data", "Test CSV (default <out>/test.csv)");
  add_override<std::string>(e, "--name", ev, "name", "Report name");
  add_override<int>(e, "--bins", ev, "bins", "Number of reliability bins M (default 10)");
  add_override<int>(e, "--k", ev, "k", "DU Monte-Carlo samples at evaluation (default 256)");

  auto* cmp = app.add_subcommand("compare", "Tabulate all method reports");
  json cmp_flags = json::object();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : pl::kConfigError;
  }

  try {
    const json file = config_path.empty() ? json::object() : load_config_file(config_path);
    if (g->parsed()) {
      if (!gen_generator.empty()) gen["generator"] = gen_generator;
      pl::cmd_gen(resolve_options<pl::GenOptions>("gen", file, global, gen));
    } else if (t->parsed()) {
      pl::cmd_train(resolve_options<pl::TrainOptions>("train", file, global, train));
    } else if (c->parsed()) {
      pl::cmd_calibrate(resolve_options<pl::CalibrateOptions>("calibrate", file, global, cal));
    } else if (e->parsed()) {
      pl::cmd_eval(resolve_options<pl::EvalOptions>("eval", file, global, ev));
    } else if (cmp->parsed()) {
      pl::cmd_compare(resolve_options<pl::CompareOptions>("compare", file, global, cmp_flags));
    }
  } catch (const cf::ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return pl::kConfigError;
  } catch (const cf::MissingArtifact& err) {
    std::cerr << "missing artifact: " << err.what() << '\n';
    return pl::kMissingArtifact;
  } catch (const cf::IoError& err) {
    std::cerr << "i/o error: " << err.what() << '\n';
    return pl::kIoError;
  } catch (const cf::ParseError& err) {
    std::cerr << "parse error: " << err.what() << '\n';
    return pl::kIoError;
  } catch (const cf::SchemaError& err) {
    std::cerr << "schema error: " << err.what() << '\n';
    return pl::kIoError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return pl::kOk;
}
