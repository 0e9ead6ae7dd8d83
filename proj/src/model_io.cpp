// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "calibforge/error.hpp"
#include "calibforge/nn.hpp"
#include "format.hpp"

namespace calibforge::nn {

// Layout:
//   calibforge-model v1
//   du_head=true|false
//   layer_sizes=295,256,256,2
//   meta.<key>=<value>            (any number, single line each)
//   layer.<l>.shape=<out>x<in>
//   layer.<l>.weights=<out*in values, row-major, space separated>
//   layer.<l>.bias=<out values>
//   end

namespace {

std::string join_values(std::span<const double> v) {
  std::string s;
  s.reserve(v.size() * 24);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    detail::append_double(s, v[i]);
  }
  return s;
}

void parse_values(std::string_view text, std::span<double> out, std::size_t line_no) {
  std::size_t k = 0;
  while (!text.empty()) {
    const auto sp = text.find(' ');
    const auto tok = text.substr(0, sp);
    if (!tok.empty()) {
      if (k >= out.size()) throw SchemaError("line " + std::to_string(line_no) + ": too many values");
      double v = 0.0;
      if (!detail::parse_double(tok, v) || !std::isfinite(v))
        throw ParseError("bad parameter value '" + std::string(tok) + "'", line_no);
      out[k++] = v;
    }
    if (sp == std::string_view::npos) break;
    text.remove_prefix(sp + 1);
  }
  if (k != out.size())
    throw SchemaError("line " + std::to_string(line_no) + ": expected " + std::to_string(out.size()) +
                      " values, got " + std::to_string(k));
}

}  // namespace

const std::string* ModelFile::find(std::string_view key) const {
  for (const auto& [k, v] : metadata)
    if (k == key) return &v;
  return nullptr;
}

void write_model(std::ostream& os, const ModelParams& params, const Metadata& metadata) {
  os << kModelHeader << '\n';
  os << "du_head=" << (params.du_head ? "true" : "false") << '\n';
  os << "layer_sizes=";
  for (std::size_t i = 0; i < params.layer_sizes.size(); ++i) os << (i ? "," : "") << params.layer_sizes[i];
  os << '\n';
  for (const auto& [k, v] : metadata) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw InvalidArgument("metadata keys and values must be single-line and keys must not contain '='");
    os << "meta." << k << '=' << v << '\n';
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& s = params.layers[l];
    os << "layer." << l << ".shape=" << s.out << 'x' << s.in << '\n';
    os << "layer." << l << ".weights=" << join_values(params.weights(l)) << '\n';
    os << "layer." << l << ".bias=" << join_values(params.bias(l)) << '\n';
  }
  os << "end\n";
}

ModelFile read_model(std::istream& is) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(is, line) || line != kModelHeader)
    throw SchemaError("not a calibforge model file (expected header '" + std::string(kModelHeader) + "')");

  auto next_kv = [&](std::string& key, std::string& value) -> bool {
    if (!std::getline(is, line)) return false;
    ++line_no;
    if (line == "end") return false;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key=value", line_no);
    key = line.substr(0, eq);
    value = line.substr(eq + 1);
    return true;
  };

  std::string key, value;
  bool du_head = false;
  std::vector<std::size_t> sizes;
  if (!next_kv(key, value) || key != "du_head" || (value != "true" && value != "false"))
    throw SchemaError("line " + std::to_string(line_no) + ": expected du_head=true|false");
  du_head = value == "true";
  if (!next_kv(key, value) || key != "layer_sizes")
    throw SchemaError("line " + std::to_string(line_no) + ": expected layer_sizes");
  {
    std::stringstream ss(value);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      double v = 0.0;
      if (!detail::parse_double(tok, v) || v < 1 || v != std::floor(v)) throw ParseError("bad layer size", line_no);
      sizes.push_back(static_cast<std::size_t>(v));
    }
  }

  ModelFile mf;
  try {
    mf.params = ModelParams::zeros(sizes, du_head);
  } catch (const InvalidArgument& e) {
    throw SchemaError(std::string("invalid architecture: ") + e.what());
  }

  std::size_t layer = 0;
  int stage = 0;  // 0 shape, 1 weights, 2 bias
  bool ended = false;
  while (true) {
    if (!next_kv(key, value)) {
      ended = line == "end";
      break;
    }
    if (key.rfind("meta.", 0) == 0) {
      if (layer != 0 || stage != 0) throw SchemaError("line " + std::to_string(line_no) + ": metadata after layers");
      mf.metadata.emplace_back(key.substr(5), value);
      continue;
    }
    if (layer >= mf.params.layers.size())
      throw SchemaError("line " + std::to_string(line_no) + ": more layers than layer_sizes declares");
    const std::string prefix = "layer." + std::to_string(layer) + ".";
    const auto& s = mf.params.layers[layer];
    if (stage == 0) {
      if (key != prefix + "shape" || value != std::to_string(s.out) + "x" + std::to_string(s.in))
        throw SchemaError("line " + std::to_string(line_no) + ": expected " + prefix + "shape=" +
                          std::to_string(s.out) + "x" + std::to_string(s.in));
    } else if (stage == 1) {
      if (key != prefix + "weights") throw SchemaError("line " + std::to_string(line_no) + ": expected " + prefix + "weights");
      parse_values(value, mf.params.weights(layer), line_no);
    } else {
      if (key != prefix + "bias") throw SchemaError("line " + std::to_string(line_no) + ": expected " + prefix + "bias");
      parse_values(value, mf.params.bias(layer), line_no);
    }
    if (++stage == 3) {
      stage = 0;
      ++layer;
    }
  }
  if (!ended || layer != mf.params.layers.size() || stage != 0) throw SchemaError("truncated model file");
  return mf;
}

void save_model(const std::string& path, const ModelParams& params, const Metadata& metadata) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_model(os, params, metadata);
  if (!os) throw IoError("failed writing '" + path + "'");
}

ModelFile load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open model file '" + path + "'");
  return read_model(is);
}

}  // namespace calibforge::nn
