// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "calibforge/datagen.hpp"
#include "calibforge/error.hpp"
#include "format.hpp"

namespace calibforge::datagen {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = line.find(',');
    out.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string dataset_csv(const Dataset& data, const std::string& comment) {
  const bool with_p = data.has_p_true();
  std::string out;
  if (!comment.empty()) {
    std::istringstream ss(comment);
    for (std::string line; std::getline(ss, line);) out += "# " + line + "\n";
  }
  for (const auto& name : data.feature_names) {
    out += name;
    out += ',';
  }
  out += with_p ? "label,p_true\n" : "label\n";
  for (const auto& s : data.samples) {
    if (s.features.size() != data.feature_names.size())
      throw InvalidArgument("sample width does not match the feature names");
    for (double v : s.features) {
      detail::append_double(out, v);
      out += ',';
    }
    out += std::to_string(s.label);
    if (with_p) {
      out += ',';
      detail::append_double(out, *s.p_true);
    }
    out += '\n';
  }
  return out;
}

Dataset parse_dataset(const std::string& text) {
  Dataset ds;
  std::size_t pos = 0, line_no = 0;
  auto next_line = [&](std::string_view& line) -> bool {
    if (pos >= text.size()) return false;
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    line = std::string_view(text).substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  bool have_header = false;
  while (next_line(line)) {
    if (line.empty() || line.front() == '#') continue;
    have_header = true;
    break;
  }
  if (!have_header) throw SchemaError("dataset has no header line");

  const auto header = split_fields(line);
  std::size_t label_col = header.size();
  for (std::size_t k = 0; k < header.size(); ++k)
    if (trim(header[k]) == "label") label_col = k;
  if (label_col == header.size()) throw SchemaError("line " + std::to_string(line_no) + ": header lacks a label column");
  const bool with_p = label_col + 2 == header.size() && trim(header.back()) == "p_true";
  if (label_col + 1 != header.size() && !with_p)
    throw SchemaError("line " + std::to_string(line_no) + ": only p_true may follow the label column");
  for (std::size_t k = 0; k < label_col; ++k) ds.feature_names.emplace_back(trim(header[k]));
  const std::size_t n_cols = header.size();

  while (next_line(line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != n_cols)
      throw SchemaError("line " + std::to_string(line_no) + ": expected " + std::to_string(n_cols) + " columns, got " +
                        std::to_string(fields.size()));
    Sample s;
    s.features.resize(label_col);
    for (std::size_t k = 0; k < label_col; ++k) {
      if (!detail::parse_double(fields[k], s.features[k]))
        throw ParseError("non-numeric value '" + std::string(trim(fields[k])) + "' in column " + ds.feature_names[k],
                         line_no);
    }
    const auto lab = trim(fields[label_col]);
    if (lab == "0") s.label = 0;
    else if (lab == "1") s.label = 1;
    else throw ParseError("label must be 0 or 1, got '" + std::string(lab) + "'", line_no);
    if (with_p && !trim(fields.back()).empty()) {
      double p = 0.0;
      if (!detail::parse_double(fields.back(), p) || !(p >= 0.0 && p <= 1.0))
        throw ParseError("p_true must be a probability", line_no);
      s.p_true = p;
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void write_dataset(const std::string& path, const Dataset& data, const std::string& comment) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  const auto text = dataset_csv(data, comment);
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw IoError("failed writing '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open dataset '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_dataset(ss.str());
}

}  // namespace calibforge::datagen
