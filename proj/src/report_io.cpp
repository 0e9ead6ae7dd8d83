// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The calibforge Authors

#include <cmath>
#include <limits>
#include <string>

#include "calibforge/error.hpp"
#include "calibforge/metrics.hpp"
#include "format.hpp"

namespace calibforge::metrics {

using detail::append_double;

nlohmann::ordered_json report_to_json(const CalibrationReport& report) {
  nlohmann::ordered_json j;
  j["accuracy"] = report.accuracy;
  j["ece"] = report.ece;
  j["mce"] = report.mce;
  j["nll_sum"] = report.nll_sum;
  j["nll_mean"] = report.nll_mean;
  j["n"] = report.n;
  j["num_bins"] = report.num_bins;
  auto bins = nlohmann::ordered_json::array();
  for (const auto& b : report.bins) {
    nlohmann::ordered_json jb;
    jb["m"] = b.index;
    jb["lo"] = b.lo;
    jb["hi"] = b.hi;
    jb["count"] = b.count;
    if (b.empty()) {
      jb["acc"] = nullptr;
      jb["conf"] = nullptr;
      jb["empty"] = true;
    } else {
      jb["acc"] = b.accuracy;
      jb["conf"] = b.mean_confidence;
      jb["empty"] = false;
    }
    bins.push_back(std::move(jb));
  }
  j["bins"] = std::move(bins);
  return j;
}

CalibrationReport report_from_json(const nlohmann::json& j) {
  try {
    CalibrationReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.ece = j.at("ece").get<double>();
    r.mce = j.at("mce").get<double>();
    r.nll_sum = j.at("nll_sum").get<double>();
    r.nll_mean = j.at("nll_mean").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.num_bins = j.value("num_bins", static_cast<int>(j.at("bins").size()));
    for (const auto& jb : j.at("bins")) {
      BinStats b;
      b.index = jb.at("m").get<int>();
      b.lo = jb.at("lo").get<double>();
      b.hi = jb.at("hi").get<double>();
      b.count = jb.at("count").get<std::size_t>();
      const bool empty = b.count == 0;
      b.accuracy = empty ? std::numeric_limits<double>::quiet_NaN() : jb.at("acc").get<double>();
      b.mean_confidence = empty ? std::numeric_limits<double>::quiet_NaN() : jb.at("conf").get<double>();
      r.bins.push_back(b);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed report: ") + e.what());
  }
}

std::string reliability_csv(const CalibrationReport& report) {
  std::string out = "bin_lo,bin_hi,count,accuracy,confidence,gap\n";
  for (const auto& b : report.bins) {
    append_double(out, b.lo);
    out += ',';
    append_double(out, b.hi);
    out += ',';
    out += std::to_string(b.count);
    if (b.empty()) {
      out += ",empty,empty,empty\n";
      continue;
    }
    out += ',';
    append_double(out, b.accuracy);
    out += ',';
    append_double(out, b.mean_confidence);
    out += ',';
    append_double(out, b.gap());
    out += '\n';
  }
  return out;
}

namespace {

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string reliability_svg(const CalibrationReport& report, const std::string& title) {
  constexpr double W = 420, H = 440, left = 60, top = 40, plot = 320;
  auto px = [&](double x) { return left + x * plot; };
  auto py = [&](double y) { return top + (1.0 - y) * plot; };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(W, 0) + "\" height=\"" + fixed(H, 0) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + fixed(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" + escape_xml(title) +
       "</text>\n";
  s += "<rect x=\"" + fixed(left) + "\" y=\"" + fixed(top) + "\" width=\"" + fixed(plot) + "\" height=\"" +
       fixed(plot) + "\" fill=\"#f4f4f4\" stroke=\"#444\"/>\n";

  for (const auto& b : report.bins) {
    const double x = px(b.lo), w = (b.hi - b.lo) * plot;
    if (b.empty()) continue;
    const double acc_y = py(b.accuracy);
    s += "<rect class=\"acc\" x=\"" + fixed(x) + "\" y=\"" + fixed(acc_y) + "\" width=\"" + fixed(w) +
         "\" height=\"" + fixed(py(0.0) - acc_y) + "\" fill=\"#2b6cb0\" stroke=\"#1a365d\"/>\n";
    // Gap between the bar top and the bin's mean confidence.
    const double conf_y = py(b.mean_confidence);
    const double gy = std::min(acc_y, conf_y), gh = std::abs(acc_y - conf_y);
    s += "<rect class=\"gap\" x=\"" + fixed(x) + "\" y=\"" + fixed(gy) + "\" width=\"" + fixed(w) + "\" height=\"" +
         fixed(gh) + "\" fill=\"#e53e3e\" fill-opacity=\"0.35\" stroke=\"#c53030\"/>\n";
  }

  s += "<line x1=\"" + fixed(px(0)) + "\" y1=\"" + fixed(py(0)) + "\" x2=\"" + fixed(px(1)) + "\" y2=\"" +
       fixed(py(1)) + "\" stroke=\"#555\" stroke-dasharray=\"4 3\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = k / 5.0;
    s += "<text x=\"" + fixed(px(v)) + "\" y=\"" + fixed(py(0) + 16) + "\" text-anchor=\"middle\">" + fixed(v, 1) +
         "</text>\n";
    s += "<text x=\"" + fixed(left - 6) + "\" y=\"" + fixed(py(v) + 4) + "\" text-anchor=\"end\">" + fixed(v, 1) +
         "</text>\n";
  }
  s += "<text x=\"" + fixed(px(0.5)) + "\" y=\"" + fixed(py(0) + 34) + "\" text-anchor=\"middle\">Confidence</text>\n";
  s += "<text x=\"16\" y=\"" + fixed(py(0.5)) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       fixed(py(0.5)) + ")\">Accuracy</text>\n";
  s += "<text x=\"" + fixed(px(0.03)) + "\" y=\"" + fixed(py(0.95)) + "\">ECE = " + fixed(100.0 * report.ece) +
       "%</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace calibforge::metrics
