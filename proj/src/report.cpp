// Copyright 2026 The AMSR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "amsr/report.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "amsr/errors.hpp"
#include "json.hpp"

namespace amsr {
namespace {

using nlohmann::json;

constexpr const char* kPublishedLabel = "published, not reproduced";

// clang-format off
constexpr std::array<PublishedResult, 72> kBenchmarks{{
  {"Bicubic", 2, "Set5", 33.66, 0.9299}, {"Bicubic", 2, "Set14", 30.24, 0.8688},
  {"Bicubic", 2, "BSD100", 29.56, 0.8431}, {"Bicubic", 2, "Urban100", 26.88, 0.8403},
  {"Bicubic", 3, "Set5", 30.39, 0.8682}, {"Bicubic", 3, "Set14", 27.55, 0.7742},
  {"Bicubic", 3, "BSD100", 27.21, 0.7382}, {"Bicubic", 3, "Urban100", 24.46, 0.7349},
  {"Bicubic", 4, "Set5", 28.42, 0.8104}, {"Bicubic", 4, "Set14", 26.00, 0.7027},
  {"Bicubic", 4, "BSD100", 25.96, 0.6675}, {"Bicubic", 4, "Urban100", 23.14, 0.6577},
  {"SRCNN", 2, "Set5", 36.66, 0.9542}, {"SRCNN", 2, "Set14", 32.42, 0.9063},
  {"SRCNN", 2, "BSD100", 31.36, 0.8879}, {"SRCNN", 2, "Urban100", 29.50, 0.8946},
  {"SRCNN", 3, "Set5", 32.75, 0.9090}, {"SRCNN", 3, "Set14", 29.28, 0.8208},
  {"SRCNN", 3, "BSD100", 28.41, 0.7863}, {"SRCNN", 3, "Urban100", 26.24, 0.7989},
  {"SRCNN", 4, "Set5", 30.48, 0.8628}, {"SRCNN", 4, "Set14", 27.49, 0.7503},
  {"SRCNN", 4, "BSD100", 26.90, 0.7101}, {"SRCNN", 4, "Urban100", 24.52, 0.7221},
  {"VDSR", 2, "Set5", 37.53, 0.9587}, {"VDSR", 2, "Set14", 33.03, 0.9124},
  {"VDSR", 2, "BSD100", 31.90, 0.8960}, {"VDSR", 2, "Urban100", 30.76, 0.9140},
  {"VDSR", 3, "Set5", 33.66, 0.9213}, {"VDSR", 3, "Set14", 29.77, 0.8314},
  {"VDSR", 3, "BSD100", 28.82, 0.7976}, {"VDSR", 3, "Urban100", 27.14, 0.8279},
  {"VDSR", 4, "Set5", 31.35, 0.8838}, {"VDSR", 4, "Set14", 28.01, 0.7674},
  {"VDSR", 4, "BSD100", 27.29, 0.7251}, {"VDSR", 4, "Urban100", 25.18, 0.7524},
  {"LapSRN", 2, "Set5", 37.52, 0.9591}, {"LapSRN", 2, "Set14", 33.08, 0.9130},
  {"LapSRN", 2, "BSD100", 30.41, 0.9101}, {"LapSRN", 2, "Urban100", 37.27, 0.9740},
  {"LapSRN", 3, "Set5", 33.82, 0.9227}, {"LapSRN", 3, "Set14", 29.79, 0.8320},
  {"LapSRN", 3, "BSD100", 27.07, 0.8272}, {"LapSRN", 3, "Urban100", 32.19, 0.9334},
  {"LapSRN", 4, "Set5", 31.51, 0.8855}, {"LapSRN", 4, "Set14", 28.19, 0.7720},
  {"LapSRN", 4, "BSD100", 25.21, 0.7553}, {"LapSRN", 4, "Urban100", 29.09, 0.8893},
  {"MemNet", 2, "Set5", 37.78, 0.9597}, {"MemNet", 2, "Set14", 33.28, 0.9142},
  {"MemNet", 2, "BSD100", 32.08, 0.8978}, {"MemNet", 2, "Urban100", 31.31, 0.9195},
  {"MemNet", 3, "Set5", 34.09, 0.9248}, {"MemNet", 3, "Set14", 30.00, 0.8350},
  {"MemNet", 3, "BSD100", 28.96, 0.8001}, {"MemNet", 3, "Urban100", 27.56, 0.8376},
  {"MemNet", 4, "Set5", 31.74, 0.8893}, {"MemNet", 4, "Set14", 28.26, 0.7723},
  {"MemNet", 4, "BSD100", 27.40, 0.7281}, {"MemNet", 4, "Urban100", 25.50, 0.7630},
  {"AMMS", 2, "Set5", 37.92, 0.9623}, {"AMMS", 2, "Set14", 33.51, 0.9160},
  {"AMMS", 2, "BSD100", 32.23, 0.8997}, {"AMMS", 2, "Urban100", 31.88, 0.9290},
  {"AMMS", 3, "Set5", 34.23, 0.9299}, {"AMMS", 3, "Set14", 30.22, 0.8369},
  {"AMMS", 3, "BSD100", 29.01, 0.8056}, {"AMMS", 3, "Urban100", 27.88, 0.8499},
  {"AMMS", 4, "Set5", 31.95, 0.8912}, {"AMMS", 4, "Set14", 28.43, 0.7748},
  {"AMMS", 4, "BSD100", 27.49, 0.7334}, {"AMMS", 4, "Urban100", 25.78, 0.7753},
}};

constexpr std::array<PublishedAblation, 4> kAblation{{
  {true, false, false, 36.32},
  {false, true, false, 36.78},
  {false, false, true, 36.54},
  {true, true, true, 37.23},
}};
// clang-format on

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

json number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

double read_number(const json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

std::string fmt(const char* f, double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

json published_block(const std::string& dataset, int scale) {
  json rows = json::array();
  const bool known = std::any_of(kBenchmarks.begin(), kBenchmarks.end(),
                                 [&](const auto& r) { return lower(r.dataset) == lower(dataset); });
  for (const auto& r : kBenchmarks) {
    if (r.scale != scale) continue;
    if (known && lower(r.dataset) != lower(dataset)) continue;
    rows.push_back({{"method", r.method}, {"dataset", r.dataset}, {"psnr_db", r.psnr_db}, {"ssim", r.ssim}});
  }
  return {{"label", kPublishedLabel}, {"rows", rows}};
}

json parse_or_throw(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("report is not valid JSON: ") + e.what());
  }
}

}  // namespace

std::string tool_version() {
#ifdef AMSR_VERSION
  return AMSR_VERSION;
#else
  return "0.0.0";
#endif
}

std::string report_json(const MetricsReport& report) {
  json records = json::array();
  for (const auto& r : report.records) {
    records.push_back({{"image_id", r.image_id},
                       {"psnr_db", number_or_inf(r.psnr_db)},
                       {"ssim", r.ssim},
                       {"scale", r.scale},
                       {"shave", r.shave}});
  }
  json j = {
      {"report_version", kReportVersion},
      {"tool_version", tool_version()},
      {"config_hash", report.config_hash},
      {"method", report.method},
      {"dataset", report.dataset},
      {"scale", report.scale},
      {"records", records},
      {"aggregate",
       {{"psnr_db", number_or_inf(report.aggregate.psnr_db)},
        {"ssim", report.aggregate.ssim},
        {"count", report.aggregate.count},
        {"excluded_infinite", report.aggregate.excluded_infinite}}},
      {"published_reference", published_block(report.dataset, report.scale)},
  };
  return j.dump(2) + "\n";
}

MetricsReport parse_report_json(const std::string& text) {
  const json j = parse_or_throw(text);
  try {
    if (j.at("report_version").get<int>() != kReportVersion) {
      throw FormatError("unsupported report_version " + j.at("report_version").dump());
    }
    MetricsReport r;
    r.method = j.at("method").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.scale = j.at("scale").get<int>();
    r.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& e : j.at("records")) {
      MetricRecord m;
      m.image_id = e.at("image_id").get<std::string>();
      m.psnr_db = read_number(e.at("psnr_db"));
      m.ssim = e.at("ssim").get<double>();
      m.scale = e.at("scale").get<int>();
      m.shave = e.at("shave").get<int>();
      r.records.push_back(m);
    }
    const json& a = j.at("aggregate");
    r.aggregate.psnr_db = read_number(a.at("psnr_db"));
    r.aggregate.ssim = a.at("ssim").get<double>();
    r.aggregate.count = a.at("count").get<int>();
    r.aggregate.excluded_infinite = a.at("excluded_infinite").get<int>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

std::string render_report_table(const std::string& json_text) {
  const json j = parse_or_throw(json_text);
  std::ostringstream out;
  out << "method " << j.at("method").get<std::string>() << ", dataset " << j.at("dataset").get<std::string>()
      << ", x" << j.at("scale").get<int>() << ", config " << j.at("config_hash").get<std::string>() << "\n\n";
  std::size_t width = 8;
  for (const auto& e : j.at("records")) width = std::max(width, e.at("image_id").get<std::string>().size());
  char line[256];
  std::snprintf(line, sizeof line, "%-*s  %10s  %7s\n", static_cast<int>(width), "image", "PSNR (dB)", "SSIM");
  out << line;
  for (const auto& e : j.at("records")) {
    std::snprintf(line, sizeof line, "%-*s  %10s  %7s\n", static_cast<int>(width),
                  e.at("image_id").get<std::string>().c_str(), fmt("%.4f", read_number(e.at("psnr_db"))).c_str(),
                  fmt("%.4f", e.at("ssim").get<double>()).c_str());
    out << line;
  }
  const json& a = j.at("aggregate");
  const std::string label = "mean (" + std::to_string(a.at("count").get<int>()) + ")";
  std::snprintf(line, sizeof line, "%-*s  %10s  %7s\n", static_cast<int>(width), label.c_str(),
                fmt("%.4f", read_number(a.at("psnr_db"))).c_str(), fmt("%.4f", a.at("ssim").get<double>()).c_str());
  out << line;
  if (a.at("excluded_infinite").get<int>() > 0) {
    out << "(" << a.at("excluded_infinite").get<int>() << " identical image(s) left out of the PSNR mean)\n";
  }
  if (j.contains("published_reference")) {
    const json& p = j.at("published_reference");
    out << "\n" << p.at("label").get<std::string>() << ":\n";
    for (const auto& r : p.at("rows")) {
      std::snprintf(line, sizeof line, "  %-8s %-9s %6.2f / %.4f\n", r.at("method").get<std::string>().c_str(),
                    r.at("dataset").get<std::string>().c_str(), r.at("psnr_db").get<double>(),
                    r.at("ssim").get<double>());
      out << line;
    }
  }
  return out.str();
}

std::string ablation_json(const AblationReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"nonlocal", r.flags.nonlocal},
                    {"second_order", r.flags.second_order},
                    {"multiscale", r.flags.multiscale},
                    {"psnr_db", number_or_inf(r.psnr_db)},
                    {"ssim", r.ssim},
                    {"final_loss", r.final_loss}});
  }
  json published = json::array();
  for (const auto& p : kAblation) {
    published.push_back({{"nonlocal", p.nonlocal},
                         {"second_order", p.second_order},
                         {"multiscale", p.multiscale},
                         {"psnr_db", p.psnr_db}});
  }
  json j = {
      {"report_version", kReportVersion},
      {"tool_version", tool_version()},
      {"config_hash", report.config_hash},
      {"dataset", report.dataset},
      {"scale", report.scale},
      {"rows", rows},
      {"published_reference", {{"label", kPublishedLabel}, {"dataset", "Set5"}, {"scale", 2}, {"rows", published}}},
  };
  return j.dump(2) + "\n";
}

std::string render_ablation_table(const std::string& json_text) {
  const json j = parse_or_throw(json_text);
  auto mark = [](const json& b) { return b.get<bool>() ? "yes" : "no"; };
  std::ostringstream out;
  char line[160];
  out << "ablation on " << j.at("dataset").get<std::string>() << ", x" << j.at("scale").get<int>() << ", config "
      << j.at("config_hash").get<std::string>() << "\n\n";
  std::snprintf(line, sizeof line, "%-10s %-13s %-12s %10s  %7s\n", "Non-local", "Second-order", "Multi-scale",
                "PSNR (dB)", "SSIM");
  out << line;
  for (const auto& r : j.at("rows")) {
    std::snprintf(line, sizeof line, "%-10s %-13s %-12s %10s  %7s\n", mark(r.at("nonlocal")),
                  mark(r.at("second_order")), mark(r.at("multiscale")),
                  fmt("%.4f", read_number(r.at("psnr_db"))).c_str(), fmt("%.4f", r.at("ssim").get<double>()).c_str());
    out << line;
  }
  const json& p = j.at("published_reference");
  out << "\n" << p.at("label").get<std::string>() << " (" << p.at("dataset").get<std::string>() << ", x"
      << p.at("scale").get<int>() << "):\n";
  for (const auto& r : p.at("rows")) {
    std::snprintf(line, sizeof line, "%-10s %-13s %-12s %10.2f\n", mark(r.at("nonlocal")),
                  mark(r.at("second_order")), mark(r.at("multiscale")), r.at("psnr_db").get<double>());
    out << line;
  }
  return out.str();
}

std::span<const PublishedResult> published_benchmarks() { return kBenchmarks; }
std::span<const PublishedAblation> published_ablation() { return kAblation; }

}  // namespace amsr
