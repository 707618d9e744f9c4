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

// Machine-readable evaluation and ablation reports. The text tables are
// always rendered from the JSON so the two cannot disagree.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "amsr/metrics.hpp"
#include "amsr/model.hpp"

namespace amsr {

inline constexpr int kReportVersion = 1;

std::string tool_version();

struct MetricsReport {
  std::string method;   // "bicubic" or "model"
  std::string dataset;  // manifest name
  int scale = 0;
  std::vector<MetricRecord> records;  // manifest order
  Aggregate aggregate;
  std::string config_hash;
};

/// Pretty-printed, key-sorted JSON. Infinite PSNRs are written as "inf".
std::string report_json(const MetricsReport& report);
MetricsReport parse_report_json(const std::string& text);
std::string render_report_table(const std::string& json_text);

struct AblationRow {
  BranchFlags flags;
  double psnr_db = 0.0;
  double ssim = 0.0;
  double final_loss = 0.0;
};

struct AblationReport {
  std::string dataset;  // held-out manifest name
  int scale = 0;
  std::vector<AblationRow> rows;
  std::string config_hash;
};

std::string ablation_json(const AblationReport& report);
std::string render_ablation_table(const std::string& json_text);

/// Published comparison numbers, shown for reference only.
struct PublishedResult {
  const char* method;
  int scale;
  const char* dataset;
  double psnr_db;
  double ssim;
};
std::span<const PublishedResult> published_benchmarks();

struct PublishedAblation {
  bool nonlocal;
  bool second_order;
  bool multiscale;
  double psnr_db;
};
std::span<const PublishedAblation> published_ablation();

}  // namespace amsr
