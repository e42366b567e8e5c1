// Copyright 2026 The persona-eval Authors
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

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "persona_eval/analysis.hpp"
#include "persona_eval/stats.hpp"

namespace persona_eval::report {

inline constexpr int kSchemaVersion = 1;
/// Digits used for every number written to a run directory.
inline constexpr int kStoredDecimals = 6;
/// Digits shown in rendered tables.
inline constexpr int kDisplayDecimals = 2;

/// printf-style fixed formatting; never prints "-0.00".
std::string format_fixed(double value, int decimals);

/// "90.7", "100": one decimal, trailing ".0" dropped.
std::string format_percent(double value);

std::string csv_escape(std::string_view field);
std::vector<std::string> csv_split(std::string_view line);

/// Wald interval for every attainable p_hat = k/m, k = 0..m.
std::vector<std::pair<double, WaldInterval>> ci_table(const CIConfig& cfg);

/// "p_hat = 0.20, Wald CI: [0.00, 0.49]" one line per attainable p_hat.
std::string render_ci_table(const CIConfig& cfg);

std::string estimates_csv(std::span<const EstimateRecord> estimates);
std::vector<EstimateRecord> parse_estimates_csv(std::string_view content);

std::string labels_csv(const LabelMatrix& matrix);

std::string correlation_csv(const CorrelationMatrix& cm);
std::string support_csv(const CorrelationMatrix& cm);
CorrelationMatrix parse_correlation_csv(std::string_view content);

struct MetricsFile {
  std::string backend_id;
  MetricReport metrics;
  std::size_t confident = 0;
  std::size_t excluded = 0;
  std::size_t invalid = 0;
  std::string deletion;
  std::string clc_diagonal;
};

std::string metrics_json(const MetricsFile& file);
MetricsFile parse_metrics_json(std::string_view content);

std::string agreement_csv(std::span<const AgreementSummary> rows);
std::string upset_csv(std::span<const IntersectionCounts> groups);
std::vector<IntersectionCounts> parse_upset_csv(std::string_view content);
std::string intersection_summary_csv(std::span<const IntersectionCounts> groups);

/// First row is the pooled profile ("ALL"), then one row per condition.
std::string confidence_profile_csv(const ConfidenceProfile& pooled,
                                   std::span<const ConfidenceProfile> per_condition);

std::string script_breakdown_csv(const ScriptBreakdown& breakdown);

/// Markdown table with one column per backend.
std::string model_comparison_table(std::span<const MetricsFile> backends);

/// Self-contained 12x12 heatmap; undefined cells are grey.
std::string heatmap_svg(const CorrelationMatrix& cm, std::string_view title);

/// Vega-Lite specifications with inline data.
std::string heatmap_spec(const CorrelationMatrix& cm, std::string_view title);
std::string upset_spec(std::span<const IntersectionCounts> groups, std::string_view title);

std::string read_file(const std::filesystem::path& path);
/// Replaces the file atomically.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace persona_eval::report
