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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "persona_eval/analysis.hpp"
#include "persona_eval/backends.hpp"
#include "persona_eval/stats.hpp"

namespace persona_eval {

inline constexpr const char* kHarnessVersion = "0.1.0";

struct AnalysisFlags {
  DeletionMode deletion = DeletionMode::Pairwise;
  DiagonalMode clc_diagonal = DiagonalMode::Include;
};

struct RunConfig {
  std::filesystem::path corpus_path;
  std::filesystem::path persona_path;
  std::filesystem::path output_dir;
  std::vector<BackendConfig> backends;
  double alpha = 0.10;
  std::optional<double> z;
  AnalysisFlags analysis;

  /// CI settings for a backend: its repeat count, the shared alpha.
  CIConfig ci_for(const BackendConfig& backend) const;

  /// Config as recorded in the run directory. Excludes output_dir.
  nlohmann::json snapshot() const;
};

/// Relative paths resolve against `base_dir`. Throws InvalidConfig.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

struct ValidationReport {
  std::vector<std::string> errors;
  bool ok() const { return errors.empty(); }
};

ValidationReport cmd_validate(const std::filesystem::path& config_path);

struct RunOptions {
  std::optional<std::string> backend_filter;
  bool resume = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output_dir;
  /// Overrides the HTTP transport (tests).
  std::function<std::unique_ptr<ChatTransport>(const BackendConfig&)> transport_factory;
};

struct BackendRunStats {
  std::string backend_id;
  std::size_t instances = 0;
  std::size_t requests = 0;
  std::size_t cache_hits = 0;
  std::size_t failures = 0;
  std::size_t calls = 0;
};

struct RunOutcome {
  std::filesystem::path run_dir;
  bool partial = false;
  std::vector<BackendRunStats> backends;
};

/// Now, or SOURCE_DATE_EPOCH when that variable is set.
std::chrono::system_clock::time_point run_clock_now();

/// Full pipeline per backend, then cmd_report on the new run directory.
RunOutcome cmd_run(const std::filesystem::path& config_path, const RunOptions& options = {});

/// Renders reports/ from the files under results/ and manifest.json.
void cmd_report(const std::filesystem::path& run_dir);

}  // namespace persona_eval
