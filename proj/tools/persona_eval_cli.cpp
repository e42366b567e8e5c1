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

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "persona_eval/run.hpp"

namespace {

std::filesystem::path latest_run(const std::filesystem::path& config) {
  const auto cfg = persona_eval::load_run_config(config);
  return cfg.output_dir / "latest";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Persona-conditioned offensiveness evaluation harness"};
  app.set_version_flag("--version", persona_eval::kHarnessVersion);
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> backend;
  bool resume = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::string run_dir;

  auto* validate = app.add_subcommand("validate", "Check corpus, personas and backend settings");
  validate->add_option("--config", config, "Run configuration (JSON)")->required();

  auto* run = app.add_subcommand("run", "Collect samples, aggregate and analyse");
  run->add_option("--config", config, "Run configuration (JSON)")->required();
  run->add_option("--backend", backend, "Only run the backend with this id");
  run->add_flag("--resume", resume, "Continue the latest run directory for this configuration");
  run->add_option("--seed", seed, "Seed for mock backends");
  run->add_option("--output", output, "Output directory (overrides output_dir)");

  auto* report = app.add_subcommand("report", "Render tables and plots from a run directory");
  report->add_option("run_dir", run_dir, "Run directory");
  report->add_option("--config", config, "Use <output_dir>/latest of this configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      const auto result = persona_eval::cmd_validate(config);
      for (const auto& e : result.errors) std::cerr << "error: " << e << "\n";
      if (result.ok()) std::cout << "ok\n";
      return result.ok() ? 0 : 1;
    }
    if (*run) {
      persona_eval::RunOptions opts;
      opts.backend_filter = backend;
      opts.resume = resume;
      opts.seed = seed;
      if (output) opts.output_dir = *output;
      const auto outcome = persona_eval::cmd_run(config, opts);
      for (const auto& b : outcome.backends)
        std::cerr << b.backend_id << ": " << b.instances << " instances, " << b.requests
                  << " requested, " << b.cache_hits << " cached, " << b.failures << " failed\n";
      std::cout << outcome.run_dir.string() << "\n";
      return outcome.partial ? 2 : 0;
    }
    if (*report) {
      if (run_dir.empty() && config.empty()) {
        std::cerr << "error: give a run directory or --config\n";
        return 1;
      }
      const std::filesystem::path dir = run_dir.empty() ? latest_run(config) : std::filesystem::path(run_dir);
      persona_eval::cmd_report(dir);
      std::cout << (dir / "reports").string() << "\n";
      return 0;
    }
  } catch (const persona_eval::Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
