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

#include "persona_eval/run.hpp"

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <set>
#include <sstream>

#include <unistd.h>

#include "persona_eval/corpus.hpp"
#include "persona_eval/hash.hpp"
#include "persona_eval/personas.hpp"
#include "persona_eval/report.hpp"

namespace persona_eval {

namespace fs = std::filesystem;

CIConfig RunConfig::ci_for(const BackendConfig& backend) const {
  CIConfig cfg = z ? CIConfig{alpha, backend.effective_repeats(), *z}
                   : CIConfig::for_alpha(alpha, backend.effective_repeats());
  cfg.validate();
  return cfg;
}

nlohmann::json RunConfig::snapshot() const {
  nlohmann::json backends_json = nlohmann::json::array();
  for (const auto& b : backends) backends_json.push_back(to_json(b));
  nlohmann::json ci = {{"alpha", alpha}};
  if (z) ci["z"] = *z;
  return {{"corpus", corpus_path.filename().string()},
          {"personas", persona_path.filename().string()},
          {"ci", ci},
          {"analysis",
           {{"deletion", to_string(analysis.deletion)},
            {"clc_diagonal", to_string(analysis.clc_diagonal)}}},
          {"backends", backends_json}};
}

RunConfig parse_run_config(const nlohmann::json& j, const fs::path& base_dir) {
  auto bad = [](const std::string& what) { return Error(ErrorKind::InvalidConfig, what); };
  if (!j.is_object()) throw bad("config is not a JSON object");
  RunConfig cfg;
  auto path_field = [&](const char* name) -> fs::path {
    if (!j.contains(name) || !j[name].is_string()) throw bad(std::string("config: '") + name + "' must be a path string");
    fs::path p = j[name].get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };
  cfg.corpus_path = path_field("corpus");
  cfg.persona_path = path_field("personas");
  cfg.output_dir = j.contains("output_dir") ? path_field("output_dir") : base_dir / "runs";

  if (j.contains("ci")) {
    const auto& ci = j["ci"];
    if (!ci.is_object()) throw bad("config: 'ci' must be an object");
    cfg.alpha = ci.value("alpha", cfg.alpha);
    if (ci.contains("z")) cfg.z = ci["z"].get<double>();
  }
  if (j.contains("analysis")) {
    const auto& a = j["analysis"];
    if (a.contains("deletion")) {
      auto m = parse_deletion_mode(a["deletion"].get<std::string>());
      if (!m) throw bad("config: analysis.deletion must be 'pairwise' or 'listwise'");
      cfg.analysis.deletion = *m;
    }
    if (a.contains("clc_diagonal")) {
      auto m = parse_diagonal_mode(a["clc_diagonal"].get<std::string>());
      if (!m) throw bad("config: analysis.clc_diagonal must be 'include' or 'off_diagonal'");
      cfg.analysis.clc_diagonal = *m;
    }
  }
  if (!j.contains("backends") || !j["backends"].is_array() || j["backends"].empty())
    throw bad("config: at least one backend is required");
  std::set<std::string> ids;
  for (const auto& bj : j["backends"]) {
    auto b = backend_config_from_json(bj);
    if (b.backend_id.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-") !=
            std::string::npos || b.backend_id.empty() || b.backend_id[0] == '.')
      throw bad("backend id '" + b.backend_id + "' must use only [A-Za-z0-9._-]");
    if (!ids.insert(b.backend_id).second) throw bad("duplicate backend id '" + b.backend_id + "'");
    cfg.backends.push_back(std::move(b));
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  const auto text = [&] {
    try {
      return report::read_file(path);
    } catch (const Error&) {
      throw Error(ErrorKind::FileMissing, "cannot open config file " + path.string());
    }
  }();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

namespace {

std::string describe(const std::string& where, const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e))
    return where + ": " + std::string(to_string(err->kind())) + ": " + err->what();
  return where + ": " + e.what();
}

bool output_creatable(const fs::path& dir) {
  fs::path p = fs::absolute(dir);
  while (!p.empty() && !fs::exists(p)) {
    if (p == p.parent_path()) return false;
    p = p.parent_path();
  }
  return fs::is_directory(p) && ::access(p.c_str(), W_OK) == 0;
}

}  // namespace

ValidationReport cmd_validate(const fs::path& config_path) {
  ValidationReport report;
  RunConfig cfg;
  try {
    cfg = load_run_config(config_path);
  } catch (const std::exception& e) {
    report.errors.push_back(describe(config_path.string(), e));
    return report;
  }
  try {
    load_corpus(cfg.corpus_path);
  } catch (const std::exception& e) {
    report.errors.push_back(describe(cfg.corpus_path.string(), e));
  }
  try {
    load_personas(cfg.persona_path);
  } catch (const std::exception& e) {
    report.errors.push_back(describe(cfg.persona_path.string(), e));
  }
  for (const auto& b : cfg.backends) {
    try {
      b.validate();
      cfg.ci_for(b);
    } catch (const std::exception& e) {
      report.errors.push_back(describe(config_path.string() + ": backend '" + b.backend_id + "'", e));
    }
  }
  if (!output_creatable(cfg.output_dir))
    report.errors.push_back(config_path.string() + ": output_dir " + cfg.output_dir.string() +
                            " cannot be created");
  return report;
}

std::chrono::system_clock::time_point run_clock_now() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    try {
      return std::chrono::system_clock::time_point(std::chrono::seconds(std::stoll(epoch)));
    } catch (const std::exception&) {
      // Unparseable values fall back to the real clock.
    }
  }
  return std::chrono::system_clock::now();
}

namespace {

std::string format_time(std::chrono::system_clock::time_point tp, const char* fmt) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, fmt, &tm);
  return buf;
}

std::string failures_csv(const std::vector<CollectionFailure>& failures) {
  std::string out = "prompt_key,tweet_id,group,language,message\n";
  for (const auto& f : failures)
    out += f.prompt_key + "," + report::csv_escape(f.tweet_id) + "," +
           std::string(to_string(f.condition.group)) + "," +
           std::string(to_string(f.condition.language)) + "," + report::csv_escape(f.message) + "\n";
  return out;
}

fs::path pick_run_dir(const fs::path& output_dir, const std::string& prefix, bool resume,
                      std::chrono::system_clock::time_point started) {
  if (resume && fs::is_directory(output_dir)) {
    std::vector<fs::path> candidates;
    for (const auto& entry : fs::directory_iterator(output_dir))
      if (entry.is_directory() && !entry.is_symlink() &&
          entry.path().filename().string().rfind(prefix, 0) == 0)
        candidates.push_back(entry.path());
    if (!candidates.empty()) return *std::max_element(candidates.begin(), candidates.end());
  }
  auto dir = output_dir / (prefix + format_time(started, "%Y%m%dT%H%M%SZ"));
  if (fs::exists(dir))
    throw Error(ErrorKind::InvalidConfig, "run directory " + dir.string() + " exists; pass --resume to continue it");
  return dir;
}

void update_latest_link(const fs::path& output_dir, const fs::path& run_dir) {
  const auto link = output_dir / "latest";
  std::error_code ec;
  if (fs::is_symlink(fs::symlink_status(link, ec))) fs::remove(link, ec);
  if (!fs::exists(fs::symlink_status(link, ec))) fs::create_directory_symlink(run_dir.filename(), link, ec);
}

BackendRunStats run_backend(const RunConfig& cfg, const BackendConfig& backend,
                            const Corpus& corpus, const std::vector<PromptInstance>& instances,
                            const fs::path& run_dir, const RunOptions& options) {
  const SampleCache cache(run_dir / "samples");
  CollectionOptions copts;
  copts.cache = &cache;
  copts.transport_factory = options.transport_factory;
  const auto collection = run_collection(instances, backend, copts);
  const auto ci = cfg.ci_for(backend);

  std::vector<EstimateRecord> estimates;
  estimates.reserve(instances.size());
  std::vector<ProbPair> pooled_pairs;
  std::array<std::vector<ProbPair>, kNumConditions> pairs_by_condition;
  std::vector<std::string> traces;
  for (const auto& inst : instances) {
    auto it = collection.sets.find(inst.prompt_key);
    const SampleSet* set = it == collection.sets.end() ? nullptr : &it->second;
    estimates.push_back(make_estimate(inst, set, ci));
    if (!set) continue;
    if (set->prob_pair) {
      pooled_pairs.push_back(*set->prob_pair);
      pairs_by_condition[inst.condition.index()].push_back(*set->prob_pair);
    }
    for (const auto& t : set->reasoning_texts)
      if (!t.empty()) traces.push_back(t);
  }

  const auto labels = build_label_matrix(estimates, corpus);
  const auto cm = build_correlation_matrix(labels, cfg.analysis.deletion);

  report::MetricsFile metrics;
  metrics.backend_id = backend.backend_id;
  metrics.metrics = compute_metric_report(estimates, cm, cfg.analysis.clc_diagonal);
  for (const auto& e : estimates) {
    if (e.status == EstimateStatus::Confident) ++metrics.confident;
    else if (e.status == EstimateStatus::Excluded) ++metrics.excluded;
    else ++metrics.invalid;
  }
  metrics.deletion = std::string(to_string(cfg.analysis.deletion));
  metrics.clc_diagonal = std::string(to_string(cfg.analysis.clc_diagonal));

  std::vector<IntersectionCounts> intersections;
  for (auto g : kGroups) intersections.push_back(cross_language_intersections(labels, g));
  const auto agreements = all_agreements(labels);

  const auto out = run_dir / "results" / backend.backend_id;
  fs::remove_all(out);
  report::write_file(out / "estimates.csv", report::estimates_csv(estimates));
  report::write_file(out / "labels.csv", report::labels_csv(labels));
  report::write_file(out / "correlation.csv", report::correlation_csv(cm));
  report::write_file(out / "correlation_support.csv", report::support_csv(cm));
  report::write_file(out / "metrics.json", report::metrics_json(metrics));
  report::write_file(out / "agreement.csv", report::agreement_csv(agreements));
  report::write_file(out / "upset.csv", report::upset_csv(intersections));
  report::write_file(out / "intersections.csv", report::intersection_summary_csv(intersections));
  if (backend.mode == BackendMode::Logprob) {
    std::vector<ConfidenceProfile> per_condition;
    for (const auto& v : pairs_by_condition) per_condition.push_back(confidence_profile(v));
    report::write_file(out / "confidence_profile.csv",
                       report::confidence_profile_csv(confidence_profile(pooled_pairs), per_condition));
  }
  if (!traces.empty())
    report::write_file(out / "script_breakdown.csv",
                       report::script_breakdown_csv(script_breakdown(traces)));
  if (!collection.failures.empty())
    report::write_file(out / "failures.csv", failures_csv(collection.failures));

  BackendRunStats stats;
  stats.backend_id = backend.backend_id;
  stats.instances = instances.size();
  stats.requests = collection.requests;
  stats.cache_hits = collection.cache_hits;
  stats.failures = collection.failures.size();
  stats.calls = collection.calls;
  return stats;
}

}  // namespace

RunOutcome cmd_run(const fs::path& config_path, const RunOptions& options) {
  const auto report = cmd_validate(config_path);
  if (!report.ok()) {
    std::string msg = "configuration is invalid:";
    for (const auto& e : report.errors) msg += "\n  " + e;
    throw Error(ErrorKind::InvalidConfig, msg);
  }
  RunConfig cfg = load_run_config(config_path);
  if (options.output_dir) cfg.output_dir = *options.output_dir;
  if (options.backend_filter) {
    std::erase_if(cfg.backends, [&](const BackendConfig& b) { return b.backend_id != *options.backend_filter; });
    if (cfg.backends.empty())
      throw Error(ErrorKind::InvalidConfig, "no backend with id '" + *options.backend_filter + "'");
  }
  if (options.seed)
    for (auto& b : cfg.backends)
      if (b.mode == BackendMode::Mock) b.seed = *options.seed;

  const auto corpus = load_corpus(cfg.corpus_path);
  const auto registry = load_personas(cfg.persona_path);
  const auto instances = enumerate_instances(corpus, registry);

  auto snapshot = cfg.snapshot();
  snapshot["corpus_sha256"] = sha256_hex(report::read_file(cfg.corpus_path));
  snapshot["personas_sha256"] = sha256_hex(report::read_file(cfg.persona_path));
  const auto config_hash = sha256_hex(snapshot.dump());

  const auto started = run_clock_now();
  fs::create_directories(cfg.output_dir);
  RunOutcome outcome;
  outcome.run_dir = pick_run_dir(cfg.output_dir, "run-" + config_hash.substr(0, 12) + "-",
                                 options.resume, started);
  fs::create_directories(outcome.run_dir);
  report::write_file(outcome.run_dir / "config.json", snapshot.dump(2) + "\n");

  for (const auto& backend : cfg.backends) {
    auto stats = run_backend(cfg, backend, corpus, instances, outcome.run_dir, options);
    if (stats.failures > 0) outcome.partial = true;
    outcome.backends.push_back(std::move(stats));
  }

  const auto finished = run_clock_now();
  nlohmann::json backends_json = nlohmann::json::array();
  for (const auto& s : outcome.backends)
    backends_json.push_back({{"id", s.backend_id},
                             {"instances", s.instances},
                             {"requests", s.requests},
                             {"cache_hits", s.cache_hits},
                             {"failures", s.failures},
                             {"calls", s.calls}});
  nlohmann::json manifest = {
      {"schema_version", report::kSchemaVersion},
      {"harness_version", kHarnessVersion},
      {"run_name", outcome.run_dir.filename().string()},
      {"config_sha256", config_hash},
      {"config", snapshot},
      {"started_at", format_time(started, "%Y-%m-%dT%H:%M:%SZ")},
      {"finished_at", format_time(finished, "%Y-%m-%dT%H:%M:%SZ")},
      {"status", outcome.partial ? "partial" : "complete"},
      {"corpus_records", corpus.size()},
      {"corpus_included", corpus.included_count()},
      {"backends", backends_json},
  };
  report::write_file(outcome.run_dir / "manifest.json", manifest.dump(2) + "\n");
  update_latest_link(cfg.output_dir, outcome.run_dir);

  cmd_report(outcome.run_dir);
  return outcome;
}

void cmd_report(const fs::path& run_dir) {
  const auto manifest_text = report::read_file(run_dir / "manifest.json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("manifest.json: ") + e.what());
  }
  if (!manifest.contains("backends") || !manifest["backends"].is_array())
    throw Error(ErrorKind::MalformedRecord, "manifest.json has no backend list");

  const auto reports = run_dir / "reports";
  std::vector<report::MetricsFile> metrics;
  struct Rendered {
    std::string id;
    CorrelationMatrix cm;
    std::string correlation_text;
    std::string upset_text;
    std::vector<IntersectionCounts> upset;
  };
  std::vector<Rendered> rendered;
  // Read everything first so a missing artifact leaves reports/ untouched.
  for (const auto& b : manifest["backends"]) {
    const auto id = b.at("id").get<std::string>();
    const auto dir = run_dir / "results" / id;
    metrics.push_back(report::parse_metrics_json(report::read_file(dir / "metrics.json")));
    Rendered r;
    r.id = id;
    r.correlation_text = report::read_file(dir / "correlation.csv");
    r.cm = report::parse_correlation_csv(r.correlation_text);
    r.upset_text = report::read_file(dir / "upset.csv");
    r.upset = report::parse_upset_csv(r.upset_text);
    rendered.push_back(std::move(r));
  }

  double alpha = 0.10;
  std::optional<double> z;
  int m = 5;
  if (manifest.contains("config")) {
    const auto& c = manifest["config"];
    if (c.contains("ci")) {
      alpha = c["ci"].value("alpha", alpha);
      if (c["ci"].contains("z")) z = c["ci"]["z"].get<double>();
    }
    if (c.contains("backends"))
      for (const auto& b : c["backends"])
        if (b.value("mode", std::string()) != "logprob") {
          m = b.value("repeats", m);
          break;
        }
  }

  fs::remove_all(reports);
  report::write_file(reports / "model_comparison.md", report::model_comparison_table(metrics));
  const CIConfig ci = z ? CIConfig{alpha, m, *z} : CIConfig::for_alpha(alpha, m);
  report::write_file(reports / "ci_table.txt", report::render_ci_table(ci));
  for (const auto& r : rendered) {
    const auto dir = reports / r.id;
    report::write_file(dir / "heatmap.csv", r.correlation_text);
    report::write_file(dir / "heatmap.svg", report::heatmap_svg(r.cm, "Label correlation: " + r.id));
    report::write_file(dir / "heatmap.vl.json", report::heatmap_spec(r.cm, "Label correlation: " + r.id));
    report::write_file(dir / "upset.csv", r.upset_text);
    report::write_file(dir / "upset.vl.json",
                       report::upset_spec(r.upset, "EN/PL/RU label patterns: " + r.id));
  }
}

}  // namespace persona_eval
