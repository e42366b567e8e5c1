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

#include <doctest.h>

#include <cstdlib>
#include <nlohmann/json.hpp>

#include "persona_eval/hash.hpp"
#include "persona_eval/report.hpp"
#include "persona_eval/run.hpp"
#include "test_util.hpp"

using namespace persona_eval;
using persona_eval::testing::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct FixedEpoch {
  FixedEpoch() { ::setenv("SOURCE_DATE_EPOCH", "1767225600", 1); }
  ~FixedEpoch() { ::unsetenv("SOURCE_DATE_EPOCH"); }
};

/// Reply is a pure function of the prompt, so reruns see the same answers.
class EchoTransport : public ChatTransport {
 public:
  ChatReply complete(const ChatRequest& req) override {
    const auto h = sha256_u64(req.system + req.user);
    ChatReply r;
    const int bit = static_cast<int>((h >> 7) & 1);
    r.content = "<think>" + std::string(h % 3 == 0 ? "Это" : h % 3 == 1 ? "obraźliwe" : "fine") +
                "</think>" + std::to_string(bit);
    if (req.logprobs) {
      const double p1 = static_cast<double>(h % 1000) / 1000.0;
      r.token_probs = {{"1", p1}, {"0", 1.0 - p1 - (h % 7 == 0 ? 0.05 : 0.0)}};
    }
    return r;
  }
};

json config_json(const fs::path& corpus, json backends) {
  return {{"corpus", corpus.generic_string()},
          {"personas", testing::config_path("personas.json").generic_string()},
          {"output_dir", "runs"},
          {"ci", {{"alpha", 0.10}}},
          {"backends", std::move(backends)}};
}

fs::path write_config(const fs::path& dir, const json& j) {
  const auto p = dir / "config.json";
  testing::write_text(p, j.dump(2));
  return p;
}

json sampling_backend(const std::string& id, int max_parallel = 3) {
  return {{"id", id}, {"mode", "sampling"}, {"model", "echo"}, {"endpoint", "http://127.0.0.1:9/v1"},
          {"repeats", 5}, {"max_parallel", max_parallel}, {"retry_budget", 0}};
}

RunOptions echo_options() {
  RunOptions o;
  o.transport_factory = [](const BackendConfig&) -> std::unique_ptr<ChatTransport> {
    return std::make_unique<EchoTransport>();
  };
  return o;
}

std::map<std::string, std::string> subtree(const std::map<std::string, std::string>& tree,
                                           const std::string& prefix) {
  std::map<std::string, std::string> out;
  for (const auto& [k, v] : tree)
    if (k.rfind(prefix, 0) == 0) out[k] = v;
  return out;
}

}  // namespace

TEST_CASE("validate accepts the shipped mock config") {
  const auto report = cmd_validate(testing::config_path("mock_run.json"));
  for (const auto& e : report.errors) MESSAGE(e);
  CHECK(report.ok());
}

TEST_CASE("validate reports each problem") {
  TempDir tmp;
  const auto corpus = testing::data_path("corpus_20.jsonl");

  SUBCASE("persona file missing a condition") {
    auto personas = json::parse(testing::read_text(testing::config_path("personas.json")));
    auto& arr = personas["personas"];
    arr.erase(std::remove_if(arr.begin(), arr.end(),
                             [](const json& p) { return p["group"] == "Centrist" && p["language"] == "RU"; }),
              arr.end());
    testing::write_text(tmp / "personas.json", personas.dump());
    auto cfg = config_json(corpus, json::array({{{"id", "mock"}, {"mode", "mock"}, {"model", "m"}}}));
    cfg["personas"] = "personas.json";
    const auto report = cmd_validate(write_config(tmp.path(), cfg));
    REQUIRE(report.errors.size() == 1);
    CHECK(report.errors[0].find("(Centrist, RU)") != std::string::npos);
    CHECK(report.errors[0].find("missing-condition") != std::string::npos);
  }
  SUBCASE("duplicate tweet id") {
    const std::string rec = R"({"tweet_id":"dup","text_en":"a","text_pl":"b","text_ru":"c"})";
    testing::write_text(tmp / "dup.jsonl", rec + "\n" + R"({"tweet_id":"x","text_en":"a","text_pl":"b","text_ru":"c"})" + "\n" + rec + "\n");
    const auto report = cmd_validate(write_config(
        tmp.path(), config_json(tmp / "dup.jsonl", json::array({{{"id", "mock"}, {"mode", "mock"}, {"model", "m"}}}))));
    REQUIRE(report.errors.size() == 1);
    CHECK(report.errors[0].find("duplicate-id") != std::string::npos);
    CHECK(report.errors[0].find("lines 1 and 3") != std::string::npos);
  }
  SUBCASE("bad backend and missing files are all listed") {
    auto cfg = config_json(tmp / "absent.jsonl",
                           json::array({{{"id", "s"}, {"mode", "sampling"}, {"model", "m"}, {"max_parallel", 0},
                                         {"endpoint", "http://x/v1"}}}));
    cfg["personas"] = "absent.json";
    const auto report = cmd_validate(write_config(tmp.path(), cfg));
    CHECK(report.errors.size() == 3);
  }
  SUBCASE("no backends") {
    const auto report = cmd_validate(write_config(tmp.path(), config_json(corpus, json::array())));
    REQUIRE(report.errors.size() == 1);
    CHECK(report.errors[0].find("backend") != std::string::npos);
  }
  SUBCASE("duplicate backend ids") {
    const auto b = json{{"id", "a"}, {"mode", "mock"}, {"model", "m"}};
    CHECK_FALSE(cmd_validate(write_config(tmp.path(), config_json(corpus, json::array({b, b})))).ok());
  }
  SUBCASE("missing config") {
    CHECK_FALSE(cmd_validate(tmp / "none.json").ok());
  }
}

TEST_CASE("mock run is byte-deterministic") {
  FixedEpoch epoch;
  TempDir a, b;
  const auto corpus = testing::data_path("corpus_20.jsonl");
  const auto ra = cmd_run(testing::write_mock_config(a.path(), corpus));
  const auto rb = cmd_run(testing::write_mock_config(b.path(), corpus));
  CHECK_FALSE(ra.partial);
  CHECK(ra.run_dir.filename() == rb.run_dir.filename());
  CHECK(ra.run_dir.filename().string().rfind("run-", 0) == 0);
  const auto ta = testing::snapshot_tree(ra.run_dir);
  const auto tb = testing::snapshot_tree(rb.run_dir);
  CHECK(ta.size() == tb.size());
  CHECK(ta == tb);

  for (const char* f : {"config.json", "manifest.json", "results/mock/estimates.csv", "results/mock/labels.csv",
                        "results/mock/correlation.csv", "results/mock/correlation_support.csv",
                        "results/mock/metrics.json", "results/mock/agreement.csv", "results/mock/upset.csv",
                        "results/mock/intersections.csv", "reports/model_comparison.md", "reports/ci_table.txt",
                        "reports/mock/heatmap.csv", "reports/mock/heatmap.svg", "reports/mock/heatmap.vl.json",
                        "reports/mock/upset.csv", "reports/mock/upset.vl.json"})
    CHECK_MESSAGE(ta.count(f) == 1, f);
  CHECK(ta.count("results/mock/failures.csv") == 0);
  CHECK(ta.count("results/mock/confidence_profile.csv") == 0);
  CHECK(fs::read_symlink(a / "runs" / "latest") == ra.run_dir.filename());

  const auto manifest = json::parse(ta.at("manifest.json"));
  CHECK(manifest["status"] == "complete");
  CHECK(manifest["started_at"] == "2026-01-01T00:00:00Z");
  CHECK(manifest["corpus_included"] == 20);
  const auto& mb = manifest["backends"][0];
  CHECK(mb["instances"] == 240);
  CHECK(mb["requests"].get<int>() + mb["cache_hits"].get<int>() == 240);
  CHECK(mb["calls"] == 0);

  // The seed override changes the outputs and the run name.
  TempDir c;
  RunOptions opts;
  opts.seed = 7;
  const auto rc = cmd_run(testing::write_mock_config(c.path(), corpus), opts);
  CHECK(rc.run_dir.filename() != ra.run_dir.filename());
  CHECK(testing::read_text(rc.run_dir / "results/mock/estimates.csv") != ta.at("results/mock/estimates.csv"));
}

TEST_CASE("estimates partition by the {0.4, 0.6} rule") {
  FixedEpoch epoch;
  TempDir tmp;
  const auto run = cmd_run(testing::write_mock_config(tmp.path(), testing::data_path("corpus_20.jsonl")));
  const auto est = report::parse_estimates_csv(testing::read_text(run.run_dir / "results/mock/estimates.csv"));
  REQUIRE(est.size() == 240);
  std::size_t confident = 0;
  for (const auto& e : est) {
    const long k = std::lround(e.p_hat * 5);
    CHECK(std::abs(e.p_hat - k / 5.0) < 1e-9);
    const bool excluded = k == 2 || k == 3;
    CHECK((e.status == EstimateStatus::Excluded) == excluded);
    if (!excluded) {
      ++confident;
      CHECK(e.status == EstimateStatus::Confident);
      CHECK(e.label == std::optional<int>(k >= 3 ? 1 : 0));
    }
  }
  const auto metrics = report::parse_metrics_json(testing::read_text(run.run_dir / "results/mock/metrics.json"));
  CHECK(metrics.confident == confident);
  CHECK(metrics.excluded == 240 - confident);
  CHECK(metrics.metrics.valid_pct == doctest::Approx(100.0 * confident / 240).epsilon(1e-6));
}

TEST_CASE("all-confident run reports valid_pct 100") {
  FixedEpoch epoch;
  TempDir tmp;
  // With one repeat every p_hat is 0 or 1, so nothing is excluded.
  const auto run = cmd_run(testing::write_mock_config(tmp.path(), testing::data_path("corpus_20.jsonl"), 42, 1));
  const auto metrics = report::parse_metrics_json(testing::read_text(run.run_dir / "results/mock/metrics.json"));
  CHECK(metrics.metrics.valid_pct == 100.0);
  CHECK(testing::read_text(run.run_dir / "reports/model_comparison.md").find("| 100 |") != std::string::npos);
}

TEST_CASE("an existing run directory needs --resume") {
  FixedEpoch epoch;
  TempDir tmp;
  const auto cfg = testing::write_mock_config(tmp.path(), testing::data_path("corpus_20.jsonl"));
  const auto first = cmd_run(cfg);
  try {
    cmd_run(cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidConfig);
  }
  RunOptions opts;
  opts.resume = true;
  const auto again = cmd_run(cfg, opts);
  CHECK(again.run_dir == first.run_dir);
  CHECK(again.backends[0].cache_hits == 240);
  CHECK(again.backends[0].requests == 0);
}

TEST_CASE("resuming after lost samples reproduces the same outputs") {
  FixedEpoch epoch;
  TempDir tmp;
  const auto cfg = testing::write_mock_config(tmp.path(), testing::data_path("corpus_20.jsonl"));
  const auto first = cmd_run(cfg);
  const auto before = testing::snapshot_tree(first.run_dir);

  std::size_t removed = 0;
  std::vector<fs::path> samples;
  for (const auto& e : fs::recursive_directory_iterator(first.run_dir / "samples"))
    if (e.is_regular_file()) samples.push_back(e.path());
  std::sort(samples.begin(), samples.end());
  for (std::size_t i = 0; i < samples.size(); i += 3, ++removed) fs::remove(samples[i]);
  fs::remove_all(first.run_dir / "results");
  fs::remove_all(first.run_dir / "reports");
  REQUIRE(removed > 0);

  RunOptions opts;
  opts.resume = true;
  const auto second = cmd_run(cfg, opts);
  const auto after = testing::snapshot_tree(second.run_dir);
  CHECK(subtree(after, "results/") == subtree(before, "results/"));
  CHECK(subtree(after, "reports/") == subtree(before, "reports/"));
  CHECK(subtree(after, "samples/") == subtree(before, "samples/"));
}

TEST_CASE("interrupted remote run resumes to the uninterrupted result") {
  FixedEpoch epoch;
  const auto corpus = testing::data_path("corpus_20.jsonl");

  TempDir clean;
  const auto clean_run = cmd_run(write_config(clean.path(), config_json(corpus, json::array({sampling_backend("echo", 1)}))),
                                 echo_options());
  CHECK_FALSE(clean_run.partial);

  TempDir flaky;
  const auto cfg = write_config(flaky.path(), config_json(corpus, json::array({sampling_backend("echo", 1)})));
  RunOptions broken = echo_options();
  // Only the first 400 calls succeed.
  auto budget = std::make_shared<std::atomic<int>>(400);
  broken.transport_factory = [budget](const BackendConfig&) -> std::unique_ptr<ChatTransport> {
    struct Limited : ChatTransport {
      std::shared_ptr<std::atomic<int>> left;
      EchoTransport inner;
      ChatReply complete(const ChatRequest& r) override {
        if (--*left < 0) throw Error(ErrorKind::NetworkFailure, "connection reset");
        return inner.complete(r);
      }
    };
    auto t = std::make_unique<Limited>();
    t->left = budget;
    return t;
  };
  const auto interrupted = cmd_run(cfg, broken);
  CHECK(interrupted.partial);
  CHECK(interrupted.backends[0].failures > 0);
  CHECK(fs::exists(interrupted.run_dir / "results/echo/failures.csv"));
  CHECK(json::parse(testing::read_text(interrupted.run_dir / "manifest.json"))["status"] == "partial");

  RunOptions resume = echo_options();
  resume.resume = true;
  const auto resumed = cmd_run(cfg, resume);
  CHECK_FALSE(resumed.partial);
  CHECK(resumed.run_dir == interrupted.run_dir);
  const auto a = testing::snapshot_tree(clean_run.run_dir);
  const auto b = testing::snapshot_tree(resumed.run_dir);
  CHECK(subtree(a, "results/") == subtree(b, "results/"));
  CHECK(subtree(a, "reports/") == subtree(b, "reports/"));
  const auto m = json::parse(b.at("manifest.json"));
  CHECK(m["backends"][0]["requests"].get<int>() + m["backends"][0]["cache_hits"].get<int>() == 240);
  CHECK(m["backends"][0]["cache_hits"].get<int>() > 0);
}

TEST_CASE("logprob and trace outputs") {
  FixedEpoch epoch;
  TempDir tmp;
  auto lp = json{{"id", "gemma"}, {"mode", "logprob"}, {"model", "g"}, {"endpoint", "http://127.0.0.1:9/v1"},
                 {"max_parallel", 2}};
  const auto cfg = write_config(
      tmp.path(), config_json(testing::data_path("corpus_20.jsonl"), json::array({sampling_backend("r1"), lp})));
  const auto run = cmd_run(cfg, echo_options());
  CHECK_FALSE(run.partial);
  CHECK(fs::exists(run.run_dir / "results/gemma/confidence_profile.csv"));
  CHECK_FALSE(fs::exists(run.run_dir / "results/r1/confidence_profile.csv"));
  CHECK(fs::exists(run.run_dir / "results/r1/script_breakdown.csv"));

  const auto profile = testing::read_text(run.run_dir / "results/gemma/confidence_profile.csv");
  CHECK(profile.find("\nALL,240,") != std::string::npos);
  CHECK(std::count(profile.begin(), profile.end(), '\n') == 14);
  const auto scripts = testing::read_text(run.run_dir / "results/r1/script_breakdown.csv");
  CHECK(scripts.find("Cyrillic,") != std::string::npos);
  const auto table = testing::read_text(run.run_dir / "reports/model_comparison.md");
  CHECK(table.rfind("| | r1 | gemma |", 0) == 0);

  RunOptions only;
  only.backend_filter = "gemma";
  only.output_dir = tmp / "filtered";
  only.transport_factory = echo_options().transport_factory;
  const auto filtered = cmd_run(cfg, only);
  CHECK(filtered.backends.size() == 1);
  CHECK(fs::exists(filtered.run_dir / "results/gemma/estimates.csv"));
  CHECK(filtered.run_dir.parent_path() == tmp / "filtered");
  only.backend_filter = "nope";
  CHECK_THROWS_AS(cmd_run(cfg, only), Error);
}

TEST_CASE("report needs every artifact") {
  FixedEpoch epoch;
  TempDir tmp;
  const auto run = cmd_run(testing::write_mock_config(tmp.path(), testing::data_path("corpus_20.jsonl")));
  const auto before = testing::snapshot_tree(run.run_dir / "reports");
  fs::remove_all(run.run_dir / "reports");
  cmd_report(run.run_dir);
  CHECK(testing::snapshot_tree(run.run_dir / "reports") == before);

  fs::remove(run.run_dir / "results/mock/correlation.csv");
  try {
    cmd_report(run.run_dir);
    FAIL("expected missing-artifact");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingArtifact);
    CHECK(std::string(e.what()).find("correlation.csv") != std::string::npos);
  }
  CHECK(testing::snapshot_tree(run.run_dir / "reports") == before);
  try {
    cmd_report(tmp / "nowhere");
    FAIL("expected missing-artifact");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingArtifact);
  }
}

TEST_CASE("run_clock_now honours SOURCE_DATE_EPOCH") {
  FixedEpoch epoch;
  CHECK(std::chrono::duration_cast<std::chrono::seconds>(run_clock_now().time_since_epoch()).count() ==
        1767225600);
}
