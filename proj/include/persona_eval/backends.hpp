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

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "persona_eval/personas.hpp"

namespace persona_eval {

enum class BackendMode { Sampling, Logprob, Mock };

std::string_view to_string(BackendMode mode);
std::optional<BackendMode> parse_backend_mode(std::string_view text);

struct BackendConfig {
  std::string backend_id;
  BackendMode mode = BackendMode::Mock;
  std::string endpoint_url;
  std::string model_name;
  double temperature = 1.0;
  int repeats = 5;
  int max_parallel = 1;
  int retry_budget = 3;
  std::uint64_t seed = 0;
  /// Name of the environment variable holding the bearer token.
  std::string api_key_env = "OPENAI_API_KEY";
  int top_logprobs = 5;
  int timeout_seconds = 120;
  int retry_base_delay_ms = 500;

  /// Repeats actually requested: 1 in Logprob mode.
  int effective_repeats() const { return mode == BackendMode::Logprob ? 1 : repeats; }

  /// Throws InvalidConfig.
  void validate() const;
};

BackendConfig backend_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BackendConfig& cfg);

inline constexpr double kMassDeviationThreshold = 0.01;

struct ProbPair {
  double p0 = 0.0;
  double p1 = 0.0;
  double mass_deviation = 1.0;
  bool deviation_flag = true;

  friend bool operator==(const ProbPair&, const ProbPair&) = default;
};

ProbPair make_prob_pair(double p0, double p1);

/// Reads the literal "0" and "1" tokens (0 when absent). No renormalization.
ProbPair extract_prob_pair(const std::map<std::string, double>& token_distribution);

/// Sample value stored for a reply that could not be parsed after the re-ask.
inline constexpr int kInvalidOutcome = -1;

struct SampleSet {
  std::string prompt_key;
  BackendMode mode = BackendMode::Mock;
  /// Sampling/Mock: m entries, each 0, 1 or kInvalidOutcome.
  std::vector<int> outcomes;
  /// Logprob only.
  std::optional<ProbPair> prob_pair;
  std::vector<std::string> raw_texts;
  std::vector<std::string> reasoning_texts;

  /// False when any outcome is kInvalidOutcome.
  bool complete() const;

  friend bool operator==(const SampleSet&, const SampleSet&) = default;
};

/// Removes <think>...</think> blocks. An unterminated block swallows the
/// rest of the text.
struct SplitReply {
  std::string answer;
  std::string reasoning;
};
SplitReply split_reasoning(std::string_view text);

/// 1 or 0 when the last whitespace-separated token (after stripping
/// reasoning blocks) is exactly "1" or "0". Throws ParseFailure otherwise.
int parse_binary_reply(std::string_view text);

// ---------------------------------------------------------------------------
// Wire protocol

struct ChatRequest {
  std::string model;
  std::string system;
  std::string user;
  double temperature = 1.0;
  bool logprobs = false;
  int top_logprobs = 0;
};

struct ChatReply {
  std::string content;
  std::optional<std::string> reasoning;
  /// First generated token's alternatives, as probabilities.
  std::map<std::string, double> token_probs;
};

nlohmann::json build_request_body(const ChatRequest& req);

/// Throws ProtocolError when the body does not follow the schema.
ChatReply parse_response_body(const nlohmann::json& body);

/// Retryable failures (transport errors, HTTP 429/5xx) throw NetworkFailure;
/// anything else throws ProtocolError.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual ChatReply complete(const ChatRequest& req) = 0;
};

class HttpChatTransport final : public ChatTransport {
 public:
  HttpChatTransport(std::string endpoint_url, std::string api_key, int timeout_seconds);
  ChatReply complete(const ChatRequest& req) override;

 private:
  std::string scheme_host_port_;
  std::string path_;
  std::string api_key_;
  int timeout_seconds_;
};

/// Reads cfg.api_key_env (empty if unset) and builds an HTTP transport.
std::unique_ptr<ChatTransport> make_http_transport(const BackendConfig& cfg);

// ---------------------------------------------------------------------------
// Cache

/// One file per (backend_id, model_name, prompt_key, sample index):
///   <root>/<backend_id>/<model_name>/<prompt_key>/<index>.json
/// Path components are sanitized to [A-Za-z0-9._-].
class SampleCache {
 public:
  explicit SampleCache(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const noexcept { return root_; }

  std::filesystem::path sample_path(const BackendConfig& cfg, std::string_view prompt_key,
                                    int index) const;

  /// One stored sample.
  struct Sample {
    int outcome = kInvalidOutcome;
    std::optional<ProbPair> prob_pair;
    std::string raw_text;
    std::string reasoning;

    friend bool operator==(const Sample&, const Sample&) = default;
  };

  /// Writes every sample of `set`. Each file is replaced atomically.
  void write(const BackendConfig& cfg, const SampleSet& set) const;
  void write_sample(const BackendConfig& cfg, std::string_view prompt_key, int index,
                    const Sample& sample) const;
  std::optional<Sample> read_sample(const BackendConfig& cfg, std::string_view prompt_key,
                                    int index) const;

  /// Full set when all effective_repeats() samples exist.
  std::optional<SampleSet> read(const BackendConfig& cfg, std::string_view prompt_key) const;

  /// Indices already on disk.
  std::vector<int> cached_indices(const BackendConfig& cfg, std::string_view prompt_key) const;

 private:
  std::filesystem::path root_;
};

// ---------------------------------------------------------------------------
// Collection

/// Deterministic uniform in [0,1) keyed by (seed, prompt_key, stream).
double mock_uniform(std::uint64_t seed, std::string_view prompt_key, std::string_view stream);

/// Mock outcome for sample `index`: a pure function of (seed, prompt_key, index).
int mock_outcome(std::uint64_t seed, std::string_view prompt_key, int index);

/// Counters are atomics so one instance can be shared across workers.
struct CallCounters {
  std::atomic<std::size_t> calls{0};
};

/// Collects the samples of one instance. `transport` may be null in Mock mode;
/// `cache` may be null. Cached samples are reused, new ones written through.
SampleSet collect_samples(const PromptInstance& instance, const BackendConfig& cfg,
                          ChatTransport* transport, const SampleCache* cache,
                          CallCounters* counters = nullptr);

struct CollectionFailure {
  std::string prompt_key;
  std::string tweet_id;
  Condition condition;
  std::string message;
};

struct CollectionResult {
  std::map<std::string, SampleSet> sets;
  std::vector<CollectionFailure> failures;
  /// Instances fully served from the cache.
  std::size_t cache_hits = 0;
  /// Instances that needed at least one backend call.
  std::size_t requests = 0;
  /// Individual backend calls, including retries and re-asks.
  std::size_t calls = 0;
};

struct CollectionOptions {
  const SampleCache* cache = nullptr;
  /// Invoked once per worker thread; unused in Mock mode. Defaults to
  /// make_http_transport.
  std::function<std::unique_ptr<ChatTransport>(const BackendConfig&)> transport_factory;
};

/// Processes every instance with at most cfg.max_parallel in flight.
CollectionResult run_collection(const std::vector<PromptInstance>& instances,
                                const BackendConfig& cfg, const CollectionOptions& options = {});

nlohmann::json to_json(const SampleSet& set);
SampleSet sample_set_from_json(const nlohmann::json& j);

}  // namespace persona_eval
