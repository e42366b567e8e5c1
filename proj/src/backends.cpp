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

#include "persona_eval/backends.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "persona_eval/hash.hpp"

namespace persona_eval {

std::string_view to_string(BackendMode mode) {
  switch (mode) {
    case BackendMode::Sampling: return "sampling";
    case BackendMode::Logprob: return "logprob";
    case BackendMode::Mock: return "mock";
  }
  return "?";
}

std::optional<BackendMode> parse_backend_mode(std::string_view text) {
  for (auto m : {BackendMode::Sampling, BackendMode::Logprob, BackendMode::Mock})
    if (to_string(m) == text) return m;
  return std::nullopt;
}

void BackendConfig::validate() const {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::InvalidConfig,
                "backend '" + backend_id + "': " + what);
  };
  if (backend_id.empty()) throw Error(ErrorKind::InvalidConfig, "backend id is empty");
  if (model_name.empty()) fail("model is empty");
  if (repeats < 1) fail("repeats must be >= 1");
  if (max_parallel < 1) fail("max_parallel must be >= 1");
  if (retry_budget < 0) fail("retry_budget must be >= 0");
  if (retry_base_delay_ms < 0) fail("retry_base_delay_ms must be >= 0");
  if (!std::isfinite(temperature) || temperature < 0.0) fail("temperature must be >= 0");
  if (mode != BackendMode::Mock) {
    if (endpoint_url.rfind("http://", 0) != 0 && endpoint_url.rfind("https://", 0) != 0)
      fail("endpoint must be an http:// or https:// URL");
    if (timeout_seconds < 1) fail("timeout_seconds must be >= 1");
  }
  if (mode == BackendMode::Logprob && top_logprobs < 2) fail("top_logprobs must be >= 2");
}

BackendConfig backend_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "backend entry is not an object");
  BackendConfig cfg;
  try {
    cfg.backend_id = j.at("id").get<std::string>();
    const auto mode_text = j.at("mode").get<std::string>();
    auto mode = parse_backend_mode(mode_text);
    if (!mode) throw Error(ErrorKind::InvalidConfig, "backend '" + cfg.backend_id + "': unknown mode '" + mode_text + "'");
    cfg.mode = *mode;
    cfg.model_name = j.value("model", std::string(cfg.mode == BackendMode::Mock ? "mock" : ""));
    cfg.endpoint_url = j.value("endpoint", std::string());
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.repeats = j.value("repeats", cfg.repeats);
    cfg.max_parallel = j.value("max_parallel", cfg.max_parallel);
    cfg.retry_budget = j.value("retry_budget", cfg.retry_budget);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.api_key_env = j.value("api_key_env", cfg.api_key_env);
    cfg.top_logprobs = j.value("top_logprobs", cfg.top_logprobs);
    cfg.timeout_seconds = j.value("timeout_seconds", cfg.timeout_seconds);
    cfg.retry_base_delay_ms = j.value("retry_base_delay_ms", cfg.retry_base_delay_ms);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("backend entry: ") + e.what());
  }
  return cfg;
}

nlohmann::json to_json(const BackendConfig& cfg) {
  return {{"id", cfg.backend_id},
          {"mode", to_string(cfg.mode)},
          {"endpoint", cfg.endpoint_url},
          {"model", cfg.model_name},
          {"temperature", cfg.temperature},
          {"repeats", cfg.repeats},
          {"max_parallel", cfg.max_parallel},
          {"retry_budget", cfg.retry_budget},
          {"seed", cfg.seed},
          {"api_key_env", cfg.api_key_env},
          {"top_logprobs", cfg.top_logprobs},
          {"timeout_seconds", cfg.timeout_seconds},
          {"retry_base_delay_ms", cfg.retry_base_delay_ms}};
}

ProbPair make_prob_pair(double p0, double p1) {
  ProbPair pp;
  pp.p0 = p0;
  pp.p1 = p1;
  // Quantized to 1e-12 so decimal inputs such as 0.39 + 0.60 land exactly on
  // the threshold instead of one ulp above it.
  pp.mass_deviation = std::round(std::abs(1.0 - (p0 + p1)) * 1e12) / 1e12;
  pp.deviation_flag = pp.mass_deviation > kMassDeviationThreshold;
  return pp;
}

ProbPair extract_prob_pair(const std::map<std::string, double>& token_distribution) {
  auto get = [&](const char* tok) {
    auto it = token_distribution.find(tok);
    return it == token_distribution.end() ? 0.0 : it->second;
  };
  return make_prob_pair(get("0"), get("1"));
}

bool SampleSet::complete() const {
  return std::none_of(outcomes.begin(), outcomes.end(),
                      [](int o) { return o == kInvalidOutcome; });
}

SplitReply split_reasoning(std::string_view text) {
  static constexpr std::string_view kOpen = "<think>";
  static constexpr std::string_view kClose = "</think>";
  SplitReply out;
  // Some endpoints drop the opening marker; a leading close marker still
  // ends a reasoning block.
  const auto first_open = text.find(kOpen);
  const auto first_close = text.find(kClose);
  if (first_close != std::string_view::npos &&
      (first_open == std::string_view::npos || first_close < first_open)) {
    out.reasoning.append(text.substr(0, first_close));
    text.remove_prefix(first_close + kClose.size());
  }
  while (true) {
    const auto open = text.find(kOpen);
    if (open == std::string_view::npos) {
      out.answer.append(text);
      break;
    }
    out.answer.append(text.substr(0, open));
    text.remove_prefix(open + kOpen.size());
    const auto close = text.find(kClose);
    if (!out.reasoning.empty()) out.reasoning += '\n';
    if (close == std::string_view::npos) {
      out.reasoning.append(text);
      break;
    }
    out.reasoning.append(text.substr(0, close));
    text.remove_prefix(close + kClose.size());
  }
  return out;
}

int parse_binary_reply(std::string_view text) {
  const auto split = split_reasoning(text);
  std::string_view answer = split.answer;
  static constexpr std::string_view kSpace = " \t\r\n\v\f";
  const auto last = answer.find_last_not_of(kSpace);
  if (last != std::string_view::npos) {
    answer = answer.substr(0, last + 1);
    const auto start = answer.find_last_of(kSpace);
    const auto token = start == std::string_view::npos ? answer : answer.substr(start + 1);
    if (token == "1") return 1;
    if (token == "0") return 0;
  }
  std::string shown(text.substr(0, 80));
  throw Error(ErrorKind::ParseFailure, "reply does not end in a bare 0 or 1: \"" + shown + "\"");
}

// ---------------------------------------------------------------------------

nlohmann::json build_request_body(const ChatRequest& req) {
  nlohmann::json body = {
      {"model", req.model},
      {"messages",
       nlohmann::json::array({{{"role", "system"}, {"content", req.system}},
                              {{"role", "user"}, {"content", req.user}}})},
      {"temperature", req.temperature},
  };
  if (req.logprobs) {
    body["logprobs"] = true;
    body["top_logprobs"] = req.top_logprobs;
    body["max_tokens"] = 1;
  }
  return body;
}

ChatReply parse_response_body(const nlohmann::json& body) {
  auto bad = [](const std::string& what) -> Error {
    return Error(ErrorKind::ProtocolError, "unexpected response: " + what);
  };
  if (!body.is_object()) throw bad("body is not an object");
  if (body.contains("error")) throw bad("endpoint error: " + body["error"].dump());
  if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty())
    throw bad("no choices");
  const auto& choice = body["choices"][0];
  if (!choice.contains("message") || !choice["message"].is_object()) throw bad("choice has no message");
  const auto& msg = choice["message"];

  ChatReply reply;
  if (msg.contains("content") && msg["content"].is_string())
    reply.content = msg["content"].get<std::string>();
  else if (msg.contains("content") && !msg["content"].is_null())
    throw bad("message.content is not a string");
  for (const char* field : {"reasoning_content", "reasoning"}) {
    if (msg.contains(field) && msg[field].is_string()) {
      reply.reasoning = msg[field].get<std::string>();
      break;
    }
  }

  if (choice.contains("logprobs") && choice["logprobs"].is_object()) {
    const auto& lp = choice["logprobs"];
    if (lp.contains("content") && lp["content"].is_array() && !lp["content"].empty()) {
      const auto& first = lp["content"][0];
      try {
        if (first.contains("top_logprobs"))
          for (const auto& alt : first["top_logprobs"])
            reply.token_probs.emplace(alt.at("token").get<std::string>(),
                                      std::exp(alt.at("logprob").get<double>()));
        if (first.contains("token") && first.contains("logprob"))
          reply.token_probs.emplace(first["token"].get<std::string>(),
                                    std::exp(first["logprob"].get<double>()));
      } catch (const nlohmann::json::exception& e) {
        throw bad(std::string("logprobs: ") + e.what());
      }
    }
  }
  return reply;
}

HttpChatTransport::HttpChatTransport(std::string endpoint_url, std::string api_key,
                                     int timeout_seconds)
    : api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
  const auto scheme_end = endpoint_url.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorKind::InvalidConfig, "endpoint is not a URL: " + endpoint_url);
  const auto path_start = endpoint_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_port_ = endpoint_url;
    path_ = "/";
  } else {
    scheme_host_port_ = endpoint_url.substr(0, path_start);
    path_ = endpoint_url.substr(path_start);
  }
}

ChatReply HttpChatTransport::complete(const ChatRequest& req) {
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(timeout_seconds_, 0);
  client.set_read_timeout(timeout_seconds_, 0);
  client.set_write_timeout(timeout_seconds_, 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(path_, headers, build_request_body(req).dump(), "application/json");
  if (!res)
    throw Error(ErrorKind::NetworkFailure,
                "request to " + scheme_host_port_ + " failed: " + httplib::to_string(res.error()));
  if (res->status == 429 || res->status >= 500)
    throw Error(ErrorKind::NetworkFailure, "HTTP " + std::to_string(res->status));
  if (res->status != 200)
    throw Error(ErrorKind::ProtocolError,
                "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  nlohmann::json body;
  try {
    body = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ProtocolError, std::string("response is not JSON: ") + e.what());
  }
  return parse_response_body(body);
}

std::unique_ptr<ChatTransport> make_http_transport(const BackendConfig& cfg) {
  std::string key;
  if (const char* v = std::getenv(cfg.api_key_env.c_str())) key = v;
  return std::make_unique<HttpChatTransport>(cfg.endpoint_url, std::move(key),
                                             cfg.timeout_seconds);
}

// ---------------------------------------------------------------------------

namespace {

std::string sanitize(std::string_view component) {
  std::string out(component);
  for (char& c : out) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '-';
    if (!ok) c = '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const auto tmp = path.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::filesystem::path SampleCache::sample_path(const BackendConfig& cfg,
                                               std::string_view prompt_key, int index) const {
  return root_ / sanitize(cfg.backend_id) / sanitize(cfg.model_name) / sanitize(prompt_key) /
         (std::to_string(index) + ".json");
}

void SampleCache::write_sample(const BackendConfig& cfg, std::string_view prompt_key, int index,
                               const Sample& sample) const {
  nlohmann::json j = {{"backend_id", cfg.backend_id},
                      {"model_name", cfg.model_name},
                      {"prompt_key", prompt_key},
                      {"index", index},
                      {"mode", to_string(cfg.mode)},
                      {"raw_text", sample.raw_text},
                      {"reasoning", sample.reasoning}};
  if (sample.prob_pair)
    j["prob_pair"] = {{"p0", sample.prob_pair->p0}, {"p1", sample.prob_pair->p1}};
  else
    j["outcome"] = sample.outcome;
  write_atomically(sample_path(cfg, prompt_key, index), j.dump() + "\n");
}

std::optional<SampleCache::Sample> SampleCache::read_sample(const BackendConfig& cfg,
                                                            std::string_view prompt_key,
                                                            int index) const {
  const auto path = sample_path(cfg, prompt_key, index);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    if (j.at("prompt_key").get<std::string>() != prompt_key || j.at("index").get<int>() != index)
      return std::nullopt;
    Sample s;
    s.raw_text = j.at("raw_text").get<std::string>();
    s.reasoning = j.at("reasoning").get<std::string>();
    if (j.contains("prob_pair"))
      s.prob_pair = make_prob_pair(j["prob_pair"].at("p0").get<double>(),
                                   j["prob_pair"].at("p1").get<double>());
    else
      s.outcome = j.at("outcome").get<int>();
    return s;
  } catch (const nlohmann::json::exception&) {
    // A torn or foreign file is treated as absent and re-fetched.
    return std::nullopt;
  }
}

void SampleCache::write(const BackendConfig& cfg, const SampleSet& set) const {
  const int m = cfg.effective_repeats();
  for (int i = 0; i < m; ++i) {
    Sample s;
    if (set.prob_pair) s.prob_pair = set.prob_pair;
    else s.outcome = set.outcomes.at(static_cast<std::size_t>(i));
    if (static_cast<std::size_t>(i) < set.raw_texts.size()) s.raw_text = set.raw_texts[i];
    if (static_cast<std::size_t>(i) < set.reasoning_texts.size()) s.reasoning = set.reasoning_texts[i];
    write_sample(cfg, set.prompt_key, i, s);
  }
}

std::optional<SampleSet> SampleCache::read(const BackendConfig& cfg,
                                           std::string_view prompt_key) const {
  const int m = cfg.effective_repeats();
  SampleSet set;
  set.prompt_key = std::string(prompt_key);
  set.mode = cfg.mode;
  for (int i = 0; i < m; ++i) {
    auto s = read_sample(cfg, prompt_key, i);
    if (!s) return std::nullopt;
    if (cfg.mode == BackendMode::Logprob) {
      if (!s->prob_pair) return std::nullopt;
      set.prob_pair = s->prob_pair;
    } else {
      if (s->prob_pair) return std::nullopt;
      set.outcomes.push_back(s->outcome);
    }
    set.raw_texts.push_back(std::move(s->raw_text));
    set.reasoning_texts.push_back(std::move(s->reasoning));
  }
  return set;
}

std::vector<int> SampleCache::cached_indices(const BackendConfig& cfg,
                                             std::string_view prompt_key) const {
  std::vector<int> out;
  for (int i = 0; i < cfg.effective_repeats(); ++i)
    if (std::filesystem::exists(sample_path(cfg, prompt_key, i))) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------------------

double mock_uniform(std::uint64_t seed, std::string_view prompt_key, std::string_view stream) {
  std::string material = std::to_string(seed);
  material += '|';
  material += prompt_key;
  material += '|';
  material += stream;
  return static_cast<double>(sha256_u64(material) >> 11) * 0x1.0p-53;
}

int mock_outcome(std::uint64_t seed, std::string_view prompt_key, int index) {
  const double p = mock_uniform(seed, prompt_key, "latent");
  return mock_uniform(seed, prompt_key, "sample:" + std::to_string(index)) < p ? 1 : 0;
}

namespace {

ChatReply call_with_retries(ChatTransport& transport, const ChatRequest& req,
                            const BackendConfig& cfg, CallCounters* counters) {
  for (int attempt = 0;; ++attempt) {
    try {
      if (counters) ++counters->calls;
      return transport.complete(req);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NetworkFailure || attempt >= cfg.retry_budget) throw;
    }
    const auto delay = std::min<long long>(
        30000, static_cast<long long>(cfg.retry_base_delay_ms) << std::min(attempt, 16));
    if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
  }
}

SampleCache::Sample fetch_sample(const PromptInstance& instance, const BackendConfig& cfg,
                                 int index, ChatTransport* transport, CallCounters* counters) {
  SampleCache::Sample s;
  if (cfg.mode == BackendMode::Mock) {
    s.outcome = mock_outcome(cfg.seed, instance.prompt_key, index);
    s.raw_text = std::to_string(s.outcome);
    return s;
  }
  if (!transport)
    throw Error(ErrorKind::InvalidConfig, "backend '" + cfg.backend_id + "' has no transport");

  ChatRequest req;
  req.model = cfg.model_name;
  req.system = instance.system_text;
  req.user = instance.user_text;
  req.temperature = cfg.temperature;

  if (cfg.mode == BackendMode::Logprob) {
    req.logprobs = true;
    req.top_logprobs = cfg.top_logprobs;
    const auto reply = call_with_retries(*transport, req, cfg, counters);
    s.prob_pair = extract_prob_pair(reply.token_probs);
    s.raw_text = reply.content;
    s.reasoning = reply.reasoning.value_or("");
    return s;
  }

  // Sampling: one re-ask on a reply that does not parse.
  for (int ask = 0; ask < 2; ++ask) {
    const auto reply = call_with_retries(*transport, req, cfg, counters);
    s.raw_text = reply.content;
    s.reasoning = reply.reasoning ? *reply.reasoning : split_reasoning(reply.content).reasoning;
    try {
      s.outcome = parse_binary_reply(reply.content);
      return s;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ParseFailure) throw;
    }
  }
  s.outcome = kInvalidOutcome;
  return s;
}

}  // namespace

SampleSet collect_samples(const PromptInstance& instance, const BackendConfig& cfg,
                          ChatTransport* transport, const SampleCache* cache,
                          CallCounters* counters) {
  const int m = cfg.effective_repeats();
  SampleSet set;
  set.prompt_key = instance.prompt_key;
  set.mode = cfg.mode;
  for (int i = 0; i < m; ++i) {
    std::optional<SampleCache::Sample> s;
    if (cache) s = cache->read_sample(cfg, instance.prompt_key, i);
    if (!s || s->prob_pair.has_value() != (cfg.mode == BackendMode::Logprob)) {
      s = fetch_sample(instance, cfg, i, transport, counters);
      if (cache) cache->write_sample(cfg, instance.prompt_key, i, *s);
    }
    if (cfg.mode == BackendMode::Logprob) set.prob_pair = s->prob_pair;
    else set.outcomes.push_back(s->outcome);
    set.raw_texts.push_back(std::move(s->raw_text));
    set.reasoning_texts.push_back(std::move(s->reasoning));
  }
  return set;
}

CollectionResult run_collection(const std::vector<PromptInstance>& instances,
                                const BackendConfig& cfg, const CollectionOptions& options) {
  cfg.validate();
  auto factory = options.transport_factory ? options.transport_factory
                                           : std::function(make_http_transport);

  const std::size_t n = instances.size();
  std::vector<std::optional<SampleSet>> sets(n);
  std::vector<std::optional<std::string>> errors(n);
  std::vector<char> from_cache(n, 0);
  CallCounters counters;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    std::unique_ptr<ChatTransport> transport;
    std::string transport_error;
    if (cfg.mode != BackendMode::Mock) {
      try {
        transport = factory(cfg);
      } catch (const std::exception& e) {
        transport_error = e.what();
      }
    }
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& inst = instances[i];
      try {
        if (options.cache) {
          if (auto hit = options.cache->read(cfg, inst.prompt_key)) {
            sets[i] = std::move(hit);
            from_cache[i] = 1;
            continue;
          }
        }
        if (!transport && cfg.mode != BackendMode::Mock)
          throw Error(ErrorKind::NetworkFailure, "transport unavailable: " + transport_error);
        sets[i] = collect_samples(inst, cfg, transport.get(), options.cache, &counters);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const std::size_t threads =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(cfg.max_parallel), n));
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  CollectionResult result;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      result.failures.push_back({instances[i].prompt_key, instances[i].tweet_id,
                                 instances[i].condition, *errors[i]});
      if (!from_cache[i]) ++result.requests;
      continue;
    }
    if (from_cache[i]) ++result.cache_hits;
    else ++result.requests;
    result.sets.insert_or_assign(instances[i].prompt_key, std::move(*sets[i]));
  }
  result.calls = counters.calls.load();
  return result;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const SampleSet& set) {
  nlohmann::json j = {{"prompt_key", set.prompt_key},
                      {"mode", to_string(set.mode)},
                      {"raw_texts", set.raw_texts},
                      {"reasoning_texts", set.reasoning_texts}};
  if (set.prob_pair)
    j["prob_pair"] = {{"p0", set.prob_pair->p0}, {"p1", set.prob_pair->p1}};
  else
    j["outcomes"] = set.outcomes;
  return j;
}

SampleSet sample_set_from_json(const nlohmann::json& j) {
  SampleSet set;
  try {
    set.prompt_key = j.at("prompt_key").get<std::string>();
    auto mode = parse_backend_mode(j.at("mode").get<std::string>());
    if (!mode) throw Error(ErrorKind::ProtocolError, "sample set: unknown mode");
    set.mode = *mode;
    set.raw_texts = j.at("raw_texts").get<std::vector<std::string>>();
    set.reasoning_texts = j.at("reasoning_texts").get<std::vector<std::string>>();
    if (j.contains("prob_pair"))
      set.prob_pair = make_prob_pair(j["prob_pair"].at("p0").get<double>(),
                                     j["prob_pair"].at("p1").get<double>());
    else
      set.outcomes = j.at("outcomes").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ProtocolError, std::string("sample set: ") + e.what());
  }
  return set;
}

}  // namespace persona_eval
