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

#include "persona_eval/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

namespace persona_eval {
namespace {

struct StoredQuantile {
  double alpha;
  double z;
};

// z_{1 - alpha/2} of the standard normal.
constexpr std::array<StoredQuantile, 4> kQuantiles = {{
    {0.20, 1.2815515655446004},
    {0.10, 1.6448536269514722},
    {0.05, 1.9599639845400540},
    {0.01, 2.5758293035489004},
}};

}  // namespace

std::optional<double> tabulated_z(double alpha) {
  for (const auto& q : kQuantiles)
    if (std::abs(q.alpha - alpha) < 1e-12) return q.z;
  return std::nullopt;
}

CIConfig CIConfig::for_alpha(double alpha, int m) {
  auto z = tabulated_z(alpha);
  if (!z)
    throw Error(ErrorKind::InvalidConfig,
                "no stored normal quantile for alpha=" + std::to_string(alpha) +
                    "; supply z explicitly");
  CIConfig cfg{alpha, m, *z};
  cfg.validate();
  return cfg;
}

void CIConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidConfig, "alpha must be in (0,1)");
  if (m < 1) throw Error(ErrorKind::InvalidConfig, "m must be >= 1");
  if (!(z > 0.0)) throw Error(ErrorKind::InvalidConfig, "z must be positive");
  if (auto stored = tabulated_z(alpha); stored && std::abs(*stored - z) > 5e-5)
    throw Error(ErrorKind::InvalidConfig, "z is inconsistent with alpha");
}

std::string_view to_string(EstimateStatus status) {
  switch (status) {
    case EstimateStatus::Confident: return "Confident";
    case EstimateStatus::Excluded: return "Excluded";
    case EstimateStatus::Invalid: return "Invalid";
  }
  return "?";
}

std::optional<EstimateStatus> parse_estimate_status(std::string_view text) {
  for (auto s : {EstimateStatus::Confident, EstimateStatus::Excluded, EstimateStatus::Invalid})
    if (to_string(s) == text) return s;
  return std::nullopt;
}

Proportion estimate_p(std::span<const int> outcomes, int m) {
  if (m < 1 || outcomes.size() != static_cast<std::size_t>(m))
    throw Error(ErrorKind::WrongLength, "expected " + std::to_string(m) + " outcomes, got " +
                                            std::to_string(outcomes.size()));
  int successes = 0;
  for (int o : outcomes) {
    if (o != 0 && o != 1)
      throw Error(ErrorKind::WrongLength, "outcome " + std::to_string(o) + " is not 0 or 1");
    successes += o;
  }
  return Proportion{successes, m};
}

WaldInterval wald_ci(double p_hat, const CIConfig& cfg) {
  const double half = cfg.z * std::sqrt(p_hat * (1.0 - p_hat) / cfg.m);
  return {std::clamp(p_hat - half, 0.0, 1.0), std::clamp(p_hat + half, 0.0, 1.0)};
}

Classification classify_estimate(double p_hat, const CIConfig& cfg) {
  const auto ci = wald_ci(p_hat, cfg);
  if (ci.low < 0.5 && 0.5 < ci.high) return {EstimateStatus::Excluded, std::nullopt};
  return {EstimateStatus::Confident, p_hat > 0.5 ? 1 : 0};
}

Classification classify_prob(const ProbPair& pp) {
  if (pp.p1 > pp.p0) return {EstimateStatus::Confident, 1};
  if (pp.p0 > pp.p1) return {EstimateStatus::Confident, 0};
  return {EstimateStatus::Excluded, std::nullopt};
}

EstimateRecord make_estimate(const PromptInstance& instance, const SampleSet* set,
                             const CIConfig& cfg) {
  EstimateRecord rec;
  rec.tweet_id = instance.tweet_id;
  rec.condition = instance.condition;
  if (!set) return rec;

  if (set->prob_pair) {
    // Token probabilities carry no sampling interval.
    rec.p_hat = rec.ci_low = rec.ci_high = set->prob_pair->p1;
    const auto c = classify_prob(*set->prob_pair);
    rec.status = c.status;
    rec.label = c.label;
    return rec;
  }
  if (!set->complete() || set->outcomes.size() != static_cast<std::size_t>(cfg.m)) return rec;

  rec.p_hat = estimate_p(set->outcomes, cfg.m).value();
  const auto ci = wald_ci(rec.p_hat, cfg);
  rec.ci_low = ci.low;
  rec.ci_high = ci.high;
  const auto c = classify_estimate(rec.p_hat, cfg);
  rec.status = c.status;
  rec.label = c.label;
  return rec;
}

void MixtureSpec::validate() const {
  if (weights.empty() || weights.size() != components.size())
    throw Error(ErrorKind::InvalidConfig, "mixture needs equally many weights and components");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) throw Error(ErrorKind::InvalidConfig, "mixture weights must sum to 1");
  for (double w : weights)
    if (w < 0.0 || w > 1.0) throw Error(ErrorKind::InvalidConfig, "mixture weight outside [0,1]");
  for (double p : components)
    if (p < 0.0 || p > 1.0) throw Error(ErrorKind::InvalidConfig, "component probability outside [0,1]");
}

double mixture_success_prob(const MixtureSpec& spec) {
  spec.validate();
  return std::inner_product(spec.weights.begin(), spec.weights.end(), spec.components.begin(), 0.0);
}

double simulate_mixture(const MixtureSpec& spec, std::int64_t draws, std::uint64_t seed) {
  spec.validate();
  if (draws < 1) throw Error(ErrorKind::InvalidConfig, "draws must be >= 1");
  std::vector<double> cumulative(spec.weights.size());
  std::partial_sum(spec.weights.begin(), spec.weights.end(), cumulative.begin());
  cumulative.back() = 1.0;

  // mt19937_64 output is fixed by the standard; the uniform is derived by
  // hand so results do not depend on the library's distributions.
  std::mt19937_64 gen(seed);
  auto uniform = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };

  std::int64_t successes = 0;
  for (std::int64_t k = 0; k < draws; ++k) {
    const double u = uniform();
    const auto idx = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    const std::size_t component = std::min(idx, spec.components.size() - 1);
    if (uniform() < spec.components[component]) ++successes;
  }
  return static_cast<double>(successes) / static_cast<double>(draws);
}

}  // namespace persona_eval
