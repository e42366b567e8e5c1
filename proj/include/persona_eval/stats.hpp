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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "persona_eval/backends.hpp"
#include "persona_eval/types.hpp"

namespace persona_eval {

/// p_hat = successes / trials, kept as an exact ratio.
struct Proportion {
  int successes = 0;
  int trials = 1;

  double value() const { return static_cast<double>(successes) / trials; }

  friend bool operator==(const Proportion&, const Proportion&) = default;
};

/// Stored two-sided normal quantile z_{1-alpha/2} for tabulated alphas.
std::optional<double> tabulated_z(double alpha);

struct CIConfig {
  double alpha = 0.10;
  int m = 5;
  double z = 1.6448536269514722;

  /// Throws InvalidConfig when alpha has no stored quantile.
  static CIConfig for_alpha(double alpha, int m);

  void validate() const;
};

struct WaldInterval {
  double low = 0.0;
  double high = 0.0;
};

enum class EstimateStatus { Confident, Excluded, Invalid };

std::string_view to_string(EstimateStatus status);
std::optional<EstimateStatus> parse_estimate_status(std::string_view text);

struct Classification {
  EstimateStatus status = EstimateStatus::Invalid;
  std::optional<int> label;

  friend bool operator==(const Classification&, const Classification&) = default;
};

struct EstimateRecord {
  std::string tweet_id;
  Condition condition;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  EstimateStatus status = EstimateStatus::Invalid;
  std::optional<int> label;
};

/// Throws WrongLength when outcomes.size() != m or a value is not 0/1.
Proportion estimate_p(std::span<const int> outcomes, int m);

/// p_hat -/+ z*sqrt(p_hat(1-p_hat)/m), clamped to [0,1].
WaldInterval wald_ci(double p_hat, const CIConfig& cfg);

/// Excluded iff ci_low < 0.5 < ci_high; otherwise label = p_hat > 0.5.
Classification classify_estimate(double p_hat, const CIConfig& cfg);

/// Larger probability wins; ties are Excluded.
Classification classify_prob(const ProbPair& pp);

/// Builds the estimate for one instance from its sample set. A missing or
/// incomplete set yields status Invalid.
EstimateRecord make_estimate(const PromptInstance& instance, const SampleSet* set,
                             const CIConfig& cfg);

struct MixtureSpec {
  std::vector<double> weights;
  std::vector<double> components;

  void validate() const;
};

/// sum_i w_i p_i
double mixture_success_prob(const MixtureSpec& spec);

/// Success frequency over `draws` composite trials: pick i with weight w_i,
/// then draw Bernoulli(p_i).
double simulate_mixture(const MixtureSpec& spec, std::int64_t draws, std::uint64_t seed);

}  // namespace persona_eval
