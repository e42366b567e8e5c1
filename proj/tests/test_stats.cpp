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

#include <cmath>
#include <random>

#include "persona_eval/stats.hpp"

using namespace persona_eval;

namespace {

/// Inverse standard normal CDF by bisection on erfc; independent of the
/// stored table.
double normal_quantile(double q) {
  double lo = -10.0;
  double hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < q) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<int> bits(std::initializer_list<int> v) { return v; }

}  // namespace

TEST_CASE("estimate_p") {
  CHECK(estimate_p(bits({1, 1, 1, 1, 1}), 5).value() == 1.0);
  CHECK(estimate_p(bits({0, 1, 0, 0, 0}), 5).value() == 0.2);
  CHECK(estimate_p(bits({1, 0, 1, 1, 0}), 5).value() == 0.6);
  CHECK(estimate_p(bits({1, 0, 1, 1, 0}), 5) == Proportion{3, 5});
  for (const auto& bad : {bits({1, 0}), bits({1, 0, 1, 1, 0, 1}), bits({1, 0, 2, 1, 0}),
                          bits({1, 0, -1, 1, 0})}) {
    try {
      estimate_p(bad, 5);
      FAIL("expected wrong-length");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::WrongLength);
    }
  }
}

TEST_CASE("stored quantiles agree with an independent inverse normal") {
  for (const double alpha : {0.20, 0.10, 0.05, 0.01}) {
    const auto z = tabulated_z(alpha);
    REQUIRE(z.has_value());
    CHECK(*z == doctest::Approx(normal_quantile(1.0 - alpha / 2)).epsilon(1e-9));
  }
  CHECK(CIConfig{}.z == doctest::Approx(1.6449).epsilon(1e-4));
  CHECK_FALSE(tabulated_z(0.123).has_value());
  CHECK_NOTHROW(CIConfig{}.validate());
  CIConfig bad;
  bad.z = 1.96;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = CIConfig{};
  bad.m = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  CHECK_THROWS_AS(CIConfig::for_alpha(0.123, 5), Error);
  CHECK(CIConfig::for_alpha(0.05, 7).z == *tabulated_z(0.05));
}

TEST_CASE("wald_ci examples") {
  const CIConfig cfg;
  auto ci = wald_ci(0.2, cfg);
  CHECK(ci.low == 0.0);
  CHECK(ci.high == doctest::Approx(0.49).epsilon(0.005 / 0.49));
  ci = wald_ci(1.0, cfg);
  CHECK(ci.low == 1.0);
  CHECK(ci.high == 1.0);
  ci = wald_ci(0.5, cfg);
  const double half = normal_quantile(0.95) * std::sqrt(0.25 / 5);
  CHECK(std::abs(ci.low - 0.13213) < 1e-4);
  CHECK(std::abs(ci.high - 0.86787) < 1e-4);
  CHECK(ci.low == doctest::Approx(0.5 - half).epsilon(1e-12));
  CHECK(ci.high == doctest::Approx(0.5 + half).epsilon(1e-12));
}

TEST_CASE("wald_ci properties") {
  for (const int m : {1, 2, 5, 7, 10, 30}) {
    const CIConfig cfg = CIConfig::for_alpha(0.10, m);
    double widest = -1.0;
    double widest_at = -1.0;
    for (int k = 0; k <= m; ++k) {
      const double p = static_cast<double>(k) / m;
      const auto ci = wald_ci(p, cfg);
      CHECK(ci.low <= p);
      CHECK(p <= ci.high);
      CHECK(ci.low >= 0.0);
      CHECK(ci.high <= 1.0);
      const auto mirror = wald_ci(1.0 - p, cfg);
      // Unclamped widths are symmetric; compare half-widths before clamping.
      const double hw = cfg.z * std::sqrt(p * (1 - p) / m);
      CHECK(std::min(p, hw) + std::min(1 - p, hw) ==
            doctest::Approx(mirror.high - mirror.low).epsilon(1e-12));
      if (k == 0 || k == m) CHECK(ci.high - ci.low == 0.0);
      if (hw > widest) {
        widest = hw;
        widest_at = p;
      }
    }
    CHECK(std::abs(widest_at - 0.5) <= 0.5 / m + 1e-12);
  }
}

TEST_CASE("exclusion at defaults is exactly {0.4, 0.6}") {
  const CIConfig cfg;
  const std::array<Classification, 6> expected = {
      Classification{EstimateStatus::Confident, 0}, Classification{EstimateStatus::Confident, 0},
      Classification{EstimateStatus::Excluded, std::nullopt},
      Classification{EstimateStatus::Excluded, std::nullopt},
      Classification{EstimateStatus::Confident, 1}, Classification{EstimateStatus::Confident, 1}};
  for (int k = 0; k <= 5; ++k) {
    CAPTURE(k);
    CHECK(classify_estimate(k / 5.0, cfg) == expected[k]);
  }
}

TEST_CASE("classification matches the interval rule for other m and alpha") {
  for (const double alpha : {0.20, 0.10, 0.05, 0.01}) {
    for (int m = 1; m <= 25; ++m) {
      const auto cfg = CIConfig::for_alpha(alpha, m);
      for (int k = 0; k <= m; ++k) {
        const double p = static_cast<double>(k) / m;
        const double hw = normal_quantile(1 - alpha / 2) * std::sqrt(p * (1 - p) / m);
        const bool straddles = std::max(0.0, p - hw) < 0.5 && 0.5 < std::min(1.0, p + hw);
        const auto c = classify_estimate(p, cfg);
        CHECK((c.status == EstimateStatus::Excluded) == straddles);
        if (!straddles) CHECK(c.label == std::optional<int>(p > 0.5 ? 1 : 0));
      }
    }
  }
}

TEST_CASE("flipping every outcome flips the label") {
  const CIConfig cfg;
  for (int mask = 0; mask < 32; ++mask) {
    std::vector<int> o(5), f(5);
    for (int i = 0; i < 5; ++i) {
      o[i] = (mask >> i) & 1;
      f[i] = 1 - o[i];
    }
    const auto a = classify_estimate(estimate_p(o, 5).value(), cfg);
    const auto b = classify_estimate(estimate_p(f, 5).value(), cfg);
    CHECK(a.status == b.status);
    if (a.label) CHECK(*a.label == 1 - *b.label);
  }
}

TEST_CASE("classify_prob") {
  CHECK(classify_prob(make_prob_pair(0.3, 0.7)) == Classification{EstimateStatus::Confident, 1});
  CHECK(classify_prob(make_prob_pair(0.7, 0.3)) == Classification{EstimateStatus::Confident, 0});
  CHECK(classify_prob(make_prob_pair(0.5, 0.5)).status == EstimateStatus::Excluded);
  CHECK(classify_prob(make_prob_pair(0.0, 0.0)).status == EstimateStatus::Excluded);
}

TEST_CASE("make_estimate") {
  PromptInstance inst;
  inst.tweet_id = "t9";
  inst.condition = {PoliticalGroup::ProgressiveLeft, Language::RU};
  inst.prompt_key = "k";
  const CIConfig cfg;

  SampleSet set;
  set.prompt_key = "k";
  set.mode = BackendMode::Sampling;
  set.outcomes = {1, 1, 1, 1, 0};
  auto r = make_estimate(inst, &set, cfg);
  CHECK(r.tweet_id == "t9");
  CHECK(r.condition == inst.condition);
  CHECK(r.p_hat == 0.8);
  CHECK(r.status == EstimateStatus::Confident);
  CHECK(r.label == std::optional<int>(1));
  CHECK(r.ci_low <= r.p_hat);
  CHECK(r.p_hat <= r.ci_high);

  set.outcomes[0] = kInvalidOutcome;
  r = make_estimate(inst, &set, cfg);
  CHECK(r.status == EstimateStatus::Invalid);
  CHECK_FALSE(r.label.has_value());

  r = make_estimate(inst, nullptr, cfg);
  CHECK(r.status == EstimateStatus::Invalid);

  SampleSet lp;
  lp.prompt_key = "k";
  lp.mode = BackendMode::Logprob;
  lp.prob_pair = make_prob_pair(0.39, 0.60);
  r = make_estimate(inst, &lp, cfg);
  CHECK(r.status == EstimateStatus::Confident);
  CHECK(r.label == std::optional<int>(1));
  CHECK(r.p_hat == 0.60);
}

TEST_CASE("mixture_success_prob") {
  CHECK(mixture_success_prob({{1.0}, {0.37}}) == doctest::Approx(0.37));
  CHECK(mixture_success_prob({{0.3, 0.7}, {0.1, 0.9}}) == doctest::Approx(0.66).epsilon(1e-12));
  for (const double p : {0.0, 0.25, 0.5, 0.91, 1.0})
    CHECK(mixture_success_prob({{0.5, 0.5}, {p, p}}) == doctest::Approx(p));
  CHECK_THROWS_AS((MixtureSpec{{0.5, 0.4}, {0.1, 0.2}}.validate()), Error);
  CHECK_THROWS_AS((MixtureSpec{{0.5, 0.5}, {0.1, 1.2}}.validate()), Error);
  CHECK_THROWS_AS((MixtureSpec{{1.0}, {0.1, 0.2}}.validate()), Error);
}

TEST_CASE("simulate_mixture") {
  CHECK(simulate_mixture({{0.2, 0.8}, {1.0, 1.0}}, 1, 1) == 1.0);
  CHECK(simulate_mixture({{0.2, 0.8}, {1.0, 1.0}}, 777, 5) == 1.0);
  CHECK(simulate_mixture({{0.2, 0.8}, {0.0, 0.0}}, 777, 5) == 0.0);
  const MixtureSpec spec{{0.3, 0.7}, {0.1, 0.9}};
  CHECK(std::abs(simulate_mixture(spec, 100000, 2024) - 0.66) < 0.01);
  CHECK(simulate_mixture(spec, 5000, 9) == simulate_mixture(spec, 5000, 9));
}

TEST_CASE("simulate_mixture converges within four standard errors") {
  std::mt19937_64 gen(123);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int within = 0;
  const int runs = 400;
  for (int r = 0; r < runs; ++r) {
    const int k = 1 + r % 5;
    MixtureSpec spec;
    double total = 0;
    for (int i = 0; i < k; ++i) {
      spec.weights.push_back(u(gen) + 0.01);
      spec.components.push_back(u(gen));
      total += spec.weights.back();
    }
    for (auto& w : spec.weights) w /= total;
    double s = 0;
    for (std::size_t i = 0; i + 1 < spec.weights.size(); ++i) s += spec.weights[i];
    spec.weights.back() = 1.0 - s;
    const double p = mixture_success_prob(spec);
    const std::int64_t n = 4000;
    const double freq = simulate_mixture(spec, n, 1000 + r);
    within += std::abs(freq - p) <= 4 * std::sqrt(p * (1 - p) / n) + 1e-12;
  }
  CHECK(within == runs);
}
