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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "persona_eval/backends.hpp"
#include "persona_eval/corpus.hpp"
#include "persona_eval/stats.hpp"
#include "persona_eval/types.hpp"

namespace persona_eval {

inline constexpr std::int8_t kMissingLabel = -1;

using LabelColumn = Eigen::Matrix<std::int8_t, Eigen::Dynamic, 1>;
using LabelCells = Eigen::Matrix<std::int8_t, Eigen::Dynamic, static_cast<int>(kNumConditions)>;

/// Included tweets x 12 conditions; cells are 0, 1 or kMissingLabel.
struct LabelMatrix {
  std::vector<std::string> rows;
  LabelCells cells;

  auto column(const Condition& c) const { return cells.col(static_cast<Eigen::Index>(c.index())); }
};

/// Throws DuplicateEstimate. Estimates for tweets outside the corpus's
/// included set are ignored.
LabelMatrix build_label_matrix(std::span<const EstimateRecord> estimates, const Corpus& corpus);

struct CorrelationValue {
  std::optional<double> r;
  std::size_t support = 0;
};

/// Phi coefficient over the rows where both columns are present. Undefined
/// when support < 2 or either column is constant on those rows.
template <typename DerivedA, typename DerivedB>
CorrelationValue binary_correlation(const Eigen::MatrixBase<DerivedA>& a,
                                    const Eigen::MatrixBase<DerivedB>& b) {
  eigen_assert(a.size() == b.size());
  // n[x][y] counts rows with a = x, b = y.
  std::int64_t n[2][2] = {{0, 0}, {0, 0}};
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const auto x = a(i);
    const auto y = b(i);
    if (x == kMissingLabel || y == kMissingLabel) continue;
    ++n[x != 0][y != 0];
  }
  CorrelationValue out;
  const std::int64_t total = n[0][0] + n[0][1] + n[1][0] + n[1][1];
  out.support = static_cast<std::size_t>(total);
  const std::int64_t a1 = n[1][0] + n[1][1];
  const std::int64_t a0 = n[0][0] + n[0][1];
  const std::int64_t b1 = n[0][1] + n[1][1];
  const std::int64_t b0 = n[0][0] + n[1][0];
  if (total < 2 || a1 == 0 || a0 == 0 || b1 == 0 || b0 == 0) return out;
  const double num = static_cast<double>(n[1][1] * n[0][0] - n[1][0] * n[0][1]);
  const double den = std::sqrt(static_cast<double>(a1) * static_cast<double>(a0) *
                               static_cast<double>(b1) * static_cast<double>(b0));
  out.r = std::clamp(num / den, -1.0, 1.0);
  return out;
}

CorrelationValue binary_correlation(std::span<const std::int8_t> a, std::span<const std::int8_t> b);

enum class DeletionMode { Pairwise, Listwise };
enum class DiagonalMode { Include, OffDiagonalOnly };

std::string_view to_string(DeletionMode mode);
std::string_view to_string(DiagonalMode mode);
std::optional<DeletionMode> parse_deletion_mode(std::string_view text);
std::optional<DiagonalMode> parse_diagonal_mode(std::string_view text);

template <typename Scalar>
struct CorrelationMatrixT {
  static constexpr int N = static_cast<int>(kNumConditions);

  Eigen::Matrix<Scalar, N, N> entries = Eigen::Matrix<Scalar, N, N>::Zero();
  Eigen::Matrix<bool, N, N> defined = Eigen::Matrix<bool, N, N>::Constant(false);
  Eigen::Matrix<int, N, N> support = Eigen::Matrix<int, N, N>::Zero();

  bool all_defined() const { return defined.all(); }
};

using CorrelationMatrix = CorrelationMatrixT<double>;

CorrelationMatrix build_correlation_matrix(const LabelMatrix& matrix,
                                           DeletionMode mode = DeletionMode::Pairwise);

namespace blocks {

inline constexpr int kBlock = static_cast<int>(kNumLanguages);
inline constexpr int kGroups = static_cast<int>(kNumGroups);

/// Population variance of a 3x3 block. In OffDiagonalOnly mode a block on
/// the main diagonal drops its three self-correlation entries.
template <typename Derived>
typename Derived::Scalar block_variance(const Eigen::MatrixBase<Derived>& block, bool drop_diagonal) {
  using Scalar = typename Derived::Scalar;
  if (!drop_diagonal) {
    const Scalar mu = block.mean();
    return (block.array() - mu).square().mean();
  }
  Eigen::Matrix<Scalar, kBlock * (kBlock - 1), 1> v;
  int k = 0;
  for (int r = 0; r < kBlock; ++r)
    for (int c = 0; c < kBlock; ++c)
      if (r != c) v(k++) = block(r, c);
  const Scalar mu = v.mean();
  return (v.array() - mu).square().mean();
}

}  // namespace blocks

/// Cross-language consistency: 1000 x mean population variance of the ten
/// upper-triangle 3x3 group blocks. Expects a fully defined 12x12 matrix.
template <typename Derived>
typename Derived::Scalar clc(const Eigen::MatrixBase<Derived>& c,
                             DiagonalMode mode = DiagonalMode::Include) {
  using Scalar = typename Derived::Scalar;
  eigen_assert(c.rows() == static_cast<Eigen::Index>(kNumConditions) && c.cols() == c.rows());
  Scalar sum(0);
  int count = 0;
  for (int i = 0; i < blocks::kGroups; ++i) {
    for (int j = i; j < blocks::kGroups; ++j) {
      const auto blk = c.template block<blocks::kBlock, blocks::kBlock>(i * blocks::kBlock,
                                                                        j * blocks::kBlock);
      sum += blocks::block_variance(blk, i == j && mode == DiagonalMode::OffDiagonalOnly);
      ++count;
    }
  }
  return sum / (Scalar(1e-3) * Scalar(count));
}

/// Inter-group differentiation: 1000 x population variance of the six
/// off-diagonal block means.
template <typename Derived>
typename Derived::Scalar igd(const Eigen::MatrixBase<Derived>& c) {
  using Scalar = typename Derived::Scalar;
  eigen_assert(c.rows() == static_cast<Eigen::Index>(kNumConditions) && c.cols() == c.rows());
  Eigen::Matrix<Scalar, 6, 1> means;
  int k = 0;
  for (int i = 0; i < blocks::kGroups; ++i)
    for (int j = i + 1; j < blocks::kGroups; ++j)
      means(k++) = c.template block<blocks::kBlock, blocks::kBlock>(i * blocks::kBlock,
                                                                    j * blocks::kBlock)
                       .mean();
  const Scalar mu = means.mean();
  return (means.array() - mu).square().mean() / Scalar(1e-3);
}

/// Checked versions: throw UndefinedEntries naming the first missing pairs.
double clc(const CorrelationMatrix& cm, DiagonalMode mode = DiagonalMode::Include);
double igd(const CorrelationMatrix& cm);

struct AgreementSummary {
  Condition a;
  Condition b;
  std::size_t n_common = 0;
  std::size_t both_offensive = 0;
  std::size_t both_clean = 0;
  std::size_t disagree_a_only = 0;  // a = 1, b = 0
  std::size_t disagree_b_only = 0;  // a = 0, b = 1

  double agreement_rate() const {
    return n_common == 0 ? 0.0 : static_cast<double>(both_offensive + both_clean) / n_common;
  }
};

template <typename DerivedA, typename DerivedB>
AgreementSummary agreement(const Eigen::MatrixBase<DerivedA>& a,
                           const Eigen::MatrixBase<DerivedB>& b) {
  eigen_assert(a.size() == b.size());
  AgreementSummary s;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const auto x = a(i);
    const auto y = b(i);
    if (x == kMissingLabel || y == kMissingLabel) continue;
    ++s.n_common;
    if (x && y) ++s.both_offensive;
    else if (!x && !y) ++s.both_clean;
    else if (x) ++s.disagree_a_only;
    else ++s.disagree_b_only;
  }
  return s;
}

AgreementSummary agreement(const LabelMatrix& matrix, const Condition& a, const Condition& b);

/// All 66 unordered condition pairs in canonical order.
std::vector<AgreementSummary> all_agreements(const LabelMatrix& matrix);

/// Joint (EN, PL, RU) label patterns for one group. Pattern index is
/// EN*4 + PL*2 + RU.
struct IntersectionCounts {
  PoliticalGroup group = PoliticalGroup::FarRight;
  std::array<std::size_t, 8> pattern_counts{};
  std::size_t rows = 0;
  double disagreement_rate = 0.0;
};

std::string pattern_bits(std::size_t pattern);

IntersectionCounts cross_language_intersections(const LabelMatrix& matrix, PoliticalGroup group);

inline constexpr double kExtremeHigh = 0.95;
inline constexpr double kExtremeLow = 0.05;

struct ConfidenceProfile {
  std::size_t n = 0;
  std::size_t extreme_count = 0;
  std::size_t offensive_lean_count = 0;
  std::size_t deviation_count = 0;

  double extreme_fraction() const { return n == 0 ? 0.0 : static_cast<double>(extreme_count) / n; }
  double deviation_fraction() const { return n == 0 ? 0.0 : static_cast<double>(deviation_count) / n; }
};

/// Extreme: p1 >= 0.95 or p1 <= 0.05. Offensive lean: p1 > 0.5.
ConfidenceProfile confidence_profile(std::span<const ProbPair> pairs);

enum class ScriptClass { LatinBasic, LatinPolish, Cyrillic, Unknown };

std::string_view to_string(ScriptClass cls);

/// Character-inventory heuristic. Diacritic-free Polish reads as LatinBasic.
ScriptClass classify_script(std::string_view text);

struct ScriptBreakdown {
  std::array<std::size_t, 4> counts{};
  std::size_t total = 0;

  double fraction(ScriptClass cls) const {
    return total == 0 ? 0.0 : static_cast<double>(counts[static_cast<std::size_t>(cls)]) / total;
  }
};

ScriptBreakdown script_breakdown(std::span<const std::string> reasoning_texts);

struct MetricReport {
  double valid_pct = 0.0;
  std::optional<double> clc;
  std::optional<double> igd;
  std::string clc_error;
  std::string igd_error;
};

/// valid_pct is the share of Confident estimates among all of them.
MetricReport compute_metric_report(std::span<const EstimateRecord> estimates,
                                   const CorrelationMatrix& cm,
                                   DiagonalMode mode = DiagonalMode::Include);

}  // namespace persona_eval
