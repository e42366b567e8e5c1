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

#include "persona_eval/analysis.hpp"

#include <map>
#include <sstream>

namespace persona_eval {

LabelMatrix build_label_matrix(std::span<const EstimateRecord> estimates, const Corpus& corpus) {
  LabelMatrix m;
  std::map<std::string, Eigen::Index, std::less<>> row_of;
  for (const auto& rec : corpus.records()) {
    if (!rec.included) continue;
    row_of.emplace(rec.tweet_id, static_cast<Eigen::Index>(m.rows.size()));
    m.rows.push_back(rec.tweet_id);
  }
  m.cells = LabelCells::Constant(static_cast<Eigen::Index>(m.rows.size()),
                                 static_cast<Eigen::Index>(kNumConditions), kMissingLabel);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(m.cells.rows(), m.cells.cols(), false);

  for (const auto& est : estimates) {
    auto it = row_of.find(est.tweet_id);
    if (it == row_of.end()) continue;
    const auto col = static_cast<Eigen::Index>(est.condition.index());
    if (seen(it->second, col))
      throw Error(ErrorKind::DuplicateEstimate, "duplicate estimate for tweet '" + est.tweet_id +
                                                    "' under " + condition_label(est.condition));
    seen(it->second, col) = true;
    if (est.status == EstimateStatus::Confident && est.label)
      m.cells(it->second, col) = static_cast<std::int8_t>(*est.label);
  }
  return m;
}

CorrelationValue binary_correlation(std::span<const std::int8_t> a, std::span<const std::int8_t> b) {
  if (a.size() != b.size()) throw Error(ErrorKind::WrongLength, "columns differ in length");
  const auto n = static_cast<Eigen::Index>(a.size());
  return binary_correlation(Eigen::Map<const LabelColumn>(a.data(), n),
                            Eigen::Map<const LabelColumn>(b.data(), n));
}

std::string_view to_string(DeletionMode mode) {
  return mode == DeletionMode::Pairwise ? "pairwise" : "listwise";
}

std::string_view to_string(DiagonalMode mode) {
  return mode == DiagonalMode::Include ? "include" : "off_diagonal";
}

std::optional<DeletionMode> parse_deletion_mode(std::string_view text) {
  if (text == "pairwise") return DeletionMode::Pairwise;
  if (text == "listwise") return DeletionMode::Listwise;
  return std::nullopt;
}

std::optional<DiagonalMode> parse_diagonal_mode(std::string_view text) {
  if (text == "include") return DiagonalMode::Include;
  if (text == "off_diagonal") return DiagonalMode::OffDiagonalOnly;
  return std::nullopt;
}

CorrelationMatrix build_correlation_matrix(const LabelMatrix& matrix, DeletionMode mode) {
  LabelCells cells = matrix.cells;
  if (mode == DeletionMode::Listwise) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index r = 0; r < cells.rows(); ++r)
      if ((cells.row(r).array() != kMissingLabel).all()) keep.push_back(r);
    cells = matrix.cells(keep, Eigen::all);
  }
  CorrelationMatrix cm;
  constexpr int N = CorrelationMatrix::N;
  for (int i = 0; i < N; ++i) {
    for (int j = i; j < N; ++j) {
      const auto v = binary_correlation(cells.col(i), cells.col(j));
      cm.support(i, j) = cm.support(j, i) = static_cast<int>(v.support);
      if (v.r) {
        // Exact 1 on the diagonal regardless of rounding.
        const double r = i == j ? 1.0 : *v.r;
        cm.entries(i, j) = cm.entries(j, i) = r;
        cm.defined(i, j) = cm.defined(j, i) = true;
      }
    }
  }
  return cm;
}

namespace {

void require_defined(const CorrelationMatrix& cm, bool include_within_group_blocks,
                     bool include_diagonal, std::string_view metric) {
  std::ostringstream missing;
  int count = 0;
  for (int i = 0; i < CorrelationMatrix::N; ++i) {
    for (int j = i; j < CorrelationMatrix::N; ++j) {
      const bool same_group = i / blocks::kBlock == j / blocks::kBlock;
      if (same_group && !include_within_group_blocks) continue;
      if (i == j && !include_diagonal) continue;
      if (cm.defined(i, j)) continue;
      if (count < 4)
        missing << (count ? ", " : "") << condition_label(Condition::from_index(i)) << " x "
                << condition_label(Condition::from_index(j));
      ++count;
    }
  }
  if (count > 0) {
    std::ostringstream os;
    os << metric << " needs " << count << " undefined correlation(s): " << missing.str()
       << (count > 4 ? ", ..." : "");
    throw Error(ErrorKind::UndefinedEntries, os.str());
  }
}

}  // namespace

double clc(const CorrelationMatrix& cm, DiagonalMode mode) {
  require_defined(cm, true, mode == DiagonalMode::Include, "CLC");
  Eigen::Matrix<double, CorrelationMatrix::N, CorrelationMatrix::N> entries = cm.entries;
  return clc(entries, mode);
}

double igd(const CorrelationMatrix& cm) {
  require_defined(cm, false, false, "IGD");
  return igd(cm.entries);
}

AgreementSummary agreement(const LabelMatrix& matrix, const Condition& a, const Condition& b) {
  auto s = agreement(matrix.column(a), matrix.column(b));
  s.a = a;
  s.b = b;
  return s;
}

std::vector<AgreementSummary> all_agreements(const LabelMatrix& matrix) {
  std::vector<AgreementSummary> out;
  out.reserve(kNumConditions * (kNumConditions - 1) / 2);
  for (std::size_t i = 0; i < kNumConditions; ++i)
    for (std::size_t j = i + 1; j < kNumConditions; ++j)
      out.push_back(agreement(matrix, Condition::from_index(i), Condition::from_index(j)));
  return out;
}

std::string pattern_bits(std::size_t pattern) {
  std::string bits = "000";
  for (int k = 0; k < 3; ++k)
    if (pattern & (std::size_t{1} << (2 - k))) bits[k] = '1';
  return bits;
}

IntersectionCounts cross_language_intersections(const LabelMatrix& matrix, PoliticalGroup group) {
  IntersectionCounts out;
  out.group = group;
  const auto en = matrix.column({group, Language::EN});
  const auto pl = matrix.column({group, Language::PL});
  const auto ru = matrix.column({group, Language::RU});
  std::size_t disagree = 0;
  for (Eigen::Index r = 0; r < matrix.cells.rows(); ++r) {
    if (en(r) == kMissingLabel || pl(r) == kMissingLabel || ru(r) == kMissingLabel) continue;
    const std::size_t pattern = static_cast<std::size_t>(en(r)) * 4 +
                                static_cast<std::size_t>(pl(r)) * 2 +
                                static_cast<std::size_t>(ru(r));
    ++out.pattern_counts[pattern];
    ++out.rows;
    if (pattern != 0 && pattern != 7) ++disagree;
  }
  out.disagreement_rate = out.rows == 0 ? 0.0 : static_cast<double>(disagree) / out.rows;
  return out;
}

ConfidenceProfile confidence_profile(std::span<const ProbPair> pairs) {
  ConfidenceProfile p;
  p.n = pairs.size();
  for (const auto& pp : pairs) {
    if (pp.p1 >= kExtremeHigh || pp.p1 <= kExtremeLow) ++p.extreme_count;
    if (pp.p1 > 0.5) ++p.offensive_lean_count;
    if (pp.deviation_flag) ++p.deviation_count;
  }
  return p;
}

std::string_view to_string(ScriptClass cls) {
  switch (cls) {
    case ScriptClass::LatinBasic: return "LatinBasic";
    case ScriptClass::LatinPolish: return "LatinPolish";
    case ScriptClass::Cyrillic: return "Cyrillic";
    case ScriptClass::Unknown: return "Unknown";
  }
  return "?";
}

namespace {

// Lenient UTF-8 decoder: malformed bytes decode as U+FFFD.
template <typename Fn>
void for_each_code_point(std::string_view s, Fn&& fn) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int len = b0 < 0x80 ? 1 : (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
    if (len == 0 || i + static_cast<std::size_t>(len) > s.size()) {
      fn(char32_t{0xFFFD});
      ++i;
      continue;
    }
    char32_t cp = len == 1 ? b0 : len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
    bool ok = true;
    for (int k = 1; k < len; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b >> 6) != 0x2) ok = false;
      cp = (cp << 6) | (b & 0x3F);
    }
    fn(ok ? cp : char32_t{0xFFFD});
    i += ok ? static_cast<std::size_t>(len) : 1;
  }
}

bool is_polish_diacritic(char32_t cp) {
  switch (cp) {
    case 0x0104: case 0x0105:  // Ą ą
    case 0x0106: case 0x0107:  // Ć ć
    case 0x0118: case 0x0119:  // Ę ę
    case 0x0141: case 0x0142:  // Ł ł
    case 0x0143: case 0x0144:  // Ń ń
    case 0x00D3: case 0x00F3:  // Ó ó
    case 0x015A: case 0x015B:  // Ś ś
    case 0x0179: case 0x017A:  // Ź ź
    case 0x017B: case 0x017C:  // Ż ż
      return true;
    default:
      return false;
  }
}

}  // namespace

ScriptClass classify_script(std::string_view text) {
  bool cyrillic = false, polish = false, latin = false;
  for_each_code_point(text, [&](char32_t cp) {
    if (cp >= 0x0400 && cp <= 0x052F) cyrillic = true;
    else if (is_polish_diacritic(cp)) polish = true;
    else if ((cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z')) latin = true;
  });
  if (cyrillic) return ScriptClass::Cyrillic;
  if (polish) return ScriptClass::LatinPolish;
  if (latin) return ScriptClass::LatinBasic;
  return ScriptClass::Unknown;
}

ScriptBreakdown script_breakdown(std::span<const std::string> reasoning_texts) {
  ScriptBreakdown b;
  for (const auto& t : reasoning_texts) {
    ++b.counts[static_cast<std::size_t>(classify_script(t))];
    ++b.total;
  }
  return b;
}

MetricReport compute_metric_report(std::span<const EstimateRecord> estimates,
                                   const CorrelationMatrix& cm, DiagonalMode mode) {
  MetricReport report;
  std::size_t confident = 0;
  for (const auto& e : estimates)
    if (e.status == EstimateStatus::Confident) ++confident;
  report.valid_pct = estimates.empty() ? 0.0 : 100.0 * static_cast<double>(confident) / estimates.size();
  try {
    report.clc = clc(cm, mode);
  } catch (const Error& e) {
    report.clc_error = e.what();
  }
  try {
    report.igd = igd(cm);
  } catch (const Error& e) {
    report.igd_error = e.what();
  }
  return report;
}

}  // namespace persona_eval
