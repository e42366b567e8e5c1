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

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace persona_eval {

/// Error categories surfaced by every module. Callers branch on kind(),
/// humans read what().
enum class ErrorKind {
  FileMissing,
  MalformedRecord,
  DuplicateId,
  MissingLanguageText,
  MissingCondition,
  DuplicateCondition,
  MalformedProfile,
  TweetNotIncluded,
  InvalidConfig,
  WrongLength,
  NetworkFailure,
  ProtocolError,
  ParseFailure,
  UndefinedEntries,
  DuplicateEstimate,
  MissingArtifact,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

enum class Language { EN = 0, PL = 1, RU = 2 };

enum class PoliticalGroup {
  FarRight = 0,
  ModerateConservative = 1,
  ProgressiveLeft = 2,
  Centrist = 3,
};

inline constexpr std::size_t kNumLanguages = 3;
inline constexpr std::size_t kNumGroups = 4;
inline constexpr std::size_t kNumConditions = kNumLanguages * kNumGroups;

inline constexpr std::array<Language, kNumLanguages> kLanguages = {
    Language::EN, Language::PL, Language::RU};

inline constexpr std::array<PoliticalGroup, kNumGroups> kGroups = {
    PoliticalGroup::FarRight, PoliticalGroup::ModerateConservative,
    PoliticalGroup::ProgressiveLeft, PoliticalGroup::Centrist};

std::string_view to_string(Language lang);
std::string_view to_string(PoliticalGroup group);
std::optional<Language> parse_language(std::string_view text);
std::optional<PoliticalGroup> parse_group(std::string_view text);

/// Nationality paired with each prompt language: EN-American, PL-Polish,
/// RU-Russian.
std::string_view paired_nationality(Language lang);

/// One (political group, language) cell.
struct Condition {
  PoliticalGroup group = PoliticalGroup::FarRight;
  Language language = Language::EN;

  /// Position in the canonical order: groups outer, languages inner.
  constexpr std::size_t index() const noexcept {
    return static_cast<std::size_t>(group) * kNumLanguages +
           static_cast<std::size_t>(language);
  }

  static constexpr Condition from_index(std::size_t index) noexcept {
    return Condition{static_cast<PoliticalGroup>(index / kNumLanguages),
                     static_cast<Language>(index % kNumLanguages)};
  }

  friend constexpr auto operator<=>(const Condition& a, const Condition& b) {
    return a.index() <=> b.index();
  }
  friend constexpr bool operator==(const Condition&, const Condition&) = default;
};

/// All 12 conditions in canonical order.
constexpr std::array<Condition, kNumConditions> all_conditions() {
  std::array<Condition, kNumConditions> out{};
  for (std::size_t i = 0; i < kNumConditions; ++i) out[i] = Condition::from_index(i);
  return out;
}

/// "FarRight/EN"
std::string condition_label(const Condition& c);

}  // namespace persona_eval
