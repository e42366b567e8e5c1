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

#include "persona_eval/types.hpp"

namespace persona_eval {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::FileMissing: return "file-missing";
    case ErrorKind::MalformedRecord: return "malformed-record";
    case ErrorKind::DuplicateId: return "duplicate-id";
    case ErrorKind::MissingLanguageText: return "missing-language-text";
    case ErrorKind::MissingCondition: return "missing-condition";
    case ErrorKind::DuplicateCondition: return "duplicate-condition";
    case ErrorKind::MalformedProfile: return "malformed-profile";
    case ErrorKind::TweetNotIncluded: return "tweet-not-included";
    case ErrorKind::InvalidConfig: return "invalid-config";
    case ErrorKind::WrongLength: return "wrong-length";
    case ErrorKind::NetworkFailure: return "network-failure";
    case ErrorKind::ProtocolError: return "protocol-error";
    case ErrorKind::ParseFailure: return "parse-failure";
    case ErrorKind::UndefinedEntries: return "undefined-entries";
    case ErrorKind::DuplicateEstimate: return "duplicate-estimate";
    case ErrorKind::MissingArtifact: return "missing-artifact";
  }
  return "unknown";
}

std::string_view to_string(Language lang) {
  switch (lang) {
    case Language::EN: return "EN";
    case Language::PL: return "PL";
    case Language::RU: return "RU";
  }
  return "?";
}

std::string_view to_string(PoliticalGroup group) {
  switch (group) {
    case PoliticalGroup::FarRight: return "FarRight";
    case PoliticalGroup::ModerateConservative: return "ModerateConservative";
    case PoliticalGroup::ProgressiveLeft: return "ProgressiveLeft";
    case PoliticalGroup::Centrist: return "Centrist";
  }
  return "?";
}

std::optional<Language> parse_language(std::string_view text) {
  for (auto lang : kLanguages)
    if (to_string(lang) == text) return lang;
  return std::nullopt;
}

std::optional<PoliticalGroup> parse_group(std::string_view text) {
  for (auto group : kGroups)
    if (to_string(group) == text) return group;
  return std::nullopt;
}

std::string_view paired_nationality(Language lang) {
  switch (lang) {
    case Language::EN: return "American";
    case Language::PL: return "Polish";
    case Language::RU: return "Russian";
  }
  return "";
}

std::string condition_label(const Condition& c) {
  std::string out(to_string(c.group));
  out += '/';
  out += to_string(c.language);
  return out;
}

}  // namespace persona_eval
