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
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "persona_eval/corpus.hpp"
#include "persona_eval/types.hpp"

namespace persona_eval {

struct PersonaProfile {
  std::string name;
  int age = 0;
  std::string sex;
  std::string nationality;
  PoliticalGroup political_group = PoliticalGroup::FarRight;
  /// Text substituted for {group}; language specific.
  std::string group_label;
  std::string outlook;

  friend bool operator==(const PersonaProfile&, const PersonaProfile&) = default;
};

/// System and user skeletons with {name} {age} {sex} {nationality} {group}
/// {outlook} {tweet} placeholders.
struct PromptTemplate {
  std::string system;
  std::string user;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

/// Exactly one persona and one template per condition.
class PersonaRegistry {
 public:
  struct Entry {
    PersonaProfile profile;
    PromptTemplate prompt;
  };

  /// Throws MissingCondition / DuplicateCondition / MalformedProfile.
  static PersonaRegistry from_entries(
      const std::vector<std::pair<Condition, Entry>>& entries);

  const Entry& at(const Condition& c) const { return entries_[c.index()]; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::array<Entry, kNumConditions> entries_;
};

/// Parses the JSON persona file. See configs/personas.json for the layout.
PersonaRegistry parse_personas(std::string_view content);

PersonaRegistry load_personas(const std::filesystem::path& path);

struct PromptInstance {
  std::string tweet_id;
  Condition condition;
  std::string system_text;
  std::string user_text;
  std::string prompt_key;

  friend bool operator==(const PromptInstance&, const PromptInstance&) = default;
};

/// Content hash of the (system, user) pair.
std::string compute_prompt_key(std::string_view system_text, std::string_view user_text);

/// Substitutes known placeholders; unknown braces are left untouched.
std::string fill_template(std::string_view tmpl, const PersonaProfile& persona,
                          std::string_view tweet_text);

PromptInstance render_prompt(const TweetRecord& tweet, const Condition& condition,
                             const PersonaRegistry& registry);

/// included tweets x 12, ordered by (tweet_id, group, language).
std::vector<PromptInstance> enumerate_instances(const Corpus& corpus,
                                                const PersonaRegistry& registry);

}  // namespace persona_eval
