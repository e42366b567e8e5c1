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
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "persona_eval/types.hpp"

namespace persona_eval {

/// One tweet with its English, Polish and Russian texts.
struct TweetRecord {
  std::string tweet_id;
  std::array<std::string, kNumLanguages> texts;
  bool included = true;

  const std::string& text(Language lang) const {
    return texts[static_cast<std::size_t>(lang)];
  }

  friend bool operator==(const TweetRecord&, const TweetRecord&) = default;
};

/// Records sorted by tweet_id. Excluded records are kept with included=false.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<TweetRecord> records);

  const std::vector<TweetRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  std::size_t included_count() const noexcept { return included_; }
  std::size_t excluded_count() const noexcept { return records_.size() - included_; }

  /// Nullptr when the id is unknown.
  const TweetRecord* find(std::string_view tweet_id) const;

  friend bool operator==(const Corpus&, const Corpus&) = default;

 private:
  std::vector<TweetRecord> records_;
  std::size_t included_ = 0;
};

/// Replaces every mention ('@' not preceded by an ASCII word character,
/// followed by one or more [A-Za-z0-9_]) with the literal "<user>".
/// Everything else is copied byte for byte.
std::string normalize_mentions(std::string_view text);

/// Parses a line-delimited corpus: one JSON object per line with
/// tweet_id, text_en, text_pl, text_ru and optional included (default true).
/// Blank lines are skipped.
Corpus parse_corpus(std::string_view content);

Corpus load_corpus(const std::filesystem::path& path);

}  // namespace persona_eval
