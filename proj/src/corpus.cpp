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

#include "persona_eval/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace persona_eval {
namespace {

bool is_word_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

constexpr std::array<const char*, kNumLanguages> kTextFields = {"text_en", "text_pl", "text_ru"};

[[noreturn]] void malformed(std::size_t line, std::string_view field, std::string_view what) {
  std::ostringstream os;
  os << "line " << line << ": field '" << field << "': " << what;
  throw Error(ErrorKind::MalformedRecord, os.str());
}

}  // namespace

Corpus::Corpus(std::vector<TweetRecord> records) : records_(std::move(records)) {
  std::sort(records_.begin(), records_.end(),
            [](const TweetRecord& a, const TweetRecord& b) { return a.tweet_id < b.tweet_id; });
  for (std::size_t i = 1; i < records_.size(); ++i)
    if (records_[i].tweet_id == records_[i - 1].tweet_id)
      throw Error(ErrorKind::DuplicateId, "duplicate tweet_id '" + records_[i].tweet_id + "'");
  included_ = static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.included; }));
}

const TweetRecord* Corpus::find(std::string_view tweet_id) const {
  auto it = std::lower_bound(records_.begin(), records_.end(), tweet_id,
                             [](const TweetRecord& r, std::string_view id) { return r.tweet_id < id; });
  if (it == records_.end() || it->tweet_id != tweet_id) return nullptr;
  return &*it;
}

std::string normalize_mentions(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const bool boundary = out.empty() || !is_word_char(static_cast<unsigned char>(out.back()));
    if (text[i] == '@' && boundary && i + 1 < text.size() &&
        is_word_char(static_cast<unsigned char>(text[i + 1]))) {
      std::size_t j = i + 1;
      while (j < text.size() && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
      out += "<user>";
      i = j;
      continue;
    }
    out += text[i++];
  }
  return out;
}

Corpus parse_corpus(std::string_view content) {
  std::vector<TweetRecord> records;
  std::map<std::string, std::size_t> first_line;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      malformed(line_no, "<record>", e.what());
    }
    if (!j.is_object()) malformed(line_no, "<record>", "expected a JSON object");

    TweetRecord rec;
    if (!j.contains("tweet_id") || !j["tweet_id"].is_string())
      malformed(line_no, "tweet_id", "missing or not a string");
    rec.tweet_id = j["tweet_id"].get<std::string>();
    if (rec.tweet_id.empty()) malformed(line_no, "tweet_id", "empty");

    if (j.contains("included")) {
      if (!j["included"].is_boolean()) malformed(line_no, "included", "not a boolean");
      rec.included = j["included"].get<bool>();
    }
    for (std::size_t k = 0; k < kNumLanguages; ++k) {
      const char* field = kTextFields[k];
      if (j.contains(field) && !j[field].is_null()) {
        if (!j[field].is_string()) malformed(line_no, field, "not a string");
        rec.texts[k] = normalize_mentions(j[field].get<std::string>());
      }
      if (rec.included && rec.texts[k].empty()) {
        std::ostringstream os;
        os << "line " << line_no << ": included record '" << rec.tweet_id << "' has no "
           << field;
        throw Error(ErrorKind::MissingLanguageText, os.str());
      }
    }

    auto [it, inserted] = first_line.emplace(rec.tweet_id, line_no);
    if (!inserted) {
      std::ostringstream os;
      os << "duplicate tweet_id '" << rec.tweet_id << "' on lines " << it->second << " and "
         << line_no;
      throw Error(ErrorKind::DuplicateId, os.str());
    }
    records.push_back(std::move(rec));
  }
  return Corpus(std::move(records));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileMissing, "cannot open corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str());
}

}  // namespace persona_eval
