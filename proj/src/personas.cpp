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

#include "persona_eval/personas.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "persona_eval/hash.hpp"

namespace persona_eval {
namespace {

constexpr std::array<std::string_view, 7> kPlaceholders = {
    "name", "age", "sex", "nationality", "group", "outlook", "tweet"};

bool is_ident_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Calls fn(name, begin, end) for each {identifier} in tmpl.
template <typename Fn>
void for_each_placeholder(std::string_view tmpl, Fn&& fn) {
  std::size_t i = 0;
  while ((i = tmpl.find('{', i)) != std::string_view::npos) {
    std::size_t j = i + 1;
    while (j < tmpl.size() && is_ident_char(tmpl[j])) ++j;
    if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
      fn(tmpl.substr(i + 1, j - i - 1), i, j + 1);
      i = j + 1;
    } else {
      ++i;
    }
  }
}

[[noreturn]] void malformed(std::size_t entry, std::string_view what) {
  std::ostringstream os;
  os << "persona entry " << entry << ": " << what;
  throw Error(ErrorKind::MalformedProfile, os.str());
}

void check_template(const PromptTemplate& t, std::string_view where) {
  if (t.system.empty() || t.user.empty())
    throw Error(ErrorKind::MalformedProfile, std::string(where) + ": empty system or user template");
  auto check = [&](std::string_view text) {
    for_each_placeholder(text, [&](std::string_view name, std::size_t, std::size_t) {
      if (std::find(kPlaceholders.begin(), kPlaceholders.end(), name) == kPlaceholders.end())
        throw Error(ErrorKind::MalformedProfile,
                    std::string(where) + ": unknown placeholder {" + std::string(name) + "}");
    });
  };
  check(t.system);
  check(t.user);
  if (t.user.find("{tweet}") == std::string::npos)
    throw Error(ErrorKind::MalformedProfile, std::string(where) + ": user template lacks {tweet}");
}

std::string required_string(const nlohmann::json& j, const char* field, std::size_t entry) {
  if (!j.contains(field) || !j[field].is_string() || j[field].get<std::string>().empty())
    malformed(entry, std::string("field '") + field + "' missing, empty or not a string");
  return j[field].get<std::string>();
}

PromptTemplate template_from_json(const nlohmann::json& j, std::string_view where) {
  if (!j.is_object() || !j.contains("system") || !j.contains("user") || !j["system"].is_string() ||
      !j["user"].is_string())
    throw Error(ErrorKind::MalformedProfile, std::string(where) + ": template needs system and user strings");
  PromptTemplate t{j["system"].get<std::string>(), j["user"].get<std::string>()};
  check_template(t, where);
  return t;
}

}  // namespace

PersonaRegistry PersonaRegistry::from_entries(
    const std::vector<std::pair<Condition, Entry>>& entries) {
  PersonaRegistry reg;
  std::array<bool, kNumConditions> seen{};
  for (const auto& [cond, entry] : entries) {
    const std::string where = condition_label(cond);
    if (seen[cond.index()])
      throw Error(ErrorKind::DuplicateCondition, "duplicate persona for (" +
                                                     std::string(to_string(cond.group)) + ", " +
                                                     std::string(to_string(cond.language)) + ")");
    if (entry.profile.political_group != cond.group)
      throw Error(ErrorKind::MalformedProfile, where + ": profile group does not match condition");
    if (entry.profile.name.empty() || entry.profile.sex.empty() || entry.profile.nationality.empty())
      throw Error(ErrorKind::MalformedProfile, where + ": name, sex and nationality are required");
    if (entry.profile.age <= 0)
      throw Error(ErrorKind::MalformedProfile, where + ": age must be a positive integer");
    if (entry.profile.outlook.empty())
      throw Error(ErrorKind::MalformedProfile, where + ": outlook is empty");
    check_template(entry.prompt, where);
    seen[cond.index()] = true;
    reg.entries_[cond.index()] = entry;
  }
  std::string missing;
  for (std::size_t i = 0; i < kNumConditions; ++i) {
    if (seen[i]) continue;
    const auto c = Condition::from_index(i);
    if (!missing.empty()) missing += ", ";
    missing += "(" + std::string(to_string(c.group)) + ", " + std::string(to_string(c.language)) + ")";
  }
  if (!missing.empty())
    throw Error(ErrorKind::MissingCondition, "no persona defined for " + missing);
  return reg;
}

PersonaRegistry parse_personas(std::string_view content) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::MalformedProfile, std::string("persona file is not valid JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("personas") || !root["personas"].is_array())
    throw Error(ErrorKind::MalformedProfile, "persona file needs a 'personas' array");

  std::array<std::optional<PromptTemplate>, kNumLanguages> templates;
  if (root.contains("templates")) {
    const auto& tj = root["templates"];
    if (!tj.is_object()) throw Error(ErrorKind::MalformedProfile, "'templates' must be an object");
    for (const auto& [key, value] : tj.items()) {
      auto lang = parse_language(key);
      if (!lang) throw Error(ErrorKind::MalformedProfile, "templates: unknown language '" + key + "'");
      templates[static_cast<std::size_t>(*lang)] = template_from_json(value, "templates." + key);
    }
  }

  std::vector<std::pair<Condition, PersonaRegistry::Entry>> entries;
  std::size_t index = 0;
  for (const auto& pj : root["personas"]) {
    ++index;
    if (!pj.is_object()) malformed(index, "not an object");
    const auto group = parse_group(required_string(pj, "group", index));
    if (!group) malformed(index, "unknown group '" + pj["group"].get<std::string>() + "'");
    const auto lang = parse_language(required_string(pj, "language", index));
    if (!lang) malformed(index, "unknown language '" + pj["language"].get<std::string>() + "'");

    PersonaRegistry::Entry entry;
    auto& p = entry.profile;
    p.political_group = *group;
    p.name = required_string(pj, "name", index);
    if (!pj.contains("age") || !pj["age"].is_number_integer() || pj["age"].get<long long>() <= 0)
      malformed(index, "field 'age' must be a positive integer");
    p.age = pj["age"].get<int>();
    p.sex = required_string(pj, "sex", index);
    p.nationality = pj.contains("nationality") ? required_string(pj, "nationality", index)
                                               : std::string(paired_nationality(*lang));
    p.group_label = pj.contains("group_label") ? required_string(pj, "group_label", index)
                                               : std::string(to_string(*group));
    p.outlook = required_string(pj, "outlook", index);

    if (pj.contains("template")) {
      entry.prompt = template_from_json(pj["template"], "persona entry " + std::to_string(index));
    } else if (templates[static_cast<std::size_t>(*lang)]) {
      entry.prompt = *templates[static_cast<std::size_t>(*lang)];
    } else {
      malformed(index, "no template for language " + std::string(to_string(*lang)));
    }
    entries.emplace_back(Condition{*group, *lang}, std::move(entry));
  }
  return PersonaRegistry::from_entries(entries);
}

PersonaRegistry load_personas(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileMissing, "cannot open persona file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_personas(buf.str());
}

std::string compute_prompt_key(std::string_view system_text, std::string_view user_text) {
  std::string framed = std::to_string(system_text.size());
  framed += ':';
  framed += system_text;
  framed += user_text;
  return sha256_hex(framed);
}

std::string fill_template(std::string_view tmpl, const PersonaProfile& persona,
                          std::string_view tweet_text) {
  std::string out;
  std::size_t last = 0;
  for_each_placeholder(tmpl, [&](std::string_view name, std::size_t begin, std::size_t end) {
    out.append(tmpl.substr(last, begin - last));
    if (name == "name") out += persona.name;
    else if (name == "age") out += std::to_string(persona.age);
    else if (name == "sex") out += persona.sex;
    else if (name == "nationality") out += persona.nationality;
    else if (name == "group") out += persona.group_label;
    else if (name == "outlook") out += persona.outlook;
    else if (name == "tweet") out += tweet_text;
    else out.append(tmpl.substr(begin, end - begin));
    last = end;
  });
  out.append(tmpl.substr(last));
  return out;
}

PromptInstance render_prompt(const TweetRecord& tweet, const Condition& condition,
                             const PersonaRegistry& registry) {
  if (!tweet.included)
    throw Error(ErrorKind::TweetNotIncluded, "tweet '" + tweet.tweet_id + "' is excluded");
  const auto& entry = registry.at(condition);
  const auto& text = tweet.text(condition.language);
  PromptInstance inst;
  inst.tweet_id = tweet.tweet_id;
  inst.condition = condition;
  inst.system_text = fill_template(entry.prompt.system, entry.profile, text);
  inst.user_text = fill_template(entry.prompt.user, entry.profile, text);
  inst.prompt_key = compute_prompt_key(inst.system_text, inst.user_text);
  return inst;
}

std::vector<PromptInstance> enumerate_instances(const Corpus& corpus,
                                                const PersonaRegistry& registry) {
  std::vector<PromptInstance> out;
  out.reserve(corpus.included_count() * kNumConditions);
  for (const auto& tweet : corpus.records()) {
    if (!tweet.included) continue;
    for (const auto& cond : all_conditions()) out.push_back(render_prompt(tweet, cond, registry));
  }
  return out;
}

}  // namespace persona_eval
