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

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace persona_eval::testing {

inline std::filesystem::path data_path(std::string_view name) {
  return std::filesystem::path(PERSONA_EVAL_TEST_DATA) / name;
}

inline std::filesystem::path config_path(std::string_view name) {
  return std::filesystem::path(PERSONA_EVAL_CONFIGS) / name;
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    std::mt19937_64 gen(rd());
    path_ = std::filesystem::temp_directory_path() / ("persona_eval_" + std::to_string(gen()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Relative path -> file bytes (or "-> target" for symlinks), recursively.
inline std::map<std::string, std::string> snapshot_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (auto it = std::filesystem::recursive_directory_iterator(root);
       it != std::filesystem::recursive_directory_iterator(); ++it) {
    const auto rel = std::filesystem::relative(it->path(), root).generic_string();
    if (it->is_symlink()) {
      out[rel] = "-> " + std::filesystem::read_symlink(it->path()).generic_string();
      it.disable_recursion_pending();
    } else if (it->is_regular_file()) {
      out[rel] = read_text(it->path());
    }
  }
  return out;
}

/// Copy of the shipped mock config whose paths point at `corpus`.
inline std::filesystem::path write_mock_config(const std::filesystem::path& dir,
                                               const std::filesystem::path& corpus,
                                               std::uint64_t seed = 42, int repeats = 5) {
  std::ostringstream os;
  os << "{\n"
     << "  \"corpus\": \"" << corpus.generic_string() << "\",\n"
     << "  \"personas\": \"" << config_path("personas.json").generic_string() << "\",\n"
     << "  \"output_dir\": \"runs\",\n"
     << "  \"ci\": {\"alpha\": 0.10},\n"
     << "  \"backends\": [{\"id\": \"mock\", \"mode\": \"mock\", \"model\": \"mock-bernoulli\", "
     << "\"repeats\": " << repeats << ", \"max_parallel\": 4, \"seed\": " << seed << "}]\n"
     << "}\n";
  const auto path = dir / "config.json";
  write_text(path, os.str());
  return path;
}

}  // namespace persona_eval::testing
