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

#include "persona_eval/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

namespace persona_eval::report {
namespace {

std::string labels_header() {
  std::string out;
  for (const auto& c : all_conditions()) out += "," + condition_label(c);
  return out;
}

std::vector<std::string_view> lines_of(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    auto line = content.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    pos = end + 1;
  }
  return lines;
}

double parse_double(std::string_view s, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(std::string(s), &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::MalformedRecord, std::string(what) + ": bad number '" + std::string(s) + "'");
  }
}

Condition parse_condition_label(std::string_view label) {
  const auto slash = label.find('/');
  if (slash != std::string_view::npos) {
    auto g = parse_group(label.substr(0, slash));
    auto l = parse_language(label.substr(slash + 1));
    if (g && l) return {*g, *l};
  }
  throw Error(ErrorKind::MalformedRecord, "bad condition label '" + std::string(label) + "'");
}

std::string json_number(double v) { return format_fixed(v, kStoredDecimals); }

std::string json_string(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

std::string color_for(double r) {
  struct Rgb { double r, g, b; };
  constexpr Rgb kNeg{33, 102, 172}, kMid{247, 247, 247}, kPos{178, 24, 43};
  const double t = std::clamp(r, -1.0, 1.0);
  const Rgb& end = t < 0 ? kNeg : kPos;
  const double w = std::abs(t);
  auto mix = [&](double a, double b) { return static_cast<int>(std::lround(a + (b - a) * w)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", mix(kMid.r, end.r), mix(kMid.g, end.g),
                mix(kMid.b, end.b));
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  std::string s(buf);
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

std::string format_percent(double value) {
  auto s = format_fixed(value, 1);
  if (s.size() > 2 && s.compare(s.size() - 2, 2, ".0") == 0) s.resize(s.size() - 2);
  return s;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  return fields;
}

std::vector<std::pair<double, WaldInterval>> ci_table(const CIConfig& cfg) {
  std::vector<std::pair<double, WaldInterval>> rows;
  for (int k = 0; k <= cfg.m; ++k) {
    const double p = Proportion{k, cfg.m}.value();
    rows.emplace_back(p, wald_ci(p, cfg));
  }
  return rows;
}

std::string render_ci_table(const CIConfig& cfg) {
  std::ostringstream os;
  os << "# Wald intervals, m = " << cfg.m << ", alpha = " << format_fixed(cfg.alpha, 2)
     << ", z = " << format_fixed(cfg.z, 6) << "\n";
  for (const auto& [p, ci] : ci_table(cfg)) {
    const auto c = classify_estimate(p, cfg);
    os << "p_hat = " << format_fixed(p, kDisplayDecimals) << ", Wald CI: ["
       << format_fixed(ci.low, kDisplayDecimals) << ", " << format_fixed(ci.high, kDisplayDecimals)
       << "] " << to_string(c.status);
    if (c.label) os << " label=" << *c.label;
    os << "\n";
  }
  return os.str();
}

std::string estimates_csv(std::span<const EstimateRecord> estimates) {
  std::string out = "tweet_id,group,language,p_hat,ci_low,ci_high,status,label\n";
  for (const auto& e : estimates) {
    out += csv_escape(e.tweet_id);
    out += ',';
    out += to_string(e.condition.group);
    out += ',';
    out += to_string(e.condition.language);
    out += ',' + format_fixed(e.p_hat, kStoredDecimals);
    out += ',' + format_fixed(e.ci_low, kStoredDecimals);
    out += ',' + format_fixed(e.ci_high, kStoredDecimals);
    out += ',';
    out += to_string(e.status);
    out += ',';
    if (e.label) out += std::to_string(*e.label);
    out += '\n';
  }
  return out;
}

std::vector<EstimateRecord> parse_estimates_csv(std::string_view content) {
  const auto lines = lines_of(content);
  std::vector<EstimateRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = csv_split(lines[i]);
    if (f.size() != 8) throw Error(ErrorKind::MalformedRecord, "estimates: line " + std::to_string(i + 1));
    EstimateRecord e;
    e.tweet_id = f[0];
    auto g = parse_group(f[1]);
    auto l = parse_language(f[2]);
    auto s = parse_estimate_status(f[6]);
    if (!g || !l || !s) throw Error(ErrorKind::MalformedRecord, "estimates: line " + std::to_string(i + 1));
    e.condition = {*g, *l};
    e.p_hat = parse_double(f[3], "p_hat");
    e.ci_low = parse_double(f[4], "ci_low");
    e.ci_high = parse_double(f[5], "ci_high");
    e.status = *s;
    if (!f[7].empty()) e.label = f[7] == "1" ? 1 : 0;
    out.push_back(std::move(e));
  }
  return out;
}

std::string labels_csv(const LabelMatrix& matrix) {
  std::string out = "tweet_id" + labels_header() + "\n";
  for (Eigen::Index r = 0; r < matrix.cells.rows(); ++r) {
    out += csv_escape(matrix.rows[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < matrix.cells.cols(); ++c) {
      out += ',';
      if (matrix.cells(r, c) != kMissingLabel) out += std::to_string(matrix.cells(r, c));
    }
    out += '\n';
  }
  return out;
}

std::string correlation_csv(const CorrelationMatrix& cm) {
  std::string out = "condition" + labels_header() + "\n";
  for (int i = 0; i < CorrelationMatrix::N; ++i) {
    out += condition_label(Condition::from_index(static_cast<std::size_t>(i)));
    for (int j = 0; j < CorrelationMatrix::N; ++j)
      out += "," + (cm.defined(i, j) ? format_fixed(cm.entries(i, j), kStoredDecimals) : std::string("NA"));
    out += '\n';
  }
  return out;
}

std::string support_csv(const CorrelationMatrix& cm) {
  std::string out = "condition" + labels_header() + "\n";
  for (int i = 0; i < CorrelationMatrix::N; ++i) {
    out += condition_label(Condition::from_index(static_cast<std::size_t>(i)));
    for (int j = 0; j < CorrelationMatrix::N; ++j) out += "," + std::to_string(cm.support(i, j));
    out += '\n';
  }
  return out;
}

CorrelationMatrix parse_correlation_csv(std::string_view content) {
  const auto lines = lines_of(content);
  if (lines.size() != kNumConditions + 1)
    throw Error(ErrorKind::MalformedRecord, "correlation CSV must have 13 lines");
  const auto header = csv_split(lines[0]);
  if (header.size() != kNumConditions + 1)
    throw Error(ErrorKind::MalformedRecord, "correlation CSV header must have 13 fields");
  for (std::size_t j = 0; j < kNumConditions; ++j)
    if (parse_condition_label(header[j + 1]).index() != j)
      throw Error(ErrorKind::MalformedRecord, "correlation CSV columns are not in canonical order");
  CorrelationMatrix cm;
  for (std::size_t i = 0; i < kNumConditions; ++i) {
    const auto f = csv_split(lines[i + 1]);
    if (f.size() != kNumConditions + 1 || parse_condition_label(f[0]).index() != i)
      throw Error(ErrorKind::MalformedRecord, "correlation CSV row " + std::to_string(i + 1));
    for (std::size_t j = 0; j < kNumConditions; ++j) {
      if (f[j + 1] == "NA") continue;
      cm.entries(static_cast<int>(i), static_cast<int>(j)) = parse_double(f[j + 1], "correlation");
      cm.defined(static_cast<int>(i), static_cast<int>(j)) = true;
    }
  }
  return cm;
}

std::string metrics_json(const MetricsFile& file) {
  auto opt = [](const std::optional<double>& v) { return v ? json_number(*v) : std::string("null"); };
  std::ostringstream os;
  os << "{\n"
     << "  \"schema_version\": " << kSchemaVersion << ",\n"
     << "  \"backend_id\": " << json_string(file.backend_id) << ",\n"
     << "  \"valid_pct\": " << json_number(file.metrics.valid_pct) << ",\n"
     << "  \"clc\": " << opt(file.metrics.clc) << ",\n"
     << "  \"igd\": " << opt(file.metrics.igd) << ",\n"
     << "  \"clc_error\": " << json_string(file.metrics.clc_error) << ",\n"
     << "  \"igd_error\": " << json_string(file.metrics.igd_error) << ",\n"
     << "  \"confident\": " << file.confident << ",\n"
     << "  \"excluded\": " << file.excluded << ",\n"
     << "  \"invalid\": " << file.invalid << ",\n"
     << "  \"deletion\": " << json_string(file.deletion) << ",\n"
     << "  \"clc_diagonal\": " << json_string(file.clc_diagonal) << "\n"
     << "}\n";
  return os.str();
}

MetricsFile parse_metrics_json(std::string_view content) {
  MetricsFile f;
  try {
    const auto j = nlohmann::json::parse(content);
    f.backend_id = j.at("backend_id").get<std::string>();
    f.metrics.valid_pct = j.at("valid_pct").get<double>();
    if (!j.at("clc").is_null()) f.metrics.clc = j["clc"].get<double>();
    if (!j.at("igd").is_null()) f.metrics.igd = j["igd"].get<double>();
    f.metrics.clc_error = j.value("clc_error", std::string());
    f.metrics.igd_error = j.value("igd_error", std::string());
    f.confident = j.value("confident", std::size_t{0});
    f.excluded = j.value("excluded", std::size_t{0});
    f.invalid = j.value("invalid", std::size_t{0});
    f.deletion = j.value("deletion", std::string("pairwise"));
    f.clc_diagonal = j.value("clc_diagonal", std::string("include"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, std::string("metrics file: ") + e.what());
  }
  return f;
}

std::string agreement_csv(std::span<const AgreementSummary> rows) {
  std::string out =
      "pair,condition_a,condition_b,n_common,both_offensive,both_clean,disagree_a_only,"
      "disagree_b_only,agreement_rate\n";
  for (const auto& s : rows) {
    const auto a = condition_label(s.a);
    const auto b = condition_label(s.b);
    out += a + "|" + b + "," + a + "," + b + "," + std::to_string(s.n_common) + "," +
           std::to_string(s.both_offensive) + "," + std::to_string(s.both_clean) + "," +
           std::to_string(s.disagree_a_only) + "," + std::to_string(s.disagree_b_only) + "," +
           format_fixed(s.agreement_rate(), kStoredDecimals) + "\n";
  }
  return out;
}

std::string upset_csv(std::span<const IntersectionCounts> groups) {
  std::string out = "group,pattern,en,pl,ru,count\n";
  for (const auto& g : groups) {
    for (std::size_t p = 0; p < g.pattern_counts.size(); ++p) {
      const auto bits = pattern_bits(p);
      out += std::string(to_string(g.group)) + "," + bits + "," + bits[0] + "," + bits[1] + "," +
             bits[2] + "," + std::to_string(g.pattern_counts[p]) + "\n";
    }
  }
  return out;
}

std::vector<IntersectionCounts> parse_upset_csv(std::string_view content) {
  const auto lines = lines_of(content);
  std::vector<IntersectionCounts> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = csv_split(lines[i]);
    auto g = f.size() == 6 ? parse_group(f[0]) : std::nullopt;
    if (!g || f[1].size() != 3) throw Error(ErrorKind::MalformedRecord, "upset: line " + std::to_string(i + 1));
    if (out.empty() || out.back().group != *g) {
      out.emplace_back();
      out.back().group = *g;
    }
    const std::size_t pattern = std::stoul(f[1], nullptr, 2);
    const auto count = static_cast<std::size_t>(std::stoull(f[5]));
    out.back().pattern_counts.at(pattern) = count;
    out.back().rows += count;
  }
  for (auto& g : out) {
    const auto agree = g.pattern_counts[0] + g.pattern_counts[7];
    g.disagreement_rate = g.rows == 0 ? 0.0 : static_cast<double>(g.rows - agree) / g.rows;
  }
  return out;
}

std::string intersection_summary_csv(std::span<const IntersectionCounts> groups) {
  std::string out = "group,rows,disagreement_rate\n";
  for (const auto& g : groups)
    out += std::string(to_string(g.group)) + "," + std::to_string(g.rows) + "," +
           format_fixed(g.disagreement_rate, kStoredDecimals) + "\n";
  return out;
}

std::string confidence_profile_csv(const ConfidenceProfile& pooled,
                                   std::span<const ConfidenceProfile> per_condition) {
  std::string out =
      "scope,n,extreme_count,extreme_fraction,offensive_lean_count,deviation_count,"
      "deviation_fraction\n";
  auto row = [&](const std::string& scope, const ConfidenceProfile& p) {
    out += scope + "," + std::to_string(p.n) + "," + std::to_string(p.extreme_count) + "," +
           format_fixed(p.extreme_fraction(), kStoredDecimals) + "," +
           std::to_string(p.offensive_lean_count) + "," + std::to_string(p.deviation_count) + "," +
           format_fixed(p.deviation_fraction(), kStoredDecimals) + "\n";
  };
  row("ALL", pooled);
  for (std::size_t i = 0; i < per_condition.size(); ++i)
    row(condition_label(Condition::from_index(i)), per_condition[i]);
  return out;
}

std::string script_breakdown_csv(const ScriptBreakdown& breakdown) {
  std::string out = "script,count,fraction\n";
  for (auto cls : {ScriptClass::LatinBasic, ScriptClass::LatinPolish, ScriptClass::Cyrillic,
                   ScriptClass::Unknown})
    out += std::string(to_string(cls)) + "," +
           std::to_string(breakdown.counts[static_cast<std::size_t>(cls)]) + "," +
           format_fixed(breakdown.fraction(cls), kStoredDecimals) + "\n";
  return out;
}

std::string model_comparison_table(std::span<const MetricsFile> backends) {
  auto metric = [](const std::optional<double>& v) {
    return v ? format_fixed(*v, kDisplayDecimals) : std::string("n/a");
  };
  std::string header = "| |", rule = "|---|", valid = "| Percentage of valid responses (%) |",
              clc_row = "| Cross-Language Consistency (CLC) |",
              igd_row = "| Inter-Group Differentiation (IGD) |";
  for (const auto& b : backends) {
    header += " " + b.backend_id + " |";
    rule += "---|";
    valid += " " + format_percent(b.metrics.valid_pct) + " |";
    clc_row += " " + metric(b.metrics.clc) + " |";
    igd_row += " " + metric(b.metrics.igd) + " |";
  }
  return header + "\n" + rule + "\n" + valid + "\n" + clc_row + "\n" + igd_row + "\n";
}

std::string heatmap_svg(const CorrelationMatrix& cm, std::string_view title) {
  constexpr int kCell = 40, kLeft = 190, kTop = 200;
  constexpr int kN = CorrelationMatrix::N;
  const int width = kLeft + kN * kCell + 20;
  const int height = kTop + kN * kCell + 20;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<title>" << xml_escape(title) << "</title>\n";
  os << "<text x=\"" << kLeft << "\" y=\"20\" font-size=\"14\">" << xml_escape(title) << "</text>\n";
  for (int k = 0; k < kN; ++k) {
    const auto label = xml_escape(condition_label(Condition::from_index(static_cast<std::size_t>(k))));
    const int mid = k * kCell + kCell / 2;
    os << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + mid + 4
       << "\" text-anchor=\"end\">" << label << "</text>\n";
    os << "<text transform=\"translate(" << kLeft + mid + 4 << "," << kTop - 6
       << ") rotate(-90)\">" << label << "</text>\n";
  }
  for (int i = 0; i < kN; ++i) {
    for (int j = 0; j < kN; ++j) {
      const bool def = cm.defined(i, j);
      const auto fill = def ? color_for(cm.entries(i, j)) : std::string("#cccccc");
      const int x = kLeft + j * kCell, y = kTop + i * kCell;
      os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\"" << kCell
         << "\" fill=\"" << fill << "\"/>\n";
      os << "<text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 + 4
         << "\" text-anchor=\"middle\" font-size=\"10\">"
         << (def ? format_fixed(cm.entries(i, j), kDisplayDecimals) : std::string("NA")) << "</text>\n";
    }
  }
  // Group block outlines.
  for (int g = 0; g < blocks::kGroups; ++g)
    for (int h = 0; h < blocks::kGroups; ++h)
      os << "<rect x=\"" << kLeft + h * 3 * kCell << "\" y=\"" << kTop + g * 3 * kCell
         << "\" width=\"" << 3 * kCell << "\" height=\"" << 3 * kCell
         << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1.5\"/>\n";
  os << "</svg>\n";
  return os.str();
}

std::string heatmap_spec(const CorrelationMatrix& cm, std::string_view title) {
  nlohmann::json values = nlohmann::json::array();
  nlohmann::json order = nlohmann::json::array();
  for (int i = 0; i < CorrelationMatrix::N; ++i) {
    order.push_back(condition_label(Condition::from_index(static_cast<std::size_t>(i))));
    for (int j = 0; j < CorrelationMatrix::N; ++j) {
      nlohmann::json cell = {
          {"row", condition_label(Condition::from_index(static_cast<std::size_t>(i)))},
          {"col", condition_label(Condition::from_index(static_cast<std::size_t>(j)))}};
      cell["r"] = cm.defined(i, j)
                      ? nlohmann::json(std::round(cm.entries(i, j) * 1e6) / 1e6)
                      : nlohmann::json(nullptr);
      values.push_back(std::move(cell));
    }
  }
  nlohmann::json spec = {
      {"$schema", "https://vega.github.io/schema/vega-lite/v5.json"},
      {"title", std::string(title)},
      {"data", {{"values", values}}},
      {"mark", "rect"},
      {"encoding",
       {{"x", {{"field", "col"}, {"type", "ordinal"}, {"sort", order}}},
        {"y", {{"field", "row"}, {"type", "ordinal"}, {"sort", order}}},
        {"color",
         {{"field", "r"},
          {"type", "quantitative"},
          {"scale", {{"domain", {-1, 1}}, {"scheme", "redblue"}, {"reverse", true}}}}}}},
  };
  return spec.dump(2) + "\n";
}

std::string upset_spec(std::span<const IntersectionCounts> groups, std::string_view title) {
  nlohmann::json values = nlohmann::json::array();
  for (const auto& g : groups)
    for (std::size_t p = 0; p < g.pattern_counts.size(); ++p)
      values.push_back({{"group", to_string(g.group)},
                        {"pattern", "EN" + pattern_bits(p).substr(0, 1) + " PL" +
                                        pattern_bits(p).substr(1, 1) + " RU" +
                                        pattern_bits(p).substr(2, 1)},
                        {"count", g.pattern_counts[p]}});
  nlohmann::json spec = {
      {"$schema", "https://vega.github.io/schema/vega-lite/v5.json"},
      {"title", std::string(title)},
      {"data", {{"values", values}}},
      {"mark", "bar"},
      {"encoding",
       {{"x", {{"field", "pattern"}, {"type", "nominal"}, {"sort", "-y"}}},
        {"y", {{"field", "count"}, {"type", "quantitative"}}},
        {"column", {{"field", "group"}, {"type", "nominal"}}}}},
  };
  return spec.dump(2) + "\n";
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingArtifact, "missing artifact: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace persona_eval::report
