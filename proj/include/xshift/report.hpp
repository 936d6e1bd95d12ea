#ifndef XSHIFT_REPORT_HPP_
#define XSHIFT_REPORT_HPP_

#include "xshift/core.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace xshift {

inline constexpr std::string_view kReportSchema = "xshift-report/1";

enum class OutputFormat { Json, Csv, Markdown };

inline std::string_view to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::Json: return "json";
    case OutputFormat::Csv: return "csv";
    case OutputFormat::Markdown: return "markdown";
  }
  return "?";
}

/// Which column headers a markdown rendering uses.
enum class TableLayout { Tests, Quantification, Metrics };

inline std::string_view to_string(TableLayout l) {
  switch (l) {
    case TableLayout::Tests: return "tests";
    case TableLayout::Quantification: return "quantification";
    case TableLayout::Metrics: return "metrics";
  }
  return "?";
}

inline TableLayout table_layout_from(std::string_view s) {
  if (s == "tests") return TableLayout::Tests;
  if (s == "quantification") return TableLayout::Quantification;
  if (s == "metrics") return TableLayout::Metrics;
  throw ConfigError("unknown table layout '" + std::string(s) + "'");
}

struct ReportRow {
  std::string comparison;
  std::string metric;  // ks, wasserstein, psi, mae, tpr, eof, ...
  double statistic = 0.0;
  std::optional<double> p_value;
  std::optional<std::string> verdict;

  bool operator==(const ReportRow&) const = default;
};

struct Report {
  std::string experiment;
  TableLayout layout = TableLayout::Tests;
  /// Echo of the configuration, in a fixed key order.
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<ReportRow> rows;
  std::string library_version = kVersion;
  std::string engine;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> notes;
  std::optional<std::map<std::string, double>> timings;

  bool operator==(const Report&) const = default;
};

namespace detail {

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

// nlohmann's own dump prints the shortest round-trip form; reports use a
// fixed 17 significant digits instead, so the tree is written out here.
inline void dump_json(const nlohmann::ordered_json& j, std::string& out, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        out += nlohmann::ordered_json(it.key()).dump();
        out += ": ";
        dump_json(it.value(), out, indent, depth + 1);
      }
      out += "\n" + close_pad + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ",\n";
        first = false;
        out += pad;
        dump_json(v, out, indent, depth + 1);
      }
      out += "\n" + close_pad + "]";
      return;
    }
    case nlohmann::json::value_t::number_float:
      out += format_double(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

inline nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const Report& r) {
  nlohmann::ordered_json j;
  j["schema"] = kReportSchema;
  j["experiment"] = r.experiment;
  j["layout"] = to_string(r.layout);
  j["config"] = r.config;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json o;
    o["comparison"] = row.comparison;
    o["metric"] = row.metric;
    o["statistic"] = row.statistic;
    o["p_value"] = detail::optional_number(row.p_value);
    o["verdict"] = row.verdict ? nlohmann::ordered_json(*row.verdict) : nlohmann::ordered_json(nullptr);
    rows.push_back(std::move(o));
  }
  j["rows"] = std::move(rows);
  nlohmann::ordered_json meta;
  meta["library_version"] = r.library_version;
  meta["engine"] = r.engine;
  meta["seeds"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.seeds) meta["seeds"][k] = v;
  meta["notes"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.notes) meta["notes"][k] = v;
  if (r.timings) {
    meta["timings"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : *r.timings) meta["timings"][k] = v;
  }
  j["metadata"] = std::move(meta);
  return j;
}

inline Report report_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object() || j.value("schema", "") != kReportSchema) {
    throw ConfigError("report: missing or unsupported schema field");
  }
  Report r;
  r.experiment = j.at("experiment").get<std::string>();
  r.layout = table_layout_from(j.at("layout").get<std::string>());
  r.config = j.at("config");
  for (const auto& o : j.at("rows")) {
    ReportRow row;
    row.comparison = o.at("comparison").get<std::string>();
    row.metric = o.at("metric").get<std::string>();
    row.statistic = o.at("statistic").get<double>();
    if (!o.at("p_value").is_null()) row.p_value = o.at("p_value").get<double>();
    if (!o.at("verdict").is_null()) row.verdict = o.at("verdict").get<std::string>();
    r.rows.push_back(std::move(row));
  }
  const auto& meta = j.at("metadata");
  r.library_version = meta.at("library_version").get<std::string>();
  r.engine = meta.at("engine").get<std::string>();
  for (const auto& [k, v] : meta.at("seeds").items()) r.seeds[k] = v.get<std::uint64_t>();
  for (const auto& [k, v] : meta.at("notes").items()) r.notes[k] = v.get<std::string>();
  if (meta.contains("timings")) {
    r.timings.emplace();
    for (const auto& [k, v] : meta.at("timings").items()) (*r.timings)[k] = v.get<double>();
  }
  return r;
}

inline Report parse_report(std::string_view text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report: invalid JSON: ") + e.what());
  }
  try {
    return report_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("report: malformed report: ") + e.what());
  }
}

namespace detail {

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

inline std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace detail

inline std::string emit_json(const Report& r) {
  std::string out;
  detail::dump_json(to_json(r), out, 2, 0);
  out += '\n';
  return out;
}

inline std::string emit_csv(const Report& r) {
  std::ostringstream os;
  os << "comparison,metric,statistic,p_value,verdict\n";
  for (const auto& row : r.rows) {
    os << detail::csv_field(row.comparison) << ',' << row.metric << ',' << detail::format_double(row.statistic) << ','
       << (row.p_value ? detail::format_double(*row.p_value) : "") << ','
       << (row.verdict ? detail::csv_field(*row.verdict) : "") << '\n';
  }
  return os.str();
}

inline std::string emit_markdown(const Report& r) {
  std::ostringstream os;
  switch (r.layout) {
    case TableLayout::Tests:
      os << "| Comparison | p-value | Conclusions |\n|---|---|---|\n";
      for (const auto& row : r.rows) {
        os << "| " << detail::md_cell(row.comparison) << " | "
           << (row.p_value ? detail::short_number(*row.p_value) : "-") << " | " << row.verdict.value_or("-")
           << " |\n";
      }
      break;
    case TableLayout::Quantification:
      os << "| Input data | Distribution comparison | MAE |\n|---|---|---|\n";
      for (const auto& row : r.rows) {
        os << "| " << detail::md_cell(row.comparison) << " | " << row.metric << " | "
           << detail::short_number(row.statistic) << " |\n";
      }
      break;
    case TableLayout::Metrics:
      os << "| Metric | Value |\n|---|---|\n";
      for (const auto& row : r.rows) {
        os << "| " << detail::md_cell(row.comparison) << " | " << detail::short_number(row.statistic) << " |\n";
      }
      break;
  }
  return os.str();
}

inline std::string emit(const Report& r, OutputFormat format) {
  switch (format) {
    case OutputFormat::Json: return emit_json(r);
    case OutputFormat::Csv: return emit_csv(r);
    case OutputFormat::Markdown: return emit_markdown(r);
  }
  throw ConfigError("emit: unknown format");
}

}  // namespace xshift

#endif  // XSHIFT_REPORT_HPP_
