#pragma once

// Machine-readable reports. A report is a table (columns + rows of JSON
// scalars) plus free-form input/options/summary objects. JSON carries
// everything; CSV carries the table only.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cmath>
#include <ctime>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bihamil/error.hpp"

namespace bihamil {

using Json = nlohmann::json;

inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "1.0.0";

struct Report {
  int schema_version{kReportSchemaVersion};
  std::string tool_version{kToolVersion};
  std::string command;
  std::vector<std::string> argv;
  Json input = Json::object();
  Json options = Json::object();
  std::vector<std::string> columns;
  std::vector<std::vector<Json>> rows;
  Json summary = Json::object();
  std::string generated_at;  // wall clock; the only non-deterministic field

  friend bool operator==(const Report&, const Report&) = default;
};

class ReportFormatError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values have no JSON encoding; they become null.
inline Json cell(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline Json to_json(const Report& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) rows.push_back(Json(row));
  return Json{{"schema_version", r.schema_version},
              {"tool_version", r.tool_version},
              {"command", r.command},
              {"argv", r.argv},
              {"input", r.input},
              {"options", r.options},
              {"columns", r.columns},
              {"rows", rows},
              {"summary", r.summary},
              {"generated_at", r.generated_at}};
}

inline Report report_from_json(const Json& j) {
  try {
    Report r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion)
      throw ReportFormatError("unsupported report schema_version " + std::to_string(r.schema_version));
    r.tool_version = j.at("tool_version").get<std::string>();
    r.command = j.at("command").get<std::string>();
    r.argv = j.at("argv").get<std::vector<std::string>>();
    r.input = j.at("input");
    r.options = j.at("options");
    r.columns = j.at("columns").get<std::vector<std::string>>();
    for (const auto& row : j.at("rows")) {
      if (row.size() != r.columns.size()) throw ReportFormatError("row width does not match the header");
      r.rows.push_back(row.get<std::vector<Json>>());
    }
    r.summary = j.at("summary");
    r.generated_at = j.value("generated_at", std::string{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ReportFormatError(std::string("malformed report: ") + e.what());
  }
}

inline std::string emit_json(const Report& r) { return to_json(r).dump(2) + "\n"; }

inline Report parse_json_report(std::string_view text) {
  try {
    return report_from_json(Json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw ReportFormatError(std::string("report is not valid JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV (RFC 4180 quoting). Cells: empty = null, true/false, numbers, else text.
// Floating values always carry a '.' or exponent so they parse back as floats.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos && !s.empty()) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline std::string csv_cell(const Json& c) {
  switch (c.type()) {
    case Json::value_t::null: return "";
    case Json::value_t::boolean: return c.get<bool>() ? "true" : "false";
    case Json::value_t::number_integer: return std::to_string(c.get<std::int64_t>());
    case Json::value_t::number_unsigned: return std::to_string(c.get<std::uint64_t>());
    case Json::value_t::number_float: {
      char buf[64];
      const auto res = std::to_chars(buf, buf + sizeof buf, c.get<double>());
      std::string s(buf, res.ptr);
      if (s.find_first_of(".eE") == std::string::npos) s += ".0";
      return s;
    }
    case Json::value_t::string: {
      // Quote strings that would otherwise read back as another type.
      const std::string& s = c.get_ref<const std::string&>();
      if (s.empty()) return "\"\"";
      std::string q = csv_quote(s);
      if (q == s && (s == "true" || s == "false" || (std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '-' || s[0] == '+' || s[0] == '.')))
        q = "\"" + s + "\"";
      return q;
    }
    default: return csv_quote(c.dump());
  }
}

inline Json csv_value(const std::string& s, bool quoted) {
  if (quoted) return s;
  if (s.empty()) return nullptr;
  if (s == "true") return true;
  if (s == "false") return false;
  const char* b = s.data();
  const char* e = b + s.size();
  if (s.find_first_of(".eE") == std::string::npos) {
    std::int64_t i = 0;
    const auto r = std::from_chars(b, e, i);
    if (r.ec == std::errc() && r.ptr == e) return i;
  }
  double d = 0.0;
  const auto r = std::from_chars(b, e, d);
  if (r.ec == std::errc() && r.ptr == e) return d;
  return s;
}

// Splits CSV text into records of (text, was_quoted) fields.
inline std::vector<std::vector<std::pair<std::string, bool>>> csv_split(std::string_view text) {
  std::vector<std::vector<std::pair<std::string, bool>>> out;
  std::vector<std::pair<std::string, bool>> rec;
  std::string field;
  bool quoted = false, in_quotes = false, any = false;
  auto end_field = [&] {
    rec.emplace_back(std::move(field), quoted);
    field.clear();
    quoted = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
      quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_field();
      out.push_back(std::move(rec));
      rec.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (in_quotes) throw ReportFormatError("unterminated quoted CSV field");
  if (any) {
    end_field();
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace detail

inline std::string emit_csv(const Report& r) {
  std::string s;
  for (std::size_t i = 0; i < r.columns.size(); ++i) s += (i ? "," : "") + detail::csv_quote(r.columns[i]);
  s += "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + detail::csv_cell(row[i]);
    s += "\n";
  }
  return s;
}

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Json>> rows;
};

inline CsvTable parse_csv(std::string_view text) {
  const auto recs = detail::csv_split(text);
  if (recs.empty()) throw ReportFormatError("CSV has no header row");
  CsvTable t;
  for (const auto& [f, q] : recs[0]) t.columns.push_back(f);
  for (std::size_t i = 1; i < recs.size(); ++i) {
    if (recs[i].size() != t.columns.size()) throw ReportFormatError("CSV row " + std::to_string(i) + " has wrong width");
    std::vector<Json> row;
    for (const auto& [f, q] : recs[i]) row.push_back(detail::csv_value(f, q));
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace bihamil
