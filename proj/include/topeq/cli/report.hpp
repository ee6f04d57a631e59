#pragma once
/**
 * @file report.hpp
 * @brief Report assembly and serialization.
 *
 * report.json keys, in order: tool, version, status, config, constants,
 * certificates, tables, warnings, details, error. Floating-point values carry
 * 17 significant digits; non-finite values are written as null. Timing goes
 * to metadata.json so that report.json depends only on the config and seed.
 *
 * Every table is also written as <name>.csv with a header row.
 */

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "topeq/certificate.hpp"
#include "topeq/errors.hpp"

namespace topeq::cli {

using json = nlohmann::ordered_json;

inline constexpr const char* kToolName = "topeq";
inline constexpr const char* kToolVersion = "0.1.0";

using Cell = std::variant<double, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

enum class ErrorKind { Usage, Numerical };

struct ReportError {
  ErrorKind kind;
  std::string type;
  std::string message;
};

struct Report {
  json config = json::object();
  json constants = json::object();
  json details = json::object();
  std::vector<Certificate> certificates;
  std::vector<Table> tables;
  std::vector<std::string> warnings;
  bool outside_theorem = false;
  std::optional<ReportError> error;

  bool all_pass() const {
    for (const auto& c : certificates)
      if (!c.pass) return false;
    return true;
  }

  /// pass, fail, outside-theorem or error.
  std::string status() const {
    if (error) return "error";
    if (!all_pass()) return "fail";
    return outside_theorem ? "outside-theorem" : "pass";
  }

  int exit_code() const {
    if (error) return error->kind == ErrorKind::Usage ? 2 : 3;
    return all_pass() ? 0 : 1;
  }
};

// ------------------------------------------------------------------ JSON

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

namespace detail {
inline void dump_rec(const json& j, std::ostringstream& out, int indent, int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string pad_close(static_cast<std::size_t>(indent * depth), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        out << "{}";
        return;
      }
      out << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out << ",\n";
        first = false;
        out << pad << json(it.key()).dump() << ": ";
        dump_rec(it.value(), out, indent, depth + 1);
      }
      out << "\n" << pad_close << "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        out << "[]";
        return;
      }
      out << "[\n";
      bool first = true;
      for (const auto& e : j) {
        if (!first) out << ",\n";
        first = false;
        out << pad;
        dump_rec(e, out, indent, depth + 1);
      }
      out << "\n" << pad_close << "]";
      return;
    }
    case json::value_t::number_float: {
      const double v = j.get<double>();
      out << (std::isfinite(v) ? format_double(v) : "null");
      return;
    }
    default: out << j.dump(); return;
  }
}
}  // namespace detail

/// Serializes with stable key order and 17 significant digits.
inline std::string dump_json(const json& j, int indent = 2) {
  std::ostringstream out;
  detail::dump_rec(j, out, indent, 0);
  out << "\n";
  return out.str();
}

inline json certificate_json(const Certificate& c) {
  json j;
  j["id"] = c.id;
  j["description"] = c.description;
  j["pass"] = c.pass;
  j["outside_theorem"] = c.outside_theorem;
  j["grid"] = c.grid;
  j["samples"] = c.samples;
  j["horizon"] = c.horizon;
  j["worst_margin"] = c.worst_margin;
  j["scale"] = c.scale;
  j["witness"] = c.witness;
  json values = json::object();
  for (const auto& [k, v] : c.values) values[k] = v;
  j["values"] = values;
  return j;
}

inline json cell_json(const Cell& c) {
  if (const double* d = std::get_if<double>(&c)) return *d;
  return std::get<std::string>(c);
}

inline json report_json(const Report& r) {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["status"] = r.status();
  j["config"] = r.config;
  j["constants"] = r.constants;
  json certs = json::array();
  for (const auto& c : r.certificates) certs.push_back(certificate_json(c));
  j["certificates"] = certs;
  json tables = json::object();
  for (const auto& t : r.tables) {
    json tj;
    tj["columns"] = t.columns;
    json rows = json::array();
    for (const auto& row : t.rows) {
      json rj = json::array();
      for (const auto& c : row) rj.push_back(cell_json(c));
      rows.push_back(rj);
    }
    tj["rows"] = rows;
    tables[t.name] = tj;
  }
  j["tables"] = tables;
  j["warnings"] = r.warnings;
  j["details"] = r.details;
  if (r.error) {
    json e;
    e["kind"] = r.error->kind == ErrorKind::Usage ? "usage" : "numerical";
    e["type"] = r.error->type;
    e["message"] = r.error->message;
    j["error"] = e;
  } else {
    j["error"] = nullptr;
  }
  return j;
}

// ------------------------------------------------------------------ CSV

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

inline std::string table_csv(const Table& t) {
  std::ostringstream out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << csv_escape(t.columns[i]);
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ",";
      if (const double* d = std::get_if<double>(&row[i]))
        out << (std::isfinite(*d) ? format_double(*d) : std::string(std::isnan(*d) ? "nan" : (*d > 0 ? "inf" : "-inf")));
      else
        out << csv_escape(std::get<std::string>(row[i]));
    }
    out << "\n";
  }
  return out.str();
}

// ------------------------------------------------------------------ files

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

/// Writes report.json and one CSV per table into dir (created if needed).
inline void write_report(const Report& r, const std::string& dir, bool json_out = true, bool csv_out = true) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  if (json_out) write_text(std::filesystem::path(dir) / "report.json", dump_json(report_json(r)));
  if (csv_out)
    for (const auto& t : r.tables) write_text(std::filesystem::path(dir) / (t.name + ".csv"), table_csv(t));
}

inline void write_metadata(const std::string& dir, double elapsed_seconds) {
  json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["finished_unix_seconds"] =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count();
  j["elapsed_seconds"] = elapsed_seconds;
  write_text(std::filesystem::path(dir) / "metadata.json", dump_json(j));
}

}  // namespace topeq::cli
