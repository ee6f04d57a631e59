#pragma once
/**
 * @file config.hpp
 * @brief Run configuration: INI-style sections [system], [task], [output].
 *
 *   [system]
 *   gallery = G1                 ; or an inline system:
 *   n = 2
 *   horizon = 5
 *   A11 = "-1"                   ; entries A<i><j>, 1-based, t only
 *   f1 = "0.15*x1 + 0.1*sin(x2)" ; components f<i>, t and x1..xn
 *   K = 1                        ; optional declared constants
 *   alpha = 1
 *   M = 1
 *   gamma = 0.25
 *   mu = 0
 *
 *   [task]
 *   name = verify                ; audit map verify jacobian hessian bounds sweep
 *   t = 1
 *   tau = 1
 *   xi = "1.5"                   ; one point, comma separated components
 *   points = "-3; -1; 0; 1; 3"   ; points separated by ';'
 *   t_grid = "0, 0.5, 1, 2, 5"
 *   random_points = 20
 *   radius = 5
 *   eps = 0.1
 *   j_max = 60
 *   method = ivp                 ; ivp or picard (map task)
 *   tol_conj = 1e-5
 *   tol_inv = 1e-6
 *   tol_picard = 1e-8
 *   seed = 1
 *   sweep = gamma-scale          ; gamma-scale, alpha-scale or horizon
 *   values = "0.5, 1, 3.9"
 *
 *   [output]
 *   dir = out
 *   formats = "json, csv"
 *
 * Values may be quoted; lists containing ';' must be. ';' and '#' start
 * comments at the beginning of a line or after whitespace.
 */

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "topeq/errors.hpp"

namespace topeq::cli {

enum class TaskKind { Audit, Map, Verify, Jacobian, Hessian, Bounds, Sweep };

inline const char* to_string(TaskKind k) {
  switch (k) {
    case TaskKind::Audit: return "audit";
    case TaskKind::Map: return "map";
    case TaskKind::Verify: return "verify";
    case TaskKind::Jacobian: return "jacobian";
    case TaskKind::Hessian: return "hessian";
    case TaskKind::Bounds: return "bounds";
    case TaskKind::Sweep: return "sweep";
  }
  return "?";
}

inline TaskKind parse_task(const std::string& s) {
  for (TaskKind k : {TaskKind::Audit, TaskKind::Map, TaskKind::Verify, TaskKind::Jacobian, TaskKind::Hessian,
                     TaskKind::Bounds, TaskKind::Sweep})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown task '" + s + "'");
}

enum class SweepParameter { GammaScale, AlphaScale, Horizon };

inline const char* to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::GammaScale: return "gamma-scale";
    case SweepParameter::AlphaScale: return "alpha-scale";
    case SweepParameter::Horizon: return "horizon";
  }
  return "?";
}

/// Ordered (key, value) pairs of one section, as written.
using Section = std::vector<std::pair<std::string, std::string>>;

struct SystemSpec {
  std::optional<std::string> gallery;
  int n = 0;
  double horizon = 5.0;
  std::vector<std::string> A;  // row-major, n*n
  std::vector<std::string> f;  // n
  std::optional<double> K, alpha, M, gamma, mu;
};

struct TaskSpec {
  TaskKind kind = TaskKind::Audit;
  std::optional<double> t, tau, eps, radius;
  std::optional<std::vector<double>> xi, t_grid, values;
  std::optional<std::vector<std::vector<double>>> points;
  int random_points = 20;
  int j_max = 60;
  std::string method = "ivp";
  std::optional<double> tol_conj, tol_inv, tol_picard;
  std::uint64_t seed = 1;
  SweepParameter sweep = SweepParameter::GammaScale;
};

struct OutputSpec {
  std::string dir = ".";
  bool json = true;
  bool csv = true;
};

struct RunConfig {
  SystemSpec system;
  TaskSpec task;
  OutputSpec output;
  /// Raw sections for the report echo.
  std::vector<std::pair<std::string, Section>> raw;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Strips quotes and trailing "; comment" / "# comment" text.
inline std::string unquote(std::string s) {
  s = trim(s);
  if (!s.empty() && (s.front() == '"' || s.front() == '\'')) {
    const auto close = s.find(s.front(), 1);
    if (close == std::string::npos) throw ConfigError("unterminated quote in value " + s);
    const std::string rest = trim(s.substr(close + 1));
    if (!rest.empty() && rest.front() != ';' && rest.front() != '#')
      throw ConfigError("unexpected text after quoted value " + s);
    return s.substr(1, close - 1);
  }
  for (std::size_t i = 1; i < s.size(); ++i)
    if ((s[i] == ';' || s[i] == '#') && (s[i - 1] == ' ' || s[i - 1] == '\t')) return trim(s.substr(0, i));
  return s;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (trim(v.substr(used)).empty() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  throw ConfigError("key '" + key + "': expected a finite number, got '" + v + "'");
}

inline long to_long(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != std::floor(d)) throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  return static_cast<long>(d);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& p : split(v, ',')) out.push_back(to_double(key, p));
  if (out.empty()) throw ConfigError("key '" + key + "': empty list");
  return out;
}

inline std::vector<std::vector<double>> to_points(const std::string& key, const std::string& v) {
  std::vector<std::vector<double>> out;
  for (const auto& p : split(v, ';'))
    if (!p.empty()) out.push_back(to_list(key, p));
  if (out.empty()) throw ConfigError("key '" + key + "': no points");
  return out;
}

}  // namespace detail

/// Parses configuration text. Throws ConfigError (with a line number when
/// the INI structure itself is malformed).
inline RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  RunConfig cfg;
  for (const auto& [name, section] : tree) {
    if (name != "system" && name != "task" && name != "output")
      throw ConfigError("unknown section [" + name + "]");
    Section sec;
    for (const auto& [key, node] : section) sec.emplace_back(key, detail::unquote(node.data()));
    cfg.raw.emplace_back(name, std::move(sec));
  }

  bool have_system = false, have_task = false;
  std::map<std::string, std::string> a_entries, f_entries;
  for (const auto& [name, sec] : cfg.raw) {
    for (const auto& [key, v] : sec) {
      if (name == "system") {
        have_system = true;
        SystemSpec& s = cfg.system;
        if (key == "gallery") s.gallery = v;
        else if (key == "n") s.n = static_cast<int>(detail::to_long(key, v));
        else if (key == "horizon") s.horizon = detail::to_double(key, v);
        else if (key == "K") s.K = detail::to_double(key, v);
        else if (key == "alpha") s.alpha = detail::to_double(key, v);
        else if (key == "M") s.M = detail::to_double(key, v);
        else if (key == "gamma") s.gamma = detail::to_double(key, v);
        else if (key == "mu") s.mu = detail::to_double(key, v);
        else if (key.size() == 3 && key[0] == 'A') a_entries[key] = v;
        else if (key.size() >= 2 && key[0] == 'f') f_entries[key] = v;
        else throw ConfigError("unknown key '" + key + "' in [system]");
      } else if (name == "task") {
        TaskSpec& t = cfg.task;
        if (key == "name") {
          have_task = true;
          t.kind = parse_task(v);
        } else if (key == "t") t.t = detail::to_double(key, v);
        else if (key == "tau") t.tau = detail::to_double(key, v);
        else if (key == "eps") t.eps = detail::to_double(key, v);
        else if (key == "radius") t.radius = detail::to_double(key, v);
        else if (key == "xi") t.xi = detail::to_list(key, v);
        else if (key == "t_grid") t.t_grid = detail::to_list(key, v);
        else if (key == "values") t.values = detail::to_list(key, v);
        else if (key == "points") t.points = detail::to_points(key, v);
        else if (key == "random_points") t.random_points = static_cast<int>(detail::to_long(key, v));
        else if (key == "j_max") t.j_max = static_cast<int>(detail::to_long(key, v));
        else if (key == "method") t.method = v;
        else if (key == "tol_conj") t.tol_conj = detail::to_double(key, v);
        else if (key == "tol_inv") t.tol_inv = detail::to_double(key, v);
        else if (key == "tol_picard") t.tol_picard = detail::to_double(key, v);
        else if (key == "seed") t.seed = static_cast<std::uint64_t>(detail::to_long(key, v));
        else if (key == "sweep") {
          if (v == "gamma-scale") t.sweep = SweepParameter::GammaScale;
          else if (v == "alpha-scale") t.sweep = SweepParameter::AlphaScale;
          else if (v == "horizon") t.sweep = SweepParameter::Horizon;
          else throw ConfigError("unknown sweep parameter '" + v + "'");
        } else throw ConfigError("unknown key '" + key + "' in [task]");
      } else {
        OutputSpec& o = cfg.output;
        if (key == "dir") o.dir = v;
        else if (key == "formats") {
          o.json = o.csv = false;
          for (const auto& f : detail::split(v, ',')) {
            if (f == "json") o.json = true;
            else if (f == "csv") o.csv = true;
            else throw ConfigError("unknown output format '" + f + "'");
          }
        } else throw ConfigError("unknown key '" + key + "' in [output]");
      }
    }
  }
  if (!have_system) throw ConfigError("missing [system] section");
  if (!have_task) throw ConfigError("missing task name in [task]");

  SystemSpec& s = cfg.system;
  if (s.gallery) {
    if (!a_entries.empty() || !f_entries.empty() || s.n != 0)
      throw ConfigError("[system] names a gallery id and an inline system; choose one");
  } else {
    if (s.n < 1 || s.n > 9) throw ConfigError("inline systems need 1 <= n <= 9");
    for (int i = 1; i <= s.n; ++i) {
      for (int j = 1; j <= s.n; ++j) {
        const std::string key = "A" + std::to_string(i) + std::to_string(j);
        auto it = a_entries.find(key);
        if (it == a_entries.end()) throw ConfigError("missing entry " + key);
        s.A.push_back(it->second);
        a_entries.erase(it);
      }
      const std::string key = "f" + std::to_string(i);
      auto it = f_entries.find(key);
      if (it == f_entries.end()) throw ConfigError("missing component " + key);
      s.f.push_back(it->second);
      f_entries.erase(it);
    }
    if (!a_entries.empty()) throw ConfigError("entry " + a_entries.begin()->first + " outside the n x n matrix");
    if (!f_entries.empty()) throw ConfigError("component " + f_entries.begin()->first + " beyond n");
  }
  if (!(s.horizon > 0)) throw ConfigError("horizon must be positive");
  for (auto tol : {cfg.task.tol_conj, cfg.task.tol_inv, cfg.task.tol_picard, cfg.task.eps})
    if (tol && !(*tol > 0)) throw ConfigError("tolerances and eps must be positive");
  if (cfg.task.method != "ivp" && cfg.task.method != "picard")
    throw ConfigError("method must be ivp or picard");
  if (cfg.task.kind == TaskKind::Sweep && !cfg.task.values) throw ConfigError("sweep needs values");
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace topeq::cli
