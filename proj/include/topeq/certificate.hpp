#pragma once
// Pass/fail record for one inequality evaluated on a sample grid.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace topeq {

inline std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Outcome of a hypothesis check. Limit statements (|x| -> infinity) can only
/// be probed, never certified on a finite grid.
enum class ProbeStatus { CertifiedOnGrid, Violated, ProbePassed, ProbeInconclusive };

inline const char* to_string(ProbeStatus s) {
  switch (s) {
    case ProbeStatus::CertifiedOnGrid: return "certified-on-grid";
    case ProbeStatus::Violated: return "violated";
    case ProbeStatus::ProbePassed: return "probe-passed";
    case ProbeStatus::ProbeInconclusive: return "probe-inconclusive";
  }
  return "?";
}

struct Certificate {
  std::string id;
  std::string description;
  /// Human-readable description of the sample grid.
  std::string grid;
  std::size_t samples = 0;
  /// min over the grid of (rhs - lhs).
  double worst_margin = std::numeric_limits<double>::infinity();
  /// max over the grid of max(|lhs|, |rhs|), floored at 1.
  double scale = 1.0;
  std::vector<double> witness;
  double horizon = 0.0;
  bool pass = true;
  bool outside_theorem = false;
  /// Constants and auxiliary values used by the check.
  std::map<std::string, double> values;

  static constexpr double kRelativeSlack = 1e-9;
};

/// Accumulates lhs <= rhs checks into a Certificate.
class CertificateBuilder {
 public:
  CertificateBuilder(std::string id, std::string description, double horizon) {
    cert_.id = std::move(id);
    cert_.description = std::move(description);
    cert_.horizon = horizon;
  }

  /// Records lhs <= rhs at a witness point.
  void check(double lhs, double rhs, std::vector<double> witness) {
    ++cert_.samples;
    double margin = rhs - lhs;
    if (std::isnan(margin)) margin = -std::numeric_limits<double>::infinity();
    cert_.scale = std::max({cert_.scale, std::abs(lhs), std::abs(rhs)});
    if (margin < cert_.worst_margin) {
      cert_.worst_margin = margin;
      cert_.witness = std::move(witness);
    }
  }

  void grid(std::string g) { cert_.grid = std::move(g); }
  void value(const std::string& key, double v) { cert_.values[key] = v; }
  void value_max(const std::string& key, double v) {
    auto [it, inserted] = cert_.values.emplace(key, v);
    if (!inserted) it->second = std::max(it->second, v);
  }
  void outside_theorem(bool flag) { cert_.outside_theorem = flag; }

  Certificate finish() {
    if (cert_.samples == 0) cert_.worst_margin = 0.0;
    cert_.pass = cert_.worst_margin >= -Certificate::kRelativeSlack * cert_.scale;
    return cert_;
  }

 private:
  Certificate cert_;
};

}  // namespace topeq
