// Copyright 2026 The hbproxy Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Machine profiles, scaling-efficiency and energy formulas, the
// latency/bandwidth communication model, and CSV/text reporting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "hbproxy/error.hpp"
#include "hbproxy/exchange.hpp"
#include "hbproxy/runtime.hpp"

namespace hbp {

struct MachineProfile {
  std::string name;
  int cores_per_node = 1;
  double power_per_node_w = 0.0;
  double latency_us = 0.0;
  double bandwidth_gbs = 0.0;  // per node, 1 GB = 1e9 bytes
  double peak_gflops = 0.0;
};

inline const std::vector<MachineProfile>& builtin_profiles() {
  static const std::vector<MachineProfile> profiles = {
      {"bgq", 16, 80.0, 1.4, 3.4, 204.8},
      {"xe6", 32, 400.0, 1.2, 5.6, 294.4},
      {"b510", 16, 498.0, 0.6, 3.0, 345.6},
  };
  return profiles;
}

inline const MachineProfile& machine_profile(const std::string& name) {
  for (const auto& p : builtin_profiles())
    if (p.name == name) return p;
  throw DomainError("unknown machine '" + name + "' (expected bgq, xe6 or b510)");
}

namespace detail {
inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(what) + " must be positive");
}
}  // namespace detail

/// Message-passing efficiency at n resource units relative to the smallest
/// configuration s: (TM_s / TM_n) / (n / s).
inline double efficiency_mpi(double tm_s, double tm_n, double s, double n) {
  detail::require_positive(tm_s, "TM_s");
  detail::require_positive(tm_n, "TM_n");
  detail::require_positive(s, "s");
  detail::require_positive(n, "n");
  if (n < s) throw DomainError("n must be >= s");
  return (tm_s / tm_n) / (n / s);
}

/// Hybrid efficiency at m units against the best message-passing time on
/// n units: (TM_n / TH_m) / (m / n).
inline double efficiency_hybrid(double tm_n, double th_m, double n, double m) {
  detail::require_positive(tm_n, "TM_n");
  detail::require_positive(th_m, "TH_m");
  detail::require_positive(n, "n");
  detail::require_positive(m, "m");
  if (m < n) throw DomainError("m must be >= n");
  return (tm_n / th_m) / (m / n);
}

/// Energy per iteration in watt-hours across `nodes` nodes.
inline double power_per_iteration(double wall_s, double power_per_node_w, double nodes, double iterations) {
  detail::require_positive(wall_s, "T_t");
  detail::require_positive(power_per_node_w, "P_n");
  detail::require_positive(nodes, "nodes");
  detail::require_positive(iterations, "ni");
  return ((wall_s / 3600.0) * power_per_node_w * nodes) / iterations;
}

/// t = messages * latency + link_bytes / bandwidth.
inline double predict_comm_time(std::uint64_t messages, std::uint64_t link_bytes, const MachineProfile& m) {
  return static_cast<double>(messages) * m.latency_us * 1e-6 +
         static_cast<double>(link_bytes) / (m.bandwidth_gbs * 1e9);
}

/// Critical-path time of one exchange: each rank pays latency for every
/// message it posts and moves its sent plus received bytes through its
/// node link; the slowest rank sets the time.
inline double predict_comm_time(const CutPlan& plan, ExchangeMode mode, const MachineProfile& m, int nranks) {
  double worst = 0.0;
  for (int r = 0; r < nranks; ++r) {
    const auto t = predicted_rank_traffic(plan, mode, r);
    worst = std::max(worst, predict_comm_time(t.sent.messages, t.sent.bytes + t.bytes_received, m));
  }
  return worst;
}

struct RunRecord {
  std::string case_id;
  std::string machine;   // may be empty
  std::string strategy;  // free-form label, e.g. "aggregated/buffered/buffered"
  int ranks = 1;
  int threads = 1;
  int iterations = 1;
  double wall_s = 0.0;
  Counters counters;

  int units() const { return ranks * threads; }
};

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {
      "case",        "machine",  "strategy", "ranks", "threads", "iterations", "wall_s", "msgs",
      "bytes",       "collectives", "write_ops", "activations", "EM", "EH", "Wh_per_iter_all_nodes"};
  return cols;
}

struct ReportRow {
  RunRecord record;
  std::optional<double> em, eh, wh;
};

/// Derives efficiency and energy columns. Resource units are ranks*threads.
/// Records with one thread are message-passing runs; within each
/// (case, machine, iterations) group, EM is relative to the smallest such
/// run and EH compares a hybrid run against the fastest message-passing run
/// at the largest message-passing unit count. `machine_override`, when set,
/// replaces every record's machine.
inline std::vector<ReportRow> derive_report(const std::vector<RunRecord>& records,
                                            const std::optional<std::string>& machine_override = {}) {
  if (records.empty()) throw DomainError("report needs at least one record");
  std::vector<ReportRow> rows;
  for (auto r : records) {
    if (machine_override) r.machine = *machine_override;
    if (!(r.wall_s > 0.0) || r.iterations < 1) throw DomainError("record with non-positive wall time or iterations");
    rows.push_back({r, {}, {}, {}});
  }
  auto key = [](const RunRecord& r) { return std::make_tuple(r.case_id, r.machine, r.iterations); };
  for (auto& row : rows) {
    const auto& r = row.record;
    std::vector<const RunRecord*> mpi;
    for (const auto& o : rows)
      if (key(o.record) == key(r) && o.record.threads == 1) mpi.push_back(&o.record);
    int s = 0, nmax = 0;
    double tm_s = 0.0, tm_n = 0.0;
    if (!mpi.empty()) {
      s = nmax = mpi.front()->units();
      for (const auto* x : mpi) {
        s = std::min(s, x->units());
        nmax = std::max(nmax, x->units());
      }
      tm_s = tm_n = std::numeric_limits<double>::infinity();
      for (const auto* x : mpi) {
        if (x->units() == s) tm_s = std::min(tm_s, x->wall_s);
        if (x->units() == nmax) tm_n = std::min(tm_n, x->wall_s);
      }
    }
    if (r.threads == 1 && s > 0) row.em = efficiency_mpi(tm_s, r.wall_s, s, r.units());
    if (r.threads > 1 && nmax > 0 && r.units() >= nmax) row.eh = efficiency_hybrid(tm_n, r.wall_s, nmax, r.units());
    if (!r.machine.empty()) {
      const auto& m = machine_profile(r.machine);
      const int nodes = (r.units() + m.cores_per_node - 1) / m.cores_per_node;
      row.wh = power_per_iteration(r.wall_s, m.power_per_node_w, nodes, r.iterations);
    }
  }
  return rows;
}

namespace detail {
inline std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}
inline std::vector<std::string> row_cells(const ReportRow& row) {
  const auto& r = row.record;
  return {r.case_id,
          r.machine,
          r.strategy,
          std::to_string(r.ranks),
          std::to_string(r.threads),
          std::to_string(r.iterations),
          fixed(r.wall_s, 6),
          std::to_string(r.counters.messages_sent),
          std::to_string(r.counters.bytes_sent),
          std::to_string(r.counters.collective_calls),
          std::to_string(r.counters.write_ops),
          std::to_string(r.counters.team_activations),
          row.em ? fixed(*row.em, 4) : "",
          row.eh ? fixed(*row.eh, 4) : "",
          row.wh ? fixed(*row.wh, 3) : ""};
}
inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}
}  // namespace detail

inline std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream os;
  const auto& cols = report_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) os << (k ? "," : "") << cols[k];
  os << '\n';
  for (const auto& row : rows) {
    const auto cells = detail::row_cells(row);
    for (std::size_t k = 0; k < cells.size(); ++k) os << (k ? "," : "") << cells[k];
    os << '\n';
  }
  return os.str();
}

inline std::string report_table(const std::vector<ReportRow>& rows) {
  const auto& cols = report_columns();
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : rows) cells.push_back(detail::row_cells(row));
  std::vector<std::size_t> width(cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) {
    width[k] = cols[k].size();
    for (const auto& c : cells) width[k] = std::max(width[k], c[k].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& v) {
    for (std::size_t k = 0; k < v.size(); ++k) os << (k ? "  " : "") << std::setw(int(width[k])) << v[k];
    os << '\n';
  };
  line(cols);
  for (const auto& c : cells) line(c);
  return os.str();
}

/// CSV plus aligned text table.
struct Report {
  std::string csv;
  std::string table;
};

inline Report emit_report(const std::vector<RunRecord>& records,
                          const std::optional<std::string>& machine_override = {}) {
  const auto rows = derive_report(records, machine_override);
  return {report_csv(rows), report_table(rows)};
}

/// Parses CSV produced by report_csv (derived columns are recomputed later).
inline std::vector<RunRecord> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(1, "empty record file");
  const auto header = detail::split_csv(line);
  if (header != report_columns()) throw ConfigError(1, "unexpected record header");
  std::vector<RunRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto c = detail::split_csv(line);
    if (c.size() != header.size()) throw ConfigError(line_no, "wrong number of columns");
    try {
      RunRecord r;
      r.case_id = c[0];
      r.machine = c[1];
      r.strategy = c[2];
      r.ranks = std::stoi(c[3]);
      r.threads = std::stoi(c[4]);
      r.iterations = std::stoi(c[5]);
      r.wall_s = std::stod(c[6]);
      r.counters.messages_sent = std::stoull(c[7]);
      r.counters.bytes_sent = std::stoull(c[8]);
      r.counters.collective_calls = std::stoull(c[9]);
      r.counters.write_ops = std::stoull(c[10]);
      r.counters.team_activations = std::stoull(c[11]);
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw ConfigError(line_no, "malformed record");
    }
  }
  return out;
}

inline std::vector<RunRecord> load_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open record file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_records_csv(ss.str());
}

}  // namespace hbp
