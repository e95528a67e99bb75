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

// Case file reader.
//
//   # comment
//   [case]
//   nharms = 7
//   npde = 4
//   iterations = 100
//   dtau = 0.01
//   omega = 1.0
//   nbody = 2
//
//   [block 0]
//   ni = 32
//   nj = 32
//   origin = 0.0 0.0
//   h = 0.1
//   body = south 0        (repeatable)
//
//   [cut 0]
//   a = 0 east 1 32       (block face first last)
//   b = 1 west 1 32
//   orientation = forward (or reversed)

#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hbproxy/error.hpp"
#include "hbproxy/mesh.hpp"

namespace hbp {

struct CaseParams {
  int nharms = 1;
  int npde = 4;
  int iterations = 10;
  double dtau = 0.01;
  double omega = 1.0;
  int nbody = 0;

  int nplanes() const { return 2 * nharms + 1; }
};

struct CaseConfig {
  CaseParams params;
  std::vector<BlockSpec> blocks;
  std::vector<CutSpec> cuts;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto b = s.find_first_not_of(" \t,", pos);
    if (b == std::string_view::npos) break;
    auto e = s.find_first_of(" \t,", b);
    if (e == std::string_view::npos) e = s.size();
    out.push_back(s.substr(b, e - b));
    pos = e;
  }
  return out;
}

template <class T>
T parse_number(std::string_view tok, std::size_t line, std::string_view key) {
  T v{};
  const auto* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (ec != std::errc{} || ptr != end)
    throw ConfigError(line, "invalid value '" + std::string(tok) + "' for '" + std::string(key) + "'");
  return v;
}

inline Face parse_face(std::string_view tok, std::size_t line) {
  if (tok == "north") return Face::north;
  if (tok == "south") return Face::south;
  if (tok == "east") return Face::east;
  if (tok == "west") return Face::west;
  throw ConfigError(line, "unknown face '" + std::string(tok) + "'");
}

inline CutSide parse_side(std::string_view value, std::size_t line, std::string_view key) {
  const auto tok = split_ws(value);
  if (tok.size() != 4) throw ConfigError(line, "'" + std::string(key) + "' expects: block face first last");
  CutSide s;
  s.block = parse_number<int>(tok[0], line, key);
  s.face = parse_face(tok[1], line);
  s.range.first = parse_number<int>(tok[2], line, key);
  s.range.last = parse_number<int>(tok[3], line, key);
  return s;
}

}  // namespace detail

inline CaseConfig parse_case(std::string_view text) {
  using detail::parse_number;
  CaseConfig cfg;
  std::map<int, BlockSpec> blocks;
  std::map<int, CutSpec> cuts;
  std::map<int, std::size_t> block_lines, cut_lines;

  enum class Section { none, case_, block, cut } section = Section::none;
  int current = -1;
  // Required keys seen per block/cut section.
  std::map<int, int> block_required, cut_required;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(line_no, "unterminated section header");
      const auto tok = detail::split_ws(line.substr(1, line.size() - 2));
      if (tok.size() == 1 && tok[0] == "case") {
        section = Section::case_;
      } else if (tok.size() == 2 && (tok[0] == "block" || tok[0] == "cut")) {
        current = parse_number<int>(tok[1], line_no, tok[0]);
        if (current < 0) throw ConfigError(line_no, "negative section id");
        if (tok[0] == "block") {
          section = Section::block;
          if (!blocks.emplace(current, BlockSpec{}).second)
            throw ConfigError(line_no, "duplicate block " + std::to_string(current));
          blocks[current].id = current;
          block_lines[current] = line_no;
        } else {
          section = Section::cut;
          if (!cuts.emplace(current, CutSpec{}).second)
            throw ConfigError(line_no, "duplicate cut " + std::to_string(current));
          cuts[current].id = current;
          cut_lines[current] = line_no;
        }
      } else {
        throw ConfigError(line_no, "unknown section '" + std::string(line) + "'");
      }
      if (nl == text.size()) break;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(line_no, "expected 'key = value'");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ConfigError(line_no, "expected 'key = value'");

    switch (section) {
      case Section::none:
        throw ConfigError(line_no, "key '" + std::string(key) + "' outside any section");
      case Section::case_: {
        auto& p = cfg.params;
        if (key == "nharms") p.nharms = parse_number<int>(value, line_no, key);
        else if (key == "npde") p.npde = parse_number<int>(value, line_no, key);
        else if (key == "iterations") p.iterations = parse_number<int>(value, line_no, key);
        else if (key == "dtau") p.dtau = parse_number<double>(value, line_no, key);
        else if (key == "omega") p.omega = parse_number<double>(value, line_no, key);
        else if (key == "nbody") p.nbody = parse_number<int>(value, line_no, key);
        else throw ConfigError(line_no, "unknown key '" + std::string(key) + "' in [case]");
        break;
      }
      case Section::block: {
        auto& b = blocks[current];
        if (key == "ni") { b.ni = parse_number<int>(value, line_no, key); block_required[current] |= 1; }
        else if (key == "nj") { b.nj = parse_number<int>(value, line_no, key); block_required[current] |= 2; }
        else if (key == "h") { b.h = parse_number<double>(value, line_no, key); block_required[current] |= 4; }
        else if (key == "origin") {
          const auto tok = detail::split_ws(value);
          if (tok.size() != 2) throw ConfigError(line_no, "'origin' expects two numbers");
          b.x0 = parse_number<double>(tok[0], line_no, key);
          b.y0 = parse_number<double>(tok[1], line_no, key);
        } else if (key == "body") {
          const auto tok = detail::split_ws(value);
          if (tok.size() != 2) throw ConfigError(line_no, "'body' expects: face body-id");
          b.body_faces.push_back({detail::parse_face(tok[0], line_no), parse_number<int>(tok[1], line_no, key)});
        } else {
          throw ConfigError(line_no, "unknown key '" + std::string(key) + "' in [block]");
        }
        break;
      }
      case Section::cut: {
        auto& c = cuts[current];
        if (key == "a") { c.a = detail::parse_side(value, line_no, key); cut_required[current] |= 1; }
        else if (key == "b") { c.b = detail::parse_side(value, line_no, key); cut_required[current] |= 2; }
        else if (key == "orientation") {
          if (value == "forward") c.orientation = Orientation::forward;
          else if (value == "reversed") c.orientation = Orientation::reversed;
          else throw ConfigError(line_no, "orientation must be 'forward' or 'reversed'");
        } else {
          throw ConfigError(line_no, "unknown key '" + std::string(key) + "' in [cut]");
        }
        break;
      }
    }
    if (nl == text.size()) break;
  }

  for (auto& [id, b] : blocks) {
    if (block_required[id] != 7)
      throw ConfigError(block_lines[id], "block " + std::to_string(id) + " needs ni, nj and h");
    cfg.blocks.push_back(std::move(b));
  }
  for (auto& [id, c] : cuts) {
    if (cut_required[id] != 3) throw ConfigError(cut_lines[id], "cut " + std::to_string(id) + " needs a and b");
    cfg.cuts.push_back(c);
  }
  if (cfg.params.nharms < 0) throw ConfigError(0, "nharms must be >= 0");
  if (cfg.params.npde != 4) throw ConfigError(0, "npde must be 4");
  if (cfg.params.iterations < 0) throw ConfigError(0, "iterations must be >= 0");
  if (!(cfg.params.omega > 0.0)) throw ConfigError(0, "omega must be positive");
  if (!(cfg.params.dtau >= 0.0)) throw ConfigError(0, "dtau must be non-negative");
  if (cfg.params.nbody < 0) throw ConfigError(0, "nbody must be >= 0");
  return cfg;
}

inline CaseConfig load_case(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(0, "cannot open case file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

/// Builds and validates the topology described by a parsed case.
inline Topology build_topology(const CaseConfig& cfg) {
  Topology t;
  t.blocks = cfg.blocks;  // sorted by id by the reader
  t.cuts = cfg.cuts;
  t.nbody = cfg.params.nbody;
  if (t.blocks.empty()) throw TopologyError("case defines no blocks");
  validate(t);
  return t;
}

}  // namespace hbp
