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

// Multi-block structured grid: blocks, cuts (face-to-face halo pairings),
// body attachments, and the block-to-rank partition.
//
// Index conventions: a block has interior cells i = 1..ni, j = 1..nj and a
// one-cell halo ring at i = 0, ni+1 and j = 0, nj+1. A face index runs along
// the face: i for north/south faces, j for east/west faces, 1-based.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "hbproxy/error.hpp"

namespace hbp {

enum class Face { north, south, east, west };

inline std::string_view to_string(Face f) {
  switch (f) {
    case Face::north: return "north";
    case Face::south: return "south";
    case Face::east: return "east";
    case Face::west: return "west";
  }
  return "?";
}

/// Closed 1-based index range along a face.
struct IndexRange {
  int first = 1;
  int last = 1;
  int length() const { return last - first + 1; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct BodyFace {
  Face face;
  int body;
  friend bool operator==(const BodyFace&, const BodyFace&) = default;
};

struct BlockSpec {
  int id = 0;
  int ni = 0;
  int nj = 0;
  double x0 = 0.0;
  double y0 = 0.0;
  double h = 1.0;
  std::vector<BodyFace> body_faces;

  std::int64_t cells() const { return std::int64_t{ni} * nj; }
  int face_extent(Face f) const { return (f == Face::north || f == Face::south) ? ni : nj; }
  /// Cell-centre coordinates of interior (or halo) index i / j.
  double x(int i) const { return x0 + (i - 0.5) * h; }
  double y(int j) const { return y0 + (j - 0.5) * h; }
};

struct CutSide {
  int block = 0;
  Face face = Face::east;
  IndexRange range;
};

enum class Orientation { forward, reversed };

struct CutSpec {
  int id = 0;
  CutSide a;
  CutSide b;
  Orientation orientation = Orientation::forward;

  int length() const { return a.range.length(); }
  /// Face index on side b paired with element e (0-based) of side a.
  int b_index(int e) const {
    return orientation == Orientation::forward ? b.range.first + e : b.range.last - e;
  }
  int a_index(int e) const { return a.range.first + e; }
};

/// Interior cell adjacent to a face and the halo cell just outside it.
struct CellIndex {
  int i;
  int j;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

inline CellIndex interior_cell(const BlockSpec& b, Face f, int k) {
  switch (f) {
    case Face::north: return {k, b.nj};
    case Face::south: return {k, 1};
    case Face::east: return {b.ni, k};
    case Face::west: return {1, k};
  }
  return {0, 0};
}

inline CellIndex halo_cell(const BlockSpec& b, Face f, int k) {
  switch (f) {
    case Face::north: return {k, b.nj + 1};
    case Face::south: return {k, 0};
    case Face::east: return {b.ni + 1, k};
    case Face::west: return {0, k};
  }
  return {0, 0};
}

struct Topology {
  std::vector<BlockSpec> blocks;
  std::vector<CutSpec> cuts;
  int nbody = 0;

  int nblocks() const { return static_cast<int>(blocks.size()); }
  std::int64_t total_cells() const {
    std::int64_t n = 0;
    for (const auto& b : blocks) n += b.cells();
    return n;
  }
  std::int64_t max_block_cells() const {
    std::int64_t m = 0;
    for (const auto& b : blocks) m = std::max(m, b.cells());
    return m;
  }
};

/// Checks every Topology invariant; throws TopologyError naming the offender.
inline void validate(const Topology& topo) {
  for (std::size_t k = 0; k < topo.blocks.size(); ++k) {
    const auto& b = topo.blocks[k];
    if (b.id != static_cast<int>(k))
      throw TopologyError("block ids must be contiguous from 0; found block " + std::to_string(b.id) +
                          " at position " + std::to_string(k));
    if (b.ni < 2 || b.nj < 2) throw TopologyError("block " + std::to_string(b.id) + ": ni and nj must be >= 2");
    if (!(b.h > 0.0)) throw TopologyError("block " + std::to_string(b.id) + ": h must be positive");
    for (const auto& bf : b.body_faces)
      if (bf.body < 0 || bf.body >= topo.nbody)
        throw TopologyError("block " + std::to_string(b.id) + ": body id " + std::to_string(bf.body) +
                            " outside 0.." + std::to_string(topo.nbody - 1));
  }

  std::set<std::tuple<int, int, int>> used;  // (block, face, index)
  for (const auto& b : topo.blocks)
    for (const auto& bf : b.body_faces)
      for (int k = 1; k <= b.face_extent(bf.face); ++k) used.emplace(b.id, static_cast<int>(bf.face), k);

  for (std::size_t k = 0; k < topo.cuts.size(); ++k) {
    const auto& c = topo.cuts[k];
    const std::string name = "cut " + std::to_string(c.id);
    if (c.id != static_cast<int>(k)) throw TopologyError(name + ": cut ids must be contiguous from 0");
    for (const CutSide* s : {&c.a, &c.b}) {
      if (s->block < 0 || s->block >= topo.nblocks())
        throw TopologyError(name + " references unknown block " + std::to_string(s->block));
      const auto& blk = topo.blocks[s->block];
      if (s->range.first < 1 || s->range.last > blk.face_extent(s->face) || s->range.length() < 1)
        throw TopologyError(name + ": index range outside the " + std::string(to_string(s->face)) +
                            " face of block " + std::to_string(s->block));
    }
    if (c.a.range.length() != c.b.range.length()) throw TopologyError(name + ": side lengths differ");
    for (const CutSide* s : {&c.a, &c.b})
      for (int idx = s->range.first; idx <= s->range.last; ++idx)
        if (!used.emplace(s->block, static_cast<int>(s->face), idx).second)
          throw TopologyError(name + ": boundary element (block " + std::to_string(s->block) + ", " +
                              std::string(to_string(s->face)) + ", " + std::to_string(idx) +
                              ") already belongs to another cut or body");
  }
}

/// Block-to-rank assignment.
struct Partition {
  std::vector<int> rank_of_block;
  int nranks = 1;

  std::vector<int> blocks_of(int rank) const {
    std::vector<int> out;
    for (std::size_t b = 0; b < rank_of_block.size(); ++b)
      if (rank_of_block[b] == rank) out.push_back(static_cast<int>(b));
    return out;
  }
};

/// Greedy longest-processing-time assignment: blocks by descending cell
/// count (ties: ascending id), each to the least-loaded rank (ties: lowest rank).
inline Partition partition_blocks(const Topology& topo, int nranks) {
  if (nranks < 1) throw CapacityError("nranks must be >= 1");
  if (nranks > topo.nblocks())
    throw CapacityError("cannot use " + std::to_string(nranks) + " ranks with only " +
                        std::to_string(topo.nblocks()) + " blocks");
  std::vector<int> order(topo.blocks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int l, int r) { return topo.blocks[l].cells() > topo.blocks[r].cells(); });

  Partition p;
  p.nranks = nranks;
  p.rank_of_block.assign(topo.blocks.size(), 0);
  std::vector<std::int64_t> load(nranks, 0);
  for (int b : order) {
    const auto r = static_cast<int>(std::min_element(load.begin(), load.end()) - load.begin());
    p.rank_of_block[b] = r;
    load[r] += topo.blocks[b].cells();
  }
  return p;
}

enum class CutRole { both_local, recv_side, send_side, uninvolved };

/// Role of `rank` for a cut: side a is the receiving side of the listing's
/// "myblock1", side b the sending "myblock2".
inline CutRole cut_role(const Partition& part, const CutSpec& cut, int rank) {
  const bool owns_a = part.rank_of_block.at(cut.a.block) == rank;
  const bool owns_b = part.rank_of_block.at(cut.b.block) == rank;
  if (owns_a && owns_b) return CutRole::both_local;
  if (owns_a) return CutRole::recv_side;
  if (owns_b) return CutRole::send_side;
  return CutRole::uninvolved;
}

}  // namespace hbp
