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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "hbproxy/config.hpp"
#include "hbproxy/mesh.hpp"
#include "test_support.hpp"

namespace hbp {
namespace {

const char* kTwoBlocks = R"(
[case]
nharms = 1
nbody = 1

[block 0]
ni = 4
nj = 4
h = 0.5
body = south 0

[block 1]
ni = 4
nj = 4
origin = 2.0 0.0
h = 0.5

[cut 0]
a = 0 east 1 4
b = 1 west 1 4
)";

Topology uniform_blocks(const std::vector<std::pair<int, int>>& dims) {
  Topology t;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    BlockSpec b;
    b.id = static_cast<int>(k);
    b.ni = dims[k].first;
    b.nj = dims[k].second;
    t.blocks.push_back(b);
  }
  return t;
}

TEST(CaseConfig, SmallestTwoBlockCase) {
  const auto topo = build_topology(parse_case(kTwoBlocks));
  EXPECT_EQ(topo.nblocks(), 2);
  EXPECT_EQ(topo.total_cells(), 32);
  ASSERT_EQ(topo.cuts.size(), 1u);
  EXPECT_EQ(topo.cuts[0].length(), 4);
  EXPECT_EQ(topo.blocks[1].x0, 2.0);
  ASSERT_EQ(topo.blocks[0].body_faces.size(), 1u);
  EXPECT_EQ(topo.blocks[0].body_faces[0], (BodyFace{Face::south, 0}));
}

TEST(CaseConfig, Tc1MiniCellCount) {
  // 32768 from a script summing ni*nj over the case file's block sections.
  const auto topo = build_topology(testing::load("tc1-mini"));
  EXPECT_EQ(topo.nblocks(), 32);
  EXPECT_EQ(topo.total_cells(), 32768);
  EXPECT_EQ(topo.nbody, 2);
}

TEST(CaseConfig, DeterministicForIdenticalBytes) {
  const auto a = build_topology(parse_case(kTwoBlocks));
  const auto b = build_topology(parse_case(kTwoBlocks));
  EXPECT_EQ(a.total_cells(), b.total_cells());
  EXPECT_EQ(a.cuts[0].b.range, b.cuts[0].b.range);
}

TEST(CaseConfig, DanglingCutReferenceNamesTheCut) {
  std::string text = "[case]\n";
  for (int b = 0; b < 4; ++b) text += "[block " + std::to_string(b) + "]\nni = 4\nnj = 4\nh = 1\n";
  text += "[cut 0]\na = 0 east 1 4\nb = 99 west 1 4\n";
  try {
    build_topology(parse_case(text));
    FAIL() << "expected TopologyError";
  } catch (const TopologyError& e) {
    EXPECT_NE(std::string(e.what()).find("cut 0"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("99"), std::string::npos);
  }
}

TEST(CaseConfig, ErrorsNameTheLine) {
  try {
    parse_case("[case]\nnharms = 1\nbogus = 3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    parse_case("[case]\nnharms = x1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_case("[block 0]\nni = 4\nnj 4\n"), ConfigError);
  EXPECT_THROW(parse_case("[blok 0]\n"), ConfigError);
  EXPECT_THROW(parse_case("ni = 4\n"), ConfigError);
  EXPECT_THROW(parse_case("[block 0]\nni = 4\nnj = 4\n"), ConfigError);  // h missing
  EXPECT_THROW(parse_case("[case]\nnpde = 5\n"), ConfigError);
  EXPECT_THROW(parse_case("[block 0]\nni=4\nnj=4\nh=1\n[block 0]\n"), ConfigError);
}

TEST(Topology, InvariantViolations) {
  auto t = build_topology(parse_case(kTwoBlocks));
  auto bad = t;
  bad.cuts[0].b.range = {1, 3};
  EXPECT_THROW(validate(bad), TopologyError);  // unequal lengths
  bad = t;
  bad.cuts[0].a.range = {2, 5};
  bad.cuts[0].b.range = {2, 5};
  EXPECT_THROW(validate(bad), TopologyError);  // outside the face
  bad = t;
  bad.cuts.push_back(bad.cuts[0]);
  bad.cuts[1].id = 1;
  EXPECT_THROW(validate(bad), TopologyError);  // element in two cuts
  bad = t;
  bad.blocks[0].body_faces[0].body = 3;
  EXPECT_THROW(validate(bad), TopologyError);
  bad = t;
  bad.blocks[1].ni = 1;
  EXPECT_THROW(validate(bad), TopologyError);
}

TEST(Partition, EqualBlocksRoundRobin) {
  const auto p = partition_blocks(uniform_blocks({{4, 4}, {4, 4}, {4, 4}, {4, 4}}), 2);
  EXPECT_EQ(p.rank_of_block, (std::vector<int>{0, 1, 0, 1}));
}

// Exhaustive search over every assignment of blocks to ranks.
std::int64_t best_makespan(const std::vector<std::int64_t>& cells, int nranks) {
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  std::vector<int> a(cells.size(), 0);
  for (;;) {
    std::vector<std::int64_t> load(nranks, 0);
    for (std::size_t k = 0; k < cells.size(); ++k) load[a[k]] += cells[k];
    best = std::min(best, *std::max_element(load.begin(), load.end()));
    std::size_t k = 0;
    while (k < a.size() && ++a[k] == nranks) a[k++] = 0;
    if (k == a.size()) break;
  }
  return best;
}

TEST(Partition, UnequalBlocksAreLoadOptimal) {
  const auto topo = uniform_blocks({{4, 2}, {2, 2}, {2, 2}});  // 8, 4, 4 cells
  const auto p = partition_blocks(topo, 2);
  EXPECT_EQ(p.rank_of_block, (std::vector<int>{0, 1, 1}));
  EXPECT_EQ(best_makespan({8, 4, 4}, 2), 8);
}

TEST(Partition, CapacityLimit) {
  std::vector<std::pair<int, int>> dims(512, {16, 32});
  const auto topo = uniform_blocks(dims);
  EXPECT_NO_THROW(partition_blocks(topo, 512));
  EXPECT_THROW(partition_blocks(topo, 513), CapacityError);
  EXPECT_THROW(partition_blocks(topo, 0), CapacityError);
}

TEST(Partition, LoadSpreadBoundedByLargestBlock) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int nb = 1 + static_cast<int>(rng() % 20);
    std::vector<std::pair<int, int>> dims;
    for (int k = 0; k < nb; ++k) dims.emplace_back(2 + rng() % 30, 2 + rng() % 30);
    const auto topo = uniform_blocks(dims);
    const int nranks = 1 + static_cast<int>(rng() % nb);
    const auto p = partition_blocks(topo, nranks);
    std::vector<std::int64_t> load(nranks, 0);
    for (int b = 0; b < nb; ++b) {
      ASSERT_GE(p.rank_of_block[b], 0);
      ASSERT_LT(p.rank_of_block[b], nranks);
      load[p.rank_of_block[b]] += topo.blocks[b].cells();
    }
    const auto [mn, mx] = std::minmax_element(load.begin(), load.end());
    EXPECT_LE(*mx - *mn, topo.max_block_cells());
  }
}

TEST(Partition, IndependentOfCutOrder) {
  auto topo = build_topology(testing::load("tc1-mini"));
  const auto before = partition_blocks(topo, 5);
  std::mt19937 rng(3);
  std::shuffle(topo.cuts.begin(), topo.cuts.end(), rng);
  EXPECT_EQ(partition_blocks(topo, 5).rank_of_block, before.rank_of_block);
}

TEST(CutRole, Examples) {
  const auto topo = build_topology(parse_case(kTwoBlocks));
  Partition single{{0, 0}, 1};
  EXPECT_EQ(cut_role(single, topo.cuts[0], 0), CutRole::both_local);
  Partition split{{0, 1}, 3};
  EXPECT_EQ(cut_role(split, topo.cuts[0], 0), CutRole::recv_side);
  EXPECT_EQ(cut_role(split, topo.cuts[0], 1), CutRole::send_side);
  EXPECT_EQ(cut_role(split, topo.cuts[0], 2), CutRole::uninvolved);
}

TEST(CutRole, EveryCutHasOneLocalOwnerOrOneSenderReceiverPair) {
  const auto topo = build_topology(testing::load("tc1-mini"));
  for (int nranks : {1, 3, 7, 16, 32}) {
    const auto p = partition_blocks(topo, nranks);
    for (const auto& c : topo.cuts) {
      int local = 0, recv = 0, send = 0;
      for (int r = 0; r < nranks; ++r) {
        switch (cut_role(p, c, r)) {
          case CutRole::both_local: ++local; break;
          case CutRole::recv_side: ++recv; break;
          case CutRole::send_side: ++send; break;
          case CutRole::uninvolved: break;
        }
      }
      EXPECT_TRUE((local == 1 && recv == 0 && send == 0) || (local == 0 && recv == 1 && send == 1));
    }
  }
}

TEST(Faces, InteriorAndHaloCells) {
  BlockSpec b;
  b.ni = 5;
  b.nj = 3;
  EXPECT_EQ(interior_cell(b, Face::north, 2), (CellIndex{2, 3}));
  EXPECT_EQ(halo_cell(b, Face::north, 2), (CellIndex{2, 4}));
  EXPECT_EQ(interior_cell(b, Face::south, 2), (CellIndex{2, 1}));
  EXPECT_EQ(halo_cell(b, Face::south, 2), (CellIndex{2, 0}));
  EXPECT_EQ(interior_cell(b, Face::east, 3), (CellIndex{5, 3}));
  EXPECT_EQ(halo_cell(b, Face::east, 3), (CellIndex{6, 3}));
  EXPECT_EQ(interior_cell(b, Face::west, 1), (CellIndex{1, 1}));
  EXPECT_EQ(halo_cell(b, Face::west, 1), (CellIndex{0, 1}));
}

}  // namespace
}  // namespace hbp
