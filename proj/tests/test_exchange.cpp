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

#include <cmath>

#include "test_support.hpp"

namespace hbp {
namespace {

constexpr double kUntouched = -7.0;

// Distinct value for every interior sample; halos hold a sentinel.
double tag_value(int block, int i, int j, int p, int n) { return block * 1e6 + j * 1e3 + i + p * 0.1 + n * 0.01; }

void fill_tagged(HarmonicField& f) {
  for (auto& q : f.blocks())
    for (int n = 0; n < q.nplanes(); ++n)
      for (int p = 0; p < q.npde(); ++p)
        for (int j = 0; j <= q.nj() + 1; ++j)
          for (int i = 0; i <= q.ni() + 1; ++i) {
            const bool interior = i >= 1 && i <= q.ni() && j >= 1 && j <= q.nj();
            q(i, j, p, n) = interior ? tag_value(q.block(), i, j, p, n) : kUntouched;
          }
}

struct ExchangeRun {
  std::vector<BlockArray> blocks;
  std::vector<Counters> counters;
};

// One exchange per rank of a tagged field, returning every block.
ExchangeRun run_exchange(const Topology& topo, int nranks, int nharms, ExchangeStrategy strategy, int threads = 1,
                         std::optional<std::uint64_t> jitter = {}, std::uint64_t seq = 0) {
  const auto part = partition_blocks(topo, nranks);
  const auto plan = build_cut_plan(topo, part, nharms, kNpde);
  WorldOptions opts;
  opts.jitter_seed = jitter;
  auto res = spawn_ranks(
      nranks,
      [&](RankContext& ctx) {
        HarmonicField f(topo, part.blocks_of(ctx.rank()), 2 * nharms + 1);
        fill_tagged(f);
        HaloExchanger ex(plan, ctx.rank());
        if (strategy.thread_mode == ThreadMode::tagged_threads) {
          Team team(threads, &ctx);
          team.activate([&](int tid) { ex.exchange_team(f, ctx, strategy.mode, seq, team, tid); });
        } else {
          ex.exchange(f, ctx, strategy.mode, seq);
        }
        return std::move(f.blocks());
      },
      opts);
  ExchangeRun out;
  out.blocks.resize(topo.blocks.size());
  for (auto& r : res.results)
    for (auto& b : r) {
      const int id = b.block();
      out.blocks[id] = std::move(b);
    }
  out.counters = res.counters;
  return out;
}

// Oracle: halos on cut faces hold the paired interior value, everything
// else keeps its initial content.
void expect_exchanged(const Topology& topo, const std::vector<BlockArray>& blocks, int nplanes) {
  std::vector<BlockArray> expect;
  for (const auto& b : topo.blocks) {
    BlockArray q(b.id, b.ni, b.nj, kNpde, nplanes);
    expect.push_back(q);
  }
  for (auto& q : expect)
    for (int n = 0; n < nplanes; ++n)
      for (int p = 0; p < kNpde; ++p)
        for (int j = 0; j <= q.nj() + 1; ++j)
          for (int i = 0; i <= q.ni() + 1; ++i) {
            const bool interior = i >= 1 && i <= q.ni() && j >= 1 && j <= q.nj();
            q(i, j, p, n) = interior ? tag_value(q.block(), i, j, p, n) : kUntouched;
          }
  for (const auto& c : topo.cuts) {
    const auto& A = topo.blocks[c.a.block];
    const auto& B = topo.blocks[c.b.block];
    for (int e = 0; e < c.length(); ++e) {
      const auto ha = halo_cell(A, c.a.face, c.a_index(e));
      const auto ia = interior_cell(A, c.a.face, c.a_index(e));
      const auto hb = halo_cell(B, c.b.face, c.b_index(e));
      const auto ib = interior_cell(B, c.b.face, c.b_index(e));
      for (int n = 0; n < nplanes; ++n)
        for (int p = 0; p < kNpde; ++p) {
          expect[A.id](ha.i, ha.j, p, n) = tag_value(B.id, ib.i, ib.j, p, n);
          expect[B.id](hb.i, hb.j, p, n) = tag_value(A.id, ia.i, ia.j, p, n);
        }
    }
  }
  ASSERT_EQ(blocks.size(), expect.size());
  for (std::size_t k = 0; k < blocks.size(); ++k) EXPECT_TRUE(blocks[k].bitwise_equal(expect[k])) << "block " << k;
}

const std::vector<ExchangeStrategy> kStrategies = {
    {ExchangeMode::per_element, ThreadMode::serial},
    {ExchangeMode::aggregated, ThreadMode::serial},
    {ExchangeMode::per_element, ThreadMode::tagged_threads},
    {ExchangeMode::aggregated, ThreadMode::tagged_threads},
};

TEST(CutPlan, DatasizeAndBufferLength) {
  const auto topo = build_topology(testing::load("tc-tiny"));
  const auto part = partition_blocks(topo, 2);
  const auto plan = build_cut_plan(topo, part, 1, 4);
  EXPECT_EQ(plan.datasize, 12u);
  ASSERT_EQ(plan.transfers.size(), 2u);
  EXPECT_EQ(plan.buffer_length(plan.transfers[0]), 48u);
  EXPECT_EQ(plan.displacement(3), 36u);
  EXPECT_EQ(build_cut_plan(topo, part, 0, 4).datasize, 4u);
}

Topology reversed_pair(int L) {
  Topology t;
  for (int b = 0; b < 2; ++b) {
    BlockSpec s;
    s.id = b;
    s.ni = L;
    s.nj = 3;
    t.blocks.push_back(s);
  }
  CutSpec c;
  c.a = {0, Face::north, {1, L}};
  c.b = {1, Face::north, {1, L}};
  c.orientation = Orientation::reversed;
  t.cuts.push_back(c);
  validate(t);
  return t;
}

TEST(CutPlan, ReversedOrientationMapsRangeBackwards) {
  const int L = 5;
  const auto topo = reversed_pair(L);
  const auto plan = build_cut_plan(topo, partition_blocks(topo, 1), 0, 4);
  const auto& t1 = plan.transfers[1];  // block 0 interior -> block 1 halo
  for (int e = 0; e < L; ++e) {
    EXPECT_EQ(t1.elements[e].src, (CellIndex{e + 1, 3}));
    EXPECT_EQ(t1.elements[e].dst, (CellIndex{L - e, 4}));
  }
  for (const auto& s : kStrategies) expect_exchanged(topo, run_exchange(topo, 2, 2, s, 3).blocks, 5);
}

TEST(Exchange, LocalCutUsesNoMessages) {
  const auto topo = build_topology(testing::load("tc-tiny"));
  for (const auto& s : kStrategies) {
    const auto run = run_exchange(topo, 1, 1, s, 2);
    expect_exchanged(topo, run.blocks, 3);
    EXPECT_EQ(run.counters[0].messages_sent, 0u);
  }
}

TEST(Exchange, PredictedTrafficForSmallRemoteCut) {
  const auto topo = build_topology(testing::load("tc-tiny"));
  const auto plan = build_cut_plan(topo, partition_blocks(topo, 2), 1, 4);
  EXPECT_EQ(predicted_message_count(plan, ExchangeMode::per_element), (Traffic{8, 384}));
  EXPECT_EQ(predicted_message_count(plan, ExchangeMode::aggregated), (Traffic{1, 384}));
  const auto local = build_cut_plan(topo, partition_blocks(topo, 1), 1, 4);
  EXPECT_EQ(predicted_message_count(local, ExchangeMode::per_element), (Traffic{0, 0}));
}

TEST(Exchange, LongCutMessageCounts) {
  const auto topo = build_topology(testing::load("tc-remote"));
  const auto plan = build_cut_plan(topo, partition_blocks(topo, 2), 1, 4);
  const auto pe = predicted_message_count(plan, ExchangeMode::per_element);
  const auto ag = predicted_message_count(plan, ExchangeMode::aggregated);
  EXPECT_EQ(pe.messages, 5000u);
  EXPECT_EQ(ag.messages, 1u);
  EXPECT_EQ(pe.bytes, ag.bytes);
  EXPECT_EQ(pe.bytes, 2500u * 12 * 8);
  for (auto mode : {ExchangeMode::per_element, ExchangeMode::aggregated}) {
    const auto run = run_exchange(topo, 2, 1, {mode, ThreadMode::serial});
    const auto want = predicted_message_count(plan, mode);
    for (int r = 0; r < 2; ++r) {
      EXPECT_EQ(run.counters[r].messages_sent, want.messages);
      EXPECT_EQ(run.counters[r].bytes_sent, want.bytes);
    }
  }
}

TEST(Exchange, MeasuredCountersEqualPredictionsOnEveryRank) {
  const auto topo = build_topology(testing::load("tc1-mini"));
  for (int nranks : {1, 3, 4, 16}) {
    const auto plan = build_cut_plan(topo, partition_blocks(topo, nranks), 7, 4);
    for (const auto& s : kStrategies) {
      const auto run = run_exchange(topo, nranks, 7, s, 4);
      std::uint64_t msgs = 0, bytes = 0;
      for (int r = 0; r < nranks; ++r) {
        const auto want = predicted_rank_traffic(plan, s.mode, r);
        EXPECT_EQ(run.counters[r].messages_sent, want.sent.messages);
        EXPECT_EQ(run.counters[r].bytes_sent, want.sent.bytes);
        msgs += run.counters[r].messages_sent;
        bytes += run.counters[r].bytes_sent;
      }
      const auto per_dir = predicted_message_count(plan, s.mode);
      EXPECT_EQ(msgs, 2 * per_dir.messages);
      EXPECT_EQ(bytes, 2 * per_dir.bytes);
    }
  }
}

TEST(Exchange, AllStrategiesProduceTheOracleHalos) {
  const auto topo = build_topology(testing::load("tc1-mini"));
  for (int nranks : {1, 5, 16})
    for (const auto& s : kStrategies)
      for (std::uint64_t seed : {1u, 2u}) {
        const auto run = run_exchange(topo, nranks, 2, s, 4, seed, seed);
        expect_exchanged(topo, run.blocks, 5);
      }
}

TEST(Exchange, ByteConservationAcrossModes) {
  const auto topo = build_topology(testing::load("tc2-mini"));
  for (int nranks : {2, 7}) {
    const auto plan = build_cut_plan(topo, partition_blocks(topo, nranks), 4, 4);
    EXPECT_EQ(predicted_message_count(plan, ExchangeMode::per_element).bytes,
              predicted_message_count(plan, ExchangeMode::aggregated).bytes);
  }
}

}  // namespace
}  // namespace hbp
