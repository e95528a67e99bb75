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

#include <random>

#include "hbproxy/reduce.hpp"

namespace hbp {
namespace {

ForceCoefficients random_forces(int nplanes, int nbody, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  ForceCoefficients f(nplanes, nbody);
  for (auto* v : {&f.cl, &f.cd, &f.cm})
    for (auto& x : *v) x = U(rng) * std::pow(2.0, static_cast<int>(rng() % 40) - 20);
  return f;
}

TEST(ReduceForces, CollectiveCounts) {
  std::mt19937_64 rng(1);
  const auto input = random_forces(7, 2, rng);  // nharms = 3
  for (auto mode : {ReduceMode::per_item, ReduceMode::buffered}) {
    const auto res = spawn_ranks(2, [&](RankContext& ctx) {
      reduce_forces(input, {mode, 3}, ctx);
      return ctx.counters().collective_calls;
    });
    const std::uint64_t want = mode == ReduceMode::per_item ? 14 : 1;
    EXPECT_EQ(res.results, (std::vector<std::uint64_t>{want, want}));
    EXPECT_EQ(predicted_collectives(input, mode), want);
  }
  EXPECT_EQ(pack_forces(input).size(), 42u);
}

TEST(ReduceForces, SingleRankIsIdentity) {
  std::mt19937_64 rng(2);
  const auto input = random_forces(5, 3, rng);
  for (auto mode : {ReduceMode::per_item, ReduceMode::buffered}) {
    const auto res = spawn_ranks(1, [&](RankContext& ctx) { return reduce_forces(input, {mode, 3}, ctx); });
    EXPECT_TRUE(res.results[0].bitwise_equal(input));
  }
}

TEST(ReduceForces, StrategiesMatchSerialFold) {
  std::mt19937_64 rng(3);
  for (int nranks : {2, 4, 5}) {
    std::vector<ForceCoefficients> partial;
    for (int r = 0; r < nranks; ++r) partial.push_back(random_forces(9, 2, rng));
    ForceCoefficients fold = partial[0];
    for (int r = 1; r < nranks; ++r)
      for (std::size_t k = 0; k < fold.cl.size(); ++k) {
        fold.cl[k] += partial[r].cl[k];
        fold.cd[k] += partial[r].cd[k];
        fold.cm[k] += partial[r].cm[k];
      }
    for (auto mode : {ReduceMode::per_item, ReduceMode::buffered}) {
      WorldOptions opts;
      opts.jitter_seed = 17;
      const auto res = spawn_ranks(
          nranks, [&](RankContext& ctx) { return reduce_forces(partial[ctx.rank()], {mode, 3}, ctx); }, opts);
      for (const auto& f : res.results) EXPECT_TRUE(f.bitwise_equal(fold));
    }
  }
}

TEST(ReduceForces, TwoComponentReductionZeroesMoment) {
  std::mt19937_64 rng(4);
  const auto input = random_forces(3, 2, rng);
  std::vector<ForceCoefficients> out;
  for (auto mode : {ReduceMode::per_item, ReduceMode::buffered}) {
    auto res = spawn_ranks(2, [&](RankContext& ctx) { return reduce_forces(input, {mode, 2}, ctx); });
    for (double v : res.results[0].cm) EXPECT_EQ(v, 0.0);
    out.push_back(res.results[0]);
  }
  EXPECT_TRUE(out[0].bitwise_equal(out[1]));
}

TEST(ReduceForces, RejectsBadInput) {
  ForceCoefficients f(3, 1);
  f.cd.pop_back();
  EXPECT_THROW(spawn_ranks(1, [&](RankContext& ctx) { reduce_forces(f, {}, ctx); }), RankError);
  EXPECT_THROW(spawn_ranks(1, [&](RankContext& ctx) { reduce_forces(ForceCoefficients(3, 1), {ReduceMode::buffered, 4}, ctx); }),
               RankError);
}

TEST(PackForces, LayoutAndRoundTrip) {
  std::mt19937_64 rng(5);
  const auto f = random_forces(3, 2, rng);
  const auto buf = pack_forces(f);
  // k outer, body inner, (cl, cd, cm) per slot.
  EXPECT_EQ(buf[0], f.cl[f.at(0, 0)]);
  EXPECT_EQ(buf[4], f.cd[f.at(0, 1)]);
  EXPECT_EQ(buf[8], f.cm[f.at(1, 0)]);
  ForceCoefficients g(3, 2);
  unpack_forces(buf, g);
  EXPECT_TRUE(g.bitwise_equal(f));
  std::vector<double> with_zero = buf;
  for (std::size_t k = 0; k < buf.size(); ++k) with_zero[k] = buf[k] + 0.0;
  unpack_forces(with_zero, g);
  EXPECT_TRUE(g.bitwise_equal(f));
}

}  // namespace
}  // namespace hbp
