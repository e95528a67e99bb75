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

// Runs a case end to end: partition, per-rank solver with its thread team,
// iterations with force reductions, optional restart/flowtec output.

#include <chrono>
#include <filesystem>
#include <optional>
#include <vector>

#include "hbproxy/config.hpp"
#include "hbproxy/exchange.hpp"
#include "hbproxy/mesh.hpp"
#include "hbproxy/outio.hpp"
#include "hbproxy/reduce.hpp"
#include "hbproxy/runtime.hpp"
#include "hbproxy/solver.hpp"
#include "hbproxy/team.hpp"

namespace hbp {

struct RunOptions {
  int ranks = 1;
  TeamConfig team;
  ExchangeStrategy exchange;
  ForceReduceStrategy reduce;
  WriteMode io = WriteMode::buffered;
  std::optional<int> iterations;  // defaults to the case value
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> jitter_seed;
};

struct RunResult {
  std::vector<BlockArray> fields;  // indexed by block id
  ForceCoefficients forces;        // global, after the last iteration
  bool forces_agree = true;        // every rank ended with identical forces
  std::vector<Counters> setup;     // per rank: init + first exchange
  std::vector<Counters> iterate;   // per rank: the iteration loop
  std::vector<Counters> output;    // per rank: file writing
  std::uint64_t undelivered = 0;
  double wall_s = 0.0;

  Counters total(const std::vector<Counters>& per_rank) const {
    Counters c;
    for (const auto& x : per_rank) c += x;
    return c;
  }
};

inline RunResult run_case(const Topology& topo, const CaseParams& params, const RunOptions& opt) {
  const auto part = partition_blocks(topo, opt.ranks);
  const auto plan = build_cut_plan(topo, part, params.nharms, params.npde);
  const int iterations = opt.iterations.value_or(params.iterations);
  RKScheme scheme;
  scheme.dtau = params.dtau;

  std::optional<FileLayout> restart, flowtec;
  std::vector<WriteAssignment> restart_plan, flowtec_plan;
  if (opt.out_dir) {
    restart = compute_layout(topo, params.nharms, params.npde, FileKind::restart);
    flowtec = compute_layout(topo, params.nharms, params.npde, FileKind::flowtec);
    restart_plan = make_write_plan(*restart, part, opt.team);
    flowtec_plan = make_write_plan(*flowtec, part, opt.team);
    validate_write_plan(restart_plan, *restart);
    validate_write_plan(flowtec_plan, *flowtec);
    prepare_files(*restart, *opt.out_dir);
    prepare_files(*flowtec, *opt.out_dir);
  }

  struct RankOut {
    std::vector<BlockArray> blocks;
    ForceCoefficients forces;
    Counters setup, iterate, output;
  };

  auto program = [&](RankContext& ctx) {
    RankOut out;
    RankSolver solver(topo, part, params, ctx.rank(), opt.team);
    Team team(opt.team.threads, &ctx);
    solver.first_touch_init(team);

    HaloExchanger exchanger(plan, ctx.rank());
    if (opt.exchange.thread_mode == ThreadMode::tagged_threads)
      team.activate([&](int tid) { exchanger.exchange_team(solver.field(), ctx, opt.exchange.mode, 0, team, tid); });
    else
      exchanger.exchange(solver.field(), ctx, opt.exchange.mode, 0);
    out.setup = ctx.counters();

    StageRunner runner(team, opt.team.activation);
    out.forces = ForceCoefficients(params.nplanes(), topo.nbody);
    std::uint64_t seq = 1;
    for (int it = 0; it < iterations; ++it) {
      seq = rk_iteration(solver, scheme, exchanger, opt.exchange, runner, ctx, seq);
      out.forces = reduce_forces(compute_forces(solver.field(), topo), opt.reduce, ctx);
    }
    const auto after_iterations = ctx.counters();
    out.iterate = after_iterations - out.setup;

    if (opt.out_dir) {
      write_output(solver.field(), topo, *restart, opt.io, restart_plan, *opt.out_dir, team, ctx);
      write_output(solver.field(), topo, *flowtec, opt.io, flowtec_plan, *opt.out_dir, team, ctx);
    }
    out.output = ctx.counters() - after_iterations;
    out.blocks = std::move(solver.field().blocks());
    return out;
  };

  WorldOptions wopts;
  wopts.jitter_seed = opt.jitter_seed;
  const auto t0 = std::chrono::steady_clock::now();
  auto spawned = spawn_ranks(opt.ranks, program, wopts);
  const auto t1 = std::chrono::steady_clock::now();

  RunResult res;
  res.wall_s = std::chrono::duration<double>(t1 - t0).count();
  res.undelivered = spawned.undelivered;
  res.fields.resize(topo.blocks.size());
  for (auto& r : spawned.results) {
    for (auto& b : r.blocks) {
      const int id = b.block();
      res.fields[id] = std::move(b);
    }
    res.setup.push_back(r.setup);
    res.iterate.push_back(r.iterate);
    res.output.push_back(r.output);
  }
  res.forces = spawned.results.front().forces;
  for (const auto& r : spawned.results) res.forces_agree &= r.forces.bitwise_equal(res.forces);
  return res;
}

}  // namespace hbp
