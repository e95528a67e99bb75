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

// Thread tier inside a rank: contiguous work partitioning, a persistent
// thread team with counted activations, and the work plan shared by
// first-touch initialisation and computation.
//
// Loop inventory contract: the solver runs exactly three thread-parallel
// nests per Runge-Kutta stage (residual, update, halo exchange). In
// per-loop activation mode each nest is one team activation, so an
// iteration costs 12 activations; in hoisted mode one activation covers
// the whole iteration.

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "hbproxy/error.hpp"
#include "hbproxy/runtime.hpp"

namespace hbp {

/// Half-open range [begin, end).
struct Range {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool contains(int v) const { return v >= begin && v < end; }
  friend bool operator==(const Range&, const Range&) = default;
};

/// Splits [0, extent) into `nthreads` contiguous ranges whose sizes differ by
/// at most one; lower thread ids get the larger sizes. Empty ranges are legal.
inline std::vector<Range> partition_work(int extent, int nthreads) {
  if (nthreads < 1) throw PlanError("partition_work: nthreads must be >= 1");
  if (extent < 0) throw PlanError("partition_work: negative extent");
  std::vector<Range> out(nthreads);
  const int base = extent / nthreads;
  const int extra = extent % nthreads;
  int at = 0;
  for (int t = 0; t < nthreads; ++t) {
    const int n = base + (t < extra ? 1 : 0);
    out[t] = {at, at + n};
    at += n;
  }
  return out;
}

enum class Axis { harmonics, gridpoints, blocks };
enum class Activation { per_loop, hoisted };

struct TeamConfig {
  int threads = 1;
  Axis axis = Axis::harmonics;
  Activation activation = Activation::hoisted;
};

/// One unit of thread-owned work: block `block` (global id), planes
/// [planes.begin, planes.end) and interior rows [rows.begin, rows.end)
/// (1-based j). For initialisation the owner of row 1 also takes the south
/// halo row and the owner of row nj the north halo row.
struct Chunk {
  int block = 0;
  Range planes;
  Range rows;
  int thread = 0;
  friend bool operator==(const Chunk&, const Chunk&) = default;
};

struct WorkPlan {
  int threads = 1;
  std::vector<Chunk> chunks;

  std::vector<Chunk> chunks_of(int tid) const {
    std::vector<Chunk> out;
    for (const auto& c : chunks)
      if (c.thread == tid) out.push_back(c);
    return out;
  }
  friend bool operator==(const WorkPlan&, const WorkPlan&) = default;
};

/// `owned` lists (block id, nj) for the rank's blocks in ascending id order.
inline WorkPlan make_work_plan(const std::vector<std::pair<int, int>>& owned, int nplanes, const TeamConfig& cfg) {
  WorkPlan plan;
  plan.threads = cfg.threads;
  switch (cfg.axis) {
    case Axis::harmonics: {
      const auto parts = partition_work(nplanes, cfg.threads);
      for (int t = 0; t < cfg.threads; ++t)
        for (const auto& [b, nj] : owned)
          if (parts[t].size() > 0) plan.chunks.push_back({b, parts[t], {1, nj + 1}, t});
      break;
    }
    case Axis::gridpoints: {
      for (int t = 0; t < cfg.threads; ++t)
        for (const auto& [b, nj] : owned) {
          const auto r = partition_work(nj, cfg.threads)[t];
          if (r.size() > 0) plan.chunks.push_back({b, {0, nplanes}, {r.begin + 1, r.end + 1}, t});
        }
      break;
    }
    case Axis::blocks: {
      const auto parts = partition_work(static_cast<int>(owned.size()), cfg.threads);
      for (int t = 0; t < cfg.threads; ++t)
        for (int k = parts[t].begin; k < parts[t].end; ++k)
          plan.chunks.push_back({owned[k].first, {0, nplanes}, {1, owned[k].second + 1}, t});
      break;
    }
  }
  return plan;
}

/// Reusable barrier that can be broken so that waiters bail out instead of
/// hanging when a team member fails.
class TeamBarrier {
 public:
  explicit TeamBarrier(int n) : n_(n) {}

  void arrive_and_wait() {
    std::unique_lock lk(m_);
    if (broken_) throw PlanError("team barrier broken");
    const auto gen = gen_;
    if (++count_ == n_) {
      count_ = 0;
      ++gen_;
      cv_.notify_all();
      return;
    }
    cv_.wait(lk, [&] { return gen_ != gen || broken_; });
    if (gen_ == gen) throw PlanError("team barrier broken");
  }

  void break_barrier() {
    std::lock_guard lk(m_);
    broken_ = true;
    cv_.notify_all();
  }
  void reset() {
    std::lock_guard lk(m_);
    broken_ = false;
    count_ = 0;
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  int n_;
  int count_ = 0;
  std::uint64_t gen_ = 0;
  bool broken_ = false;
};

/// Persistent team of `size` threads; the calling thread acts as thread 0.
class Team {
 public:
  Team(int size, RankContext* ctx = nullptr) : size_(size), ctx_(ctx), barrier_(size) {
    if (size < 1) throw PlanError("team size must be >= 1");
    errors_.resize(size);
    for (int t = 1; t < size; ++t) workers_.emplace_back([this, t] { worker(t); });
  }
  Team(const Team&) = delete;
  Team& operator=(const Team&) = delete;

  ~Team() {
    {
      std::lock_guard lk(m_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  int size() const { return size_; }
  std::uint64_t activations() const { return activations_; }

  /// Runs body(tid) on every team thread and waits for all of them. The
  /// first failure (lowest tid) is rethrown on the caller.
  void activate(const std::function<void(int)>& body) {
    ++activations_;
    if (ctx_) ctx_->add_team_activation();
    std::fill(errors_.begin(), errors_.end(), nullptr);
    barrier_.reset();
    {
      std::lock_guard lk(m_);
      body_ = &body;
      pending_ = size_ - 1;
      ++generation_;
    }
    cv_.notify_all();
    run(0);
    {
      std::unique_lock lk(m_);
      done_cv_.wait(lk, [&] { return pending_ == 0; });
      body_ = nullptr;
    }
    // Prefer the root cause over barrier breakage reported by bystanders.
    for (bool secondary : {false, true})
      for (auto& e : errors_) {
        if (!e) continue;
        bool is_break = false;
        try {
          std::rethrow_exception(e);
        } catch (const PlanError& pe) {
          is_break = std::string(pe.what()) == "team barrier broken";
        } catch (...) {
        }
        if (is_break == secondary) std::rethrow_exception(e);
      }
  }

  /// Barrier among team threads within an activation.
  void barrier() { barrier_.arrive_and_wait(); }

 private:
  void run(int tid) {
    try {
      (*body_)(tid);
    } catch (...) {
      errors_[tid] = std::current_exception();
      barrier_.break_barrier();
    }
  }

  void worker(int tid) {
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock lk(m_);
        cv_.wait(lk, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
      }
      run(tid);
      {
        std::lock_guard lk(m_);
        if (--pending_ == 0) done_cv_.notify_all();
      }
    }
  }

  int size_;
  RankContext* ctx_;
  TeamBarrier barrier_;
  std::vector<std::thread> workers_;
  std::vector<std::exception_ptr> errors_;
  std::mutex m_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* body_ = nullptr;
  std::uint64_t generation_ = 0;
  int pending_ = 0;
  bool stop_ = false;
  std::uint64_t activations_ = 0;
};

/// Drives a sequence of loop nests. Per-loop mode activates the team for each
/// nest; hoisted mode must be used inside a single enclosing activation and
/// separates nests with team barriers.
class StageRunner {
 public:
  StageRunner(Team& team, Activation mode) : team_(team), mode_(mode) {}

  Activation mode() const { return mode_; }

  /// Per-loop: call from the rank thread. Hoisted: call from every team
  /// thread inside `hoisted_region` with that thread's tid.
  void nest(int tid, const std::function<void(int)>& body) {
    if (mode_ == Activation::per_loop) {
      team_.activate(body);
    } else {
      body(tid);
      team_.barrier();
    }
  }

  /// Runs `region(tid)` once per thread in one activation (hoisted) or
  /// directly on the rank thread with tid 0 (per-loop).
  void region(const std::function<void(int)>& region) {
    if (mode_ == Activation::hoisted) team_.activate(region);
    else region(0);
  }

  Team& team() { return team_; }

 private:
  Team& team_;
  Activation mode_;
};

}  // namespace hbp
