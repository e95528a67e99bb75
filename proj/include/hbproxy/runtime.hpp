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

// In-process message-passing substrate. Each rank is a std::thread; a rank
// may run its own thread team, and every team thread may post sends and
// receives concurrently (the MPI_THREAD_MULTIPLE analogue).
//
// Sends are eager: the payload is copied into the destination mailbox at
// post time. Matching is exact on (src, dst, tag), and at most one message
// and one posted receive per triple may be outstanding at a time.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <thread>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "hbproxy/error.hpp"

namespace hbp {

using Tag = std::uint64_t;

struct Envelope {
  int src = 0;
  int dst = 0;
  Tag tag = 0;
  std::vector<double> payload;
};

/// Plain snapshot of a rank's counters.
struct Counters {
  std::uint64_t messages_sent = 0;
  std::uint64_t messages_received = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t collective_calls = 0;
  std::uint64_t write_ops = 0;
  std::uint64_t team_activations = 0;

  Counters& operator+=(const Counters& o) {
    messages_sent += o.messages_sent;
    messages_received += o.messages_received;
    bytes_sent += o.bytes_sent;
    collective_calls += o.collective_calls;
    write_ops += o.write_ops;
    team_activations += o.team_activations;
    return *this;
  }
  friend Counters operator-(Counters a, const Counters& b) {
    a.messages_sent -= b.messages_sent;
    a.messages_received -= b.messages_received;
    a.bytes_sent -= b.bytes_sent;
    a.collective_calls -= b.collective_calls;
    a.write_ops -= b.write_ops;
    a.team_activations -= b.team_activations;
    return a;
  }
  friend bool operator==(const Counters&, const Counters&) = default;
};

struct WorldOptions {
  /// When set, message operations randomly yield or sleep to perturb the
  /// thread schedule. Used by stress tests.
  std::optional<std::uint64_t> jitter_seed;
  std::chrono::milliseconds recv_timeout{std::chrono::minutes(5)};
};

/// Thrown inside surviving ranks once another rank has failed.
class WorldAborted : public Error {
 public:
  WorldAborted() : Error("run aborted by a failing rank") {}
};

class World;

struct RecvHandle {
  int src = -1;
  Tag tag = 0;
};

class RankContext {
 public:
  RankContext(World& world, int rank, int nranks) : world_(&world), rank_(rank), nranks_(nranks) {}

  int rank() const { return rank_; }
  int nranks() const { return nranks_; }
  World& world() const { return *world_; }

  Counters counters() const {
    Counters c;
    c.messages_sent = messages_sent_.load();
    c.messages_received = messages_received_.load();
    c.bytes_sent = bytes_sent_.load();
    c.collective_calls = collective_calls_.load();
    c.write_ops = write_ops_.load();
    c.team_activations = team_activations_.load();
    return c;
  }

  void add_write_ops(std::uint64_t n) { write_ops_.fetch_add(n, std::memory_order_relaxed); }
  void add_team_activation() { team_activations_.fetch_add(1, std::memory_order_relaxed); }

  // Message operations; defined after World.
  void post_send(int dst, Tag tag, std::span<const double> payload);
  RecvHandle post_recv(int src, Tag tag);
  std::vector<double> wait(const RecvHandle& h);
  std::vector<std::vector<double>> wait_all(std::span<const RecvHandle> handles);
  void allreduce_sum(std::span<double> buffer);
  void barrier();

 private:
  friend class World;
  World* world_;
  int rank_;
  int nranks_;
  std::atomic<std::uint64_t> messages_sent_{0};
  std::atomic<std::uint64_t> messages_received_{0};
  std::atomic<std::uint64_t> bytes_sent_{0};
  std::atomic<std::uint64_t> collective_calls_{0};
  std::atomic<std::uint64_t> write_ops_{0};
  std::atomic<std::uint64_t> team_activations_{0};
};

class World {
 public:
  explicit World(int nranks, WorldOptions opts = {}) : opts_(opts), mailboxes_(nranks) {
    if (nranks < 1) throw Error("nranks must be >= 1");
    contexts_.reserve(nranks);
    for (int r = 0; r < nranks; ++r) contexts_.push_back(std::make_unique<RankContext>(*this, r, nranks));
    slots_.resize(nranks);
  }

  int nranks() const { return static_cast<int>(contexts_.size()); }
  RankContext& context(int rank) { return *contexts_.at(rank); }

  void abort() {
    aborted_.store(true);
    for (auto& mb : mailboxes_) {
      std::lock_guard lk(mb.mutex);
      mb.cv.notify_all();
    }
    std::lock_guard lk(coll_mutex_);
    coll_cv_.notify_all();
  }
  bool aborted() const { return aborted_.load(); }

  std::uint64_t in_flight() const {
    std::uint64_t n = 0;
    for (auto& mb : mailboxes_) {
      std::lock_guard lk(mb.mutex);
      n += mb.messages.size();
    }
    return n;
  }

 private:
  friend class RankContext;

  struct Mailbox {
    mutable std::mutex mutex;
    std::condition_variable cv;
    std::map<std::pair<int, Tag>, std::vector<double>> messages;  // (src, tag)
    std::set<std::pair<int, Tag>> posted;                          // posted receives
  };

  void jitter() {
    if (!opts_.jitter_seed) return;
    thread_local std::mt19937_64 rng = [&] {
      std::seed_seq seq{*opts_.jitter_seed,
                        static_cast<std::uint64_t>(std::hash<std::thread::id>{}(std::this_thread::get_id()))};
      return std::mt19937_64(seq);
    }();
    const auto r = rng() % 16;
    if (r < 6) std::this_thread::yield();
    else if (r == 6) std::this_thread::sleep_for(std::chrono::microseconds(rng() % 50));
  }

  void check_rank(int r, const char* what) const {
    if (r < 0 || r >= nranks()) throw ProtocolError(std::string(what) + ": invalid rank " + std::to_string(r));
  }

  void send(RankContext& ctx, int dst, Tag tag, std::span<const double> payload) {
    check_rank(dst, "post_send");
    if (dst == ctx.rank_) throw ProtocolError("post_send: src and dst must differ");
    if (payload.empty()) throw ProtocolError("post_send: empty payload");
    jitter();
    auto& mb = mailboxes_[dst];
    {
      std::lock_guard lk(mb.mutex);
      auto [it, fresh] = mb.messages.try_emplace({ctx.rank_, tag});
      if (!fresh)
        throw ProtocolError("duplicate in-flight message " + std::to_string(ctx.rank_) + "->" +
                            std::to_string(dst) + " tag " + std::to_string(tag));
      it->second.assign(payload.begin(), payload.end());
    }
    mb.cv.notify_all();
    ctx.messages_sent_.fetch_add(1, std::memory_order_relaxed);
    ctx.bytes_sent_.fetch_add(payload.size() * sizeof(double), std::memory_order_relaxed);
  }

  RecvHandle recv(RankContext& ctx, int src, Tag tag) {
    check_rank(src, "post_recv");
    if (src == ctx.rank_) throw ProtocolError("post_recv: src and dst must differ");
    jitter();
    auto& mb = mailboxes_[ctx.rank_];
    std::lock_guard lk(mb.mutex);
    if (!mb.posted.emplace(src, tag).second)
      throw ProtocolError("duplicate posted receive " + std::to_string(src) + "->" + std::to_string(ctx.rank_) +
                          " tag " + std::to_string(tag));
    return {src, tag};
  }

  std::vector<double> wait(RankContext& ctx, const RecvHandle& h) {
    jitter();
    auto& mb = mailboxes_[ctx.rank_];
    std::unique_lock lk(mb.mutex);
    const std::pair<int, Tag> key{h.src, h.tag};
    if (!mb.posted.count(key)) throw ProtocolError("wait on a receive that was not posted");
    const auto deadline = std::chrono::steady_clock::now() + opts_.recv_timeout;
    while (!mb.messages.count(key)) {
      if (aborted()) throw WorldAborted();
      if (mb.cv.wait_until(lk, deadline) == std::cv_status::timeout && !mb.messages.count(key))
        throw ProtocolError("timed out waiting for message from rank " + std::to_string(h.src) + " tag " +
                            std::to_string(h.tag));
    }
    auto node = mb.messages.extract(key);
    mb.posted.erase(key);
    ctx.messages_received_.fetch_add(1, std::memory_order_relaxed);
    return std::move(node.mapped());
  }

  // Rank-ordered global sum. The last rank to arrive folds the slots left to
  // right in ascending rank order; everyone copies that one result.
  void allreduce(RankContext& ctx, std::span<double> buffer) {
    std::unique_lock lk(coll_mutex_);
    coll_cv_.wait(lk, [&] { return !draining_ || aborted(); });
    if (aborted()) throw WorldAborted();
    slots_[ctx.rank_].assign(buffer.begin(), buffer.end());
    if (++arrived_ == nranks()) {
      coll_error_ = false;
      for (const auto& s : slots_) coll_error_ |= s.size() != slots_[0].size();
      if (!coll_error_) {
        result_ = slots_[0];
        for (int r = 1; r < nranks(); ++r)
          for (std::size_t i = 0; i < result_.size(); ++i) result_[i] += slots_[r][i];
      }
      draining_ = true;
      coll_cv_.notify_all();
    } else {
      coll_cv_.wait(lk, [&] { return draining_ || aborted(); });
      if (aborted() && !draining_) throw WorldAborted();
    }
    const bool error = coll_error_;
    if (!error) std::copy(result_.begin(), result_.end(), buffer.begin());
    ctx.collective_calls_.fetch_add(1, std::memory_order_relaxed);
    if (++departed_ == nranks()) {
      arrived_ = departed_ = 0;
      draining_ = false;
      coll_cv_.notify_all();
    }
    if (error) throw CollectiveError("allreduce_sum: buffer lengths differ across ranks");
  }

  void barrier(RankContext&) {
    std::unique_lock lk(coll_mutex_);
    const auto gen = barrier_gen_;
    if (++barrier_count_ == nranks()) {
      barrier_count_ = 0;
      ++barrier_gen_;
      coll_cv_.notify_all();
      return;
    }
    coll_cv_.wait(lk, [&] { return barrier_gen_ != gen || aborted(); });
    if (barrier_gen_ == gen) throw WorldAborted();
  }

  WorldOptions opts_;
  std::vector<std::unique_ptr<RankContext>> contexts_;
  std::vector<Mailbox> mailboxes_;
  std::atomic<bool> aborted_{false};

  std::mutex coll_mutex_;
  std::condition_variable coll_cv_;
  std::vector<std::vector<double>> slots_;
  std::vector<double> result_;
  int arrived_ = 0;
  int departed_ = 0;
  bool draining_ = false;
  bool coll_error_ = false;
  int barrier_count_ = 0;
  std::uint64_t barrier_gen_ = 0;
};

inline void RankContext::post_send(int dst, Tag tag, std::span<const double> payload) {
  world_->send(*this, dst, tag, payload);
}
inline RecvHandle RankContext::post_recv(int src, Tag tag) { return world_->recv(*this, src, tag); }
inline std::vector<double> RankContext::wait(const RecvHandle& h) { return world_->wait(*this, h); }
inline std::vector<std::vector<double>> RankContext::wait_all(std::span<const RecvHandle> handles) {
  std::vector<std::vector<double>> out;
  out.reserve(handles.size());
  for (const auto& h : handles) out.push_back(wait(h));
  return out;
}
inline void RankContext::allreduce_sum(std::span<double> buffer) { world_->allreduce(*this, buffer); }
inline void RankContext::barrier() { world_->barrier(*this); }

/// Per-rank results of a run plus counters.
template <class R>
struct SpawnResult {
  std::vector<R> results;
  std::vector<Counters> counters;
  Counters total;
  std::uint64_t undelivered = 0;
};

/// Runs `program(ctx)` once per rank on its own thread and joins. If any
/// rank throws, the world is aborted and RankError is raised for the lowest
/// rank whose failure was not itself caused by the abort.
template <class Program>
auto spawn_ranks(int nranks, Program&& program, WorldOptions opts = {}) {
  using Ret = std::invoke_result_t<Program&, RankContext&>;
  using R = std::conditional_t<std::is_void_v<Ret>, std::monostate, Ret>;

  World world(nranks, opts);
  std::vector<std::optional<R>> results(nranks);
  std::vector<std::exception_ptr> errors(nranks);
  std::vector<bool> secondary(nranks, false);

  auto body = [&](int r) {
    try {
      if constexpr (std::is_void_v<Ret>) {
        program(world.context(r));
        results[r].emplace();
      } else {
        results[r].emplace(program(world.context(r)));
      }
    } catch (const WorldAborted&) {
      errors[r] = std::current_exception();
      secondary[r] = true;
    } catch (...) {
      errors[r] = std::current_exception();
      world.abort();
    }
  };

  if (nranks == 1) {
    body(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(nranks);
    for (int r = 0; r < nranks; ++r) threads.emplace_back(body, r);
    for (auto& t : threads) t.join();
  }

  for (int pass = 0; pass < 2; ++pass)
    for (int r = 0; r < nranks; ++r) {
      if (!errors[r] || (pass == 0 && secondary[r])) continue;
      try {
        std::rethrow_exception(errors[r]);
      } catch (const std::exception& e) {
        throw RankError(r, e.what(), errors[r]);
      } catch (...) {
        throw RankError(r, "unknown error", errors[r]);
      }
    }

  SpawnResult<R> out;
  for (int r = 0; r < nranks; ++r) {
    out.results.push_back(std::move(*results[r]));
    out.counters.push_back(world.context(r).counters());
    out.total += out.counters.back();
  }
  out.undelivered = world.in_flight();
  return out;
}

}  // namespace hbp
