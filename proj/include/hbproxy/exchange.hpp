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

// Halo (cut) exchange.
//
// Every cut is serviced in two directions: direction 0 copies side-b
// interior cells into side-a halo cells, direction 1 copies side-a interior
// into side-b halo. One element carries all planes and pde variables of one
// boundary cell, packed n outer / p inner, datasize = npde*(2*nharms+1).
//
// PerElement sends each element as two messages, the first and second half
// of its payload. AggregatedCut packs all L elements of a cut direction into
// one buffer at displacement e*datasize and sends it as one message.
//
// Tag schema (unique among in-flight messages):
//   tag = ((cut*2 + direction)*max_elements + element)*4 + parity*2 + part
// where parity = exchange sequence number mod 2 and part is 0/1 for the two
// halves (always 0 for aggregated messages, which use element 0). A rank can
// run at most one exchange ahead of a peer, so parity disambiguates.

#include <cstdint>
#include <span>
#include <vector>

#include "hbproxy/field.hpp"
#include "hbproxy/mesh.hpp"
#include "hbproxy/runtime.hpp"
#include "hbproxy/team.hpp"

namespace hbp {

enum class ExchangeMode { per_element, aggregated };
enum class ThreadMode { serial, tagged_threads };

struct ExchangeStrategy {
  ExchangeMode mode = ExchangeMode::aggregated;
  ThreadMode thread_mode = ThreadMode::serial;
};

struct ElementPair {
  CellIndex src;  // interior cell on the sending block
  CellIndex dst;  // halo cell on the receiving block
};

/// One direction of one cut.
struct Transfer {
  int cut = 0;
  int direction = 0;
  int send_block = 0;
  int recv_block = 0;
  int send_rank = 0;
  int recv_rank = 0;
  std::vector<ElementPair> elements;
  Tag base_tag = 0;

  int length() const { return static_cast<int>(elements.size()); }
  bool local() const { return send_rank == recv_rank; }
};

struct CutPlan {
  int npde = kNpde;
  int nplanes = 1;
  std::size_t datasize = 0;
  int max_elements = 1;
  std::vector<Transfer> transfers;  // (cut, direction) order

  std::size_t displacement(int element) const { return static_cast<std::size_t>(element) * datasize; }
  std::size_t buffer_length(const Transfer& t) const { return static_cast<std::size_t>(t.length()) * datasize; }

  Tag tag(const Transfer& t, int element, int part, std::uint64_t seq) const {
    return t.base_tag + static_cast<Tag>(element) * 4 + (seq % 2) * 2 + static_cast<Tag>(part);
  }
};

inline CutPlan build_cut_plan(const Topology& topo, const Partition& part, int nharms, int npde) {
  CutPlan plan;
  plan.npde = npde;
  plan.nplanes = 2 * nharms + 1;
  plan.datasize = static_cast<std::size_t>(npde) * plan.nplanes;
  for (const auto& c : topo.cuts) plan.max_elements = std::max(plan.max_elements, c.length());

  for (const auto& c : topo.cuts) {
    const auto& A = topo.blocks[c.a.block];
    const auto& B = topo.blocks[c.b.block];
    for (int dir = 0; dir < 2; ++dir) {
      Transfer t;
      t.cut = c.id;
      t.direction = dir;
      t.send_block = dir == 0 ? B.id : A.id;
      t.recv_block = dir == 0 ? A.id : B.id;
      t.send_rank = part.rank_of_block.at(t.send_block);
      t.recv_rank = part.rank_of_block.at(t.recv_block);
      t.base_tag = static_cast<Tag>((c.id * 2 + dir)) * static_cast<Tag>(plan.max_elements) * 4;
      t.elements.reserve(c.length());
      for (int e = 0; e < c.length(); ++e) {
        const int ka = c.a_index(e);
        const int kb = c.b_index(e);
        if (dir == 0) t.elements.push_back({interior_cell(B, c.b.face, kb), halo_cell(A, c.a.face, ka)});
        else t.elements.push_back({interior_cell(A, c.a.face, ka), halo_cell(B, c.b.face, kb)});
      }
      plan.transfers.push_back(std::move(t));
    }
  }
  return plan;
}

struct Traffic {
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
  friend bool operator==(const Traffic&, const Traffic&) = default;
};

/// Messages and payload bytes of one exchange in one direction, summed over
/// remote cuts. A full exchange moves twice this (both directions).
inline Traffic predicted_message_count(const CutPlan& plan, ExchangeMode mode) {
  Traffic t;
  for (const auto& tr : plan.transfers) {
    if (tr.direction != 0 || tr.local()) continue;
    t.messages += mode == ExchangeMode::per_element ? 2u * tr.length() : 1u;
    t.bytes += plan.buffer_length(tr) * sizeof(double);
  }
  return t;
}

/// Messages and bytes one rank sends, and bytes it receives, per exchange.
struct RankTraffic {
  Traffic sent;
  std::uint64_t bytes_received = 0;
};

inline RankTraffic predicted_rank_traffic(const CutPlan& plan, ExchangeMode mode, int rank) {
  RankTraffic r;
  for (const auto& tr : plan.transfers) {
    if (tr.local()) continue;
    const auto bytes = plan.buffer_length(tr) * sizeof(double);
    if (tr.send_rank == rank) {
      r.sent.messages += mode == ExchangeMode::per_element ? 2u * tr.length() : 1u;
      r.sent.bytes += bytes;
    }
    if (tr.recv_rank == rank) r.bytes_received += bytes;
  }
  return r;
}

/// Performs halo exchanges for one rank. Holds the aggregated send/receive
/// buffers so repeated exchanges do not reallocate.
class HaloExchanger {
 public:
  HaloExchanger(const CutPlan& plan, int rank) : plan_(&plan), rank_(rank) {
    for (std::size_t k = 0; k < plan.transfers.size(); ++k) {
      const auto& t = plan.transfers[k];
      if (t.local()) {
        if (t.send_rank == rank) local_.push_back(k);
      } else {
        if (t.send_rank == rank) sending_.push_back(k);
        if (t.recv_rank == rank) receiving_.push_back(k);
      }
    }
    buffers_.resize(plan.transfers.size());
    for (auto k : sending_) buffers_[k].resize(plan.buffer_length(plan.transfers[k]));
    for (auto k : receiving_) buffers_[k].resize(plan.buffer_length(plan.transfers[k]));
  }

  const CutPlan& plan() const { return *plan_; }

  /// Single-threaded exchange.
  void exchange(HarmonicField& q, RankContext& ctx, ExchangeMode mode, std::uint64_t seq) {
    for (auto k : local_) copy_local(q, plan_->transfers[k], {0, plan_->transfers[k].length()});
    for (auto k : sending_) {
      const auto& t = plan_->transfers[k];
      send_elements(q, ctx, t, k, mode, {0, t.length()}, seq);
      if (mode == ExchangeMode::aggregated) ctx.post_send(t.recv_rank, plan_->tag(t, 0, 0, seq), buffers_[k]);
    }
    for (auto k : receiving_) {
      const auto& t = plan_->transfers[k];
      receive_elements(q, ctx, t, k, mode, {0, t.length()}, seq, true);
    }
  }

  /// Tagged multi-threaded exchange; call from every team thread.
  void exchange_team(HarmonicField& q, RankContext& ctx, ExchangeMode mode, std::uint64_t seq, Team& team,
                     int tid) {
    const int nt = team.size();
    for (auto k : local_) {
      const auto& t = plan_->transfers[k];
      copy_local(q, t, partition_work(t.length(), nt)[tid]);
    }
    if (mode == ExchangeMode::per_element) {
      for (auto k : sending_) {
        const auto& t = plan_->transfers[k];
        send_elements(q, ctx, t, k, mode, partition_work(t.length(), nt)[tid], seq);
      }
      for (auto k : receiving_) {
        const auto& t = plan_->transfers[k];
        receive_elements(q, ctx, t, k, mode, partition_work(t.length(), nt)[tid], seq, true);
      }
      team.barrier();
      return;
    }

    for (auto k : sending_) {
      const auto& t = plan_->transfers[k];
      send_elements(q, ctx, t, k, mode, partition_work(t.length(), nt)[tid], seq);
    }
    team.barrier();
    for (std::size_t s = 0; s < sending_.size(); ++s) {
      if (static_cast<int>(s % nt) != tid) continue;
      const auto& t = plan_->transfers[sending_[s]];
      ctx.post_send(t.recv_rank, plan_->tag(t, 0, 0, seq), buffers_[sending_[s]]);
    }
    for (std::size_t s = 0; s < receiving_.size(); ++s) {
      if (static_cast<int>(s % nt) != tid) continue;
      const auto k = receiving_[s];
      const auto& t = plan_->transfers[k];
      buffers_[k] = ctx.wait(ctx.post_recv(t.send_rank, plan_->tag(t, 0, 0, seq)));
    }
    team.barrier();
    for (auto k : receiving_) {
      const auto& t = plan_->transfers[k];
      receive_elements(q, ctx, t, k, mode, partition_work(t.length(), nt)[tid], seq, false);
    }
    team.barrier();
  }

 private:
  void pack(const BlockArray& src, const ElementPair& ep, double* out) const {
    for (int n = 0; n < plan_->nplanes; ++n)
      for (int p = 0; p < plan_->npde; ++p) *out++ = src(ep.src.i, ep.src.j, p, n);
  }
  void unpack(BlockArray& dst, const ElementPair& ep, const double* in) const {
    for (int n = 0; n < plan_->nplanes; ++n)
      for (int p = 0; p < plan_->npde; ++p) dst(ep.dst.i, ep.dst.j, p, n) = *in++;
  }

  void copy_local(HarmonicField& q, const Transfer& t, Range r) const {
    const auto& src = q.block(t.send_block);
    auto& dst = q.block(t.recv_block);
    for (int e = r.begin; e < r.end; ++e) {
      const auto& ep = t.elements[e];
      for (int n = 0; n < plan_->nplanes; ++n)
        for (int p = 0; p < plan_->npde; ++p) dst(ep.dst.i, ep.dst.j, p, n) = src(ep.src.i, ep.src.j, p, n);
    }
  }

  // Aggregated: packs elements of `r` into the transfer buffer. Per-element:
  // packs and sends each element as two half-payload messages.
  void send_elements(HarmonicField& q, RankContext& ctx, const Transfer& t, std::size_t k, ExchangeMode mode,
                     Range r, std::uint64_t seq) {
    const auto& src = q.block(t.send_block);
    const auto ds = plan_->datasize;
    if (mode == ExchangeMode::aggregated) {
      for (int e = r.begin; e < r.end; ++e) pack(src, t.elements[e], buffers_[k].data() + plan_->displacement(e));
      return;
    }
    std::vector<double> tmp(ds);
    for (int e = r.begin; e < r.end; ++e) {
      pack(src, t.elements[e], tmp.data());
      const std::span<const double> all(tmp);
      ctx.post_send(t.recv_rank, plan_->tag(t, e, 0, seq), all.first(ds / 2));
      ctx.post_send(t.recv_rank, plan_->tag(t, e, 1, seq), all.subspan(ds / 2));
    }
  }

  // Aggregated: unpacks elements of `r` from the transfer buffer, first
  // receiving it when `fetch` is set. Per-element: receives both halves of
  // each element and unpacks.
  void receive_elements(HarmonicField& q, RankContext& ctx, const Transfer& t, std::size_t k, ExchangeMode mode,
                        Range r, std::uint64_t seq, bool fetch) {
    auto& dst = q.block(t.recv_block);
    const auto ds = plan_->datasize;
    if (mode == ExchangeMode::aggregated) {
      if (fetch) buffers_[k] = ctx.wait(ctx.post_recv(t.send_rank, plan_->tag(t, 0, 0, seq)));
      for (int e = r.begin; e < r.end; ++e) unpack(dst, t.elements[e], buffers_[k].data() + plan_->displacement(e));
      return;
    }
    std::vector<RecvHandle> handles;
    handles.reserve(2 * static_cast<std::size_t>(r.size()));
    for (int e = r.begin; e < r.end; ++e) {
      handles.push_back(ctx.post_recv(t.send_rank, plan_->tag(t, e, 0, seq)));
      handles.push_back(ctx.post_recv(t.send_rank, plan_->tag(t, e, 1, seq)));
    }
    std::vector<double> tmp(ds);
    for (int e = r.begin; e < r.end; ++e) {
      const auto h = 2 * static_cast<std::size_t>(e - r.begin);
      const auto first = ctx.wait(handles[h]);
      const auto second = ctx.wait(handles[h + 1]);
      std::copy(first.begin(), first.end(), tmp.begin());
      std::copy(second.begin(), second.end(), tmp.begin() + static_cast<std::ptrdiff_t>(first.size()));
      unpack(dst, t.elements[e], tmp.data());
    }
  }

  const CutPlan* plan_;
  int rank_;
  std::vector<std::size_t> local_;
  std::vector<std::size_t> sending_;
  std::vector<std::size_t> receiving_;
  std::vector<std::vector<double>> buffers_;
};

/// Single-threaded convenience entry point.
inline void exchange_halos(HarmonicField& q, const CutPlan& plan, ExchangeMode mode, RankContext& ctx,
                           std::uint64_t seq = 0) {
  HaloExchanger(plan, ctx.rank()).exchange(q, ctx, mode, seq);
}

}  // namespace hbp
