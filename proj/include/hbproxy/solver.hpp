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

// Harmonic-balance proxy solver.
//
// Model residual per interior cell, plane n and variable p:
//
//   R = kdiff*(4q - q[i+1] - q[i-1] - q[j+1] - q[j-1])
//     + kconv*(q[i+1] - q[i-1])
//     + (D q)_n
//     + s(p, n, x, y)
//
// with kdiff = nu/h^2, kconv = a/(2h), nu = 0.05, a = 1, evaluated in exactly
// that order (left to right). The forcing is
//
//   s = 0.01*(p+1)*sin(x)*cos(y)   for n = 1
//   s = 0.01*(p+1)*cos(x)*sin(y)   for n = 2
//   s = 0                          otherwise.
//
// Pseudo-time stepping: q(s) = q(0) - alpha_s*dtau*R(q(s-1)) for the four
// stages alpha = {1/4, 1/3, 1/2, 1}, each followed by a halo exchange. Every
// point update depends only on the previous stage, so the result does not
// depend on rank count, thread count, axis or exchange strategy.
//
// Halo cells on faces that are not cut are held at zero.

#include <array>
#include <atomic>
#include <cmath>
#include <cstring>
#include <cstdint>
#include <limits>
#include <mutex>
#include <span>
#include <tuple>
#include <vector>

#include "hbproxy/config.hpp"
#include "hbproxy/exchange.hpp"
#include "hbproxy/field.hpp"
#include "hbproxy/mesh.hpp"
#include "hbproxy/spectral.hpp"
#include "hbproxy/team.hpp"

namespace hbp {

inline constexpr double kNu = 0.05;
inline constexpr double kAdvection = 1.0;

struct RKScheme {
  std::array<double, 4> alpha{0.25, 1.0 / 3.0, 0.5, 1.0};
  double dtau = 0.01;
};

inline double forcing(int p, int n, double x, double y) {
  if (n == 1) return 0.01 * (p + 1) * std::sin(x) * std::cos(y);
  if (n == 2) return 0.01 * (p + 1) * std::cos(x) * std::sin(y);
  return 0.0;
}

inline double initial_value(int p, int n, double x, double y) {
  return 0.1 * std::cos(0.7 * x + 0.3 * (p + 1)) * std::sin(0.5 * y + 0.2 * n + 0.1);
}

/// Forcing samples for one block, same layout as BlockArray (halo entries 0).
inline BlockArray make_forcing(const BlockSpec& b, int nplanes) {
  BlockArray s(b.id, b.ni, b.nj, kNpde, nplanes);
  for (int n = 0; n < nplanes; ++n)
    for (int p = 0; p < kNpde; ++p)
      for (int j = 0; j <= b.nj + 1; ++j)
        for (int i = 0; i <= b.ni + 1; ++i) {
          const bool interior = i >= 1 && i <= b.ni && j >= 1 && j <= b.nj;
          s(i, j, p, n) = interior ? forcing(p, n, b.x(i), b.y(j)) : 0.0;
        }
  return s;
}

/// Writes the initial condition into planes/rows of `chunk` (halo ring zero).
inline void initialise_chunk(BlockArray& q, const BlockSpec& b, const Chunk& chunk) {
  const int jlo = chunk.rows.begin == 1 ? 0 : chunk.rows.begin;
  const int jhi = chunk.rows.end == b.nj + 1 ? b.nj + 2 : chunk.rows.end;
  for (int n = chunk.planes.begin; n < chunk.planes.end; ++n)
    for (int p = 0; p < kNpde; ++p)
      for (int j = jlo; j < jhi; ++j)
        for (int i = 0; i <= b.ni + 1; ++i) {
          const bool interior = i >= 1 && i <= b.ni && j >= 1 && j <= b.nj;
          q(i, j, p, n) = interior ? initial_value(p, n, b.x(i), b.y(j)) : 0.0;
        }
}

/// 1 for planes whose forcing table has a nonzero interior value.
inline std::vector<char> active_planes(const BlockArray& s) {
  std::vector<char> out(s.nplanes(), 0);
  for (int n = 0; n < s.nplanes(); ++n)
    for (int p = 0; p < s.npde() && !out[n]; ++p)
      for (int j = 1; j <= s.nj() && !out[n]; ++j)
        for (int i = 1; i <= s.ni(); ++i)
          if (s(i, j, p, n) != 0.0) {
            out[n] = 1;
            break;
          }
  return out;
}

/// Residual on planes `planes` and interior rows `rows`; loop order n, p, j, i.
/// Per point the spectral term starts from 0.0 and adds harmonics in
/// ascending d, then terms combine in the documented order. Planes marked 0
/// in `active` (see active_planes) read zeros instead of the forcing table.
inline void residual_range(const BlockArray& q, const BlockSpec& b, const SpectralDeriv& D,
                           const BlockArray& forcing_table, BlockArray& r, Range planes, Range rows,
                           std::span<const char> active = {}) {
  constexpr int W = 8;
  const double kdiff = kNu / (b.h * b.h);
  const double kconv = kAdvection / (2.0 * b.h);
  const int nplanes = q.nplanes();
  const int nh = D.nharms();
  const auto rs = q.row_stride();
  thread_local std::vector<const double*> lo_rows, hi_rows;
  thread_local std::vector<double> coeff, zeros;
  zeros.assign(static_cast<std::size_t>(b.ni) + 2, 0.0);
  lo_rows.resize(nh);
  hi_rows.resize(nh);
  coeff.resize(nh);
  for (int d = 1; d <= nh; ++d) coeff[d - 1] = D.coeff(d);

  auto point = [&](const double* c, const double* s, double* out, int i, double spec) {
    const double qc = c[i];
    const double qe = c[i + 1];
    const double qw = c[i - 1];
    const double diff = ((qc - qe) + (qc - qw)) + ((qc - c[i + rs]) + (qc - c[i - rs]));
    out[i] = kdiff * diff + kconv * (qe - qw) + spec + s[i];
  };

  for (int n = planes.begin; n < planes.end; ++n)
    for (int p = 0; p < kNpde; ++p)
      for (int j = rows.begin; j < rows.end; ++j) {
        const std::size_t base = q.index(0, j, p, n);
        const double* c = q.data() + base;
        const bool forced = active.empty() || active[n];
        const double* s = forced ? forcing_table.data() + base : zeros.data();
        double* out = r.data() + base;
        for (int d = 1; d <= nh; ++d) {
          const int lo = n - d < 0 ? n - d + nplanes : n - d;
          const int hi = n + d >= nplanes ? n + d - nplanes : n + d;
          lo_rows[d - 1] = q.data() + q.index(0, j, p, lo);
          hi_rows[d - 1] = q.data() + q.index(0, j, p, hi);
        }
        int i = 1;
        for (; i + W - 1 <= b.ni; i += W) {
          double acc[W] = {};
          for (int d = 0; d < nh; ++d) {
            const double* ql = lo_rows[d] + i;
            const double* qh = hi_rows[d] + i;
            const double cd = coeff[d];
            for (int k = 0; k < W; ++k) acc[k] += cd * (ql[k] - qh[k]);
          }
          for (int k = 0; k < W; ++k) point(c, s, out, i + k, acc[k]);
        }
        for (; i <= b.ni; ++i) {
          double acc = 0.0;
          for (int d = 0; d < nh; ++d) acc += coeff[d] * (lo_rows[d][i] - hi_rows[d][i]);
          point(c, s, out, i, acc);
        }
      }
}

/// Full-block residual.
inline void residual(const BlockArray& q, const BlockSpec& b, const SpectralDeriv& D, const BlockArray& forcing_table,
                     BlockArray& r) {
  residual_range(q, b, D, forcing_table, r, {0, q.nplanes()}, {1, b.nj + 1});
}

/// Result of one stage update on a chunk; records the first non-finite
/// value in (n, p, j, i) order.
struct UpdateCheck {
  bool finite = true;
  int i = 0, j = 0, p = 0, n = 0;
};

/// q = q0 - coeff * r over the chunk. With `save`, each row of q is first
/// copied into q0 (the stage-0 snapshot).
inline UpdateCheck update_range(BlockArray& q, BlockArray& q0, const BlockArray& r, const BlockSpec& b,
                                double coeff, Range planes, Range rows, bool save = false) {
  UpdateCheck check;
  for (int n = planes.begin; n < planes.end; ++n)
    for (int p = 0; p < kNpde; ++p)
      for (int j = rows.begin; j < rows.end; ++j) {
        const std::size_t base = q.index(0, j, p, n);
        double* out = q.data() + base;
        double* in0 = q0.data() + base;
        const double* res = r.data() + base;
        if (save) std::copy_n(out + 1, b.ni, in0 + 1);
        for (int i = 1; i <= b.ni; ++i) out[i] = in0[i] - coeff * res[i];
        if (check.finite)
          for (int i = 1; i <= b.ni; ++i)
            if (!std::isfinite(out[i])) {
              check = {false, i, j, p, n};
              break;
            }
      }
  return check;
}

inline void copy_range(BlockArray& dst, const BlockArray& src, Range planes, Range rows, int ni) {
  for (int n = planes.begin; n < planes.end; ++n)
    for (int p = 0; p < kNpde; ++p)
      for (int j = rows.begin; j < rows.end; ++j) {
        const std::size_t base = src.index(0, j, p, n);
        std::copy_n(src.data() + base + 1, ni, dst.data() + base + 1);
      }
}

/// cl, cd, cm per plane per body, flat [n*nbody + body].
struct ForceCoefficients {
  int nplanes = 1;
  int nbody = 0;
  std::vector<double> cl, cd, cm;

  ForceCoefficients() = default;
  ForceCoefficients(int nplanes, int nbody)
      : nplanes(nplanes), nbody(nbody), cl(std::size_t(nplanes) * nbody, 0.0), cd(cl), cm(cl) {}

  std::size_t at(int n, int body) const { return static_cast<std::size_t>(n) * nbody + body; }
  bool bitwise_equal(const ForceCoefficients& o) const {
    auto same = [](const std::vector<double>& a, const std::vector<double>& b) {
      return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
    };
    return nplanes == o.nplanes && nbody == o.nbody && same(cl, o.cl) && same(cd, o.cd) && same(cm, o.cm);
  }
};

/// Face totals are rounded to this grid so that sums over faces, and hence
/// over ranks, are exact and independent of association order.
inline constexpr double kForceQuantum = 0x1p-36;

inline double quantise_force(double v) { return std::nearbyint(v / kForceQuantum) * kForceQuantum; }

/// Partial force coefficients from the body faces of the blocks in `field`.
/// Each face integrates h*q over its cells in ascending face index; face
/// totals are quantised and accumulated in ascending (block, face) order.
inline ForceCoefficients compute_forces(const HarmonicField& field, const Topology& topo) {
  ForceCoefficients f(field.nplanes(), topo.nbody);
  for (const auto& q : field.blocks()) {
    const auto& b = topo.blocks[q.block()];
    for (const auto& bf : b.body_faces)
      for (int n = 0; n < field.nplanes(); ++n) {
        double sum[3] = {0.0, 0.0, 0.0};
        for (int k = 1; k <= b.face_extent(bf.face); ++k) {
          const auto c = interior_cell(b, bf.face, k);
          for (int p = 0; p < 3; ++p) sum[p] += b.h * q(c.i, c.j, p, n);
        }
        const auto slot = f.at(n, bf.body);
        f.cl[slot] += quantise_force(sum[0]);
        f.cd[slot] += quantise_force(sum[1]);
        f.cm[slot] += quantise_force(sum[2]);
      }
  }
  return f;
}

/// Per-rank solver state: current iterate, stage-0 copy, residual buffer,
/// forcing tables and the work plan for the thread team.
class RankSolver {
 public:
  RankSolver(const Topology& topo, const Partition& part, const CaseParams& params, int rank,
             const TeamConfig& team_cfg)
      : topo_(&topo), params_(params), rank_(rank), team_cfg_(team_cfg), D_(params.nharms, params.omega) {
    owned_ = part.blocks_of(rank);
    std::vector<std::pair<int, int>> owned_nj;
    for (int b : owned_) owned_nj.emplace_back(b, topo.blocks[b].nj);
    plan_ = make_work_plan(owned_nj, params.nplanes(), team_cfg);
    q_ = HarmonicField(topo, owned_, params.nplanes());
    q0_ = HarmonicField(topo, owned_, params.nplanes());
    r_ = HarmonicField(topo, owned_, params.nplanes());
    for (int b : owned_) {
      forcing_.push_back(make_forcing(topo.blocks[b], params.nplanes()));
      active_.push_back(active_planes(forcing_.back()));
    }
  }

  const std::vector<int>& owned() const { return owned_; }
  const WorkPlan& work_plan() const { return plan_; }
  const SpectralDeriv& spectral() const { return D_; }
  HarmonicField& field() { return q_; }
  const HarmonicField& field() const { return q_; }
  const Topology& topology() const { return *topo_; }

  /// Initialises q, q0 and R with the same thread/chunk ownership used by
  /// the compute nests. `init_plan` must equal the compute plan.
  void first_touch_init(Team& team, const WorkPlan& init_plan) {
    if (!(init_plan == plan_)) throw PlanError("first-touch plan differs from compute plan");
    team.activate([&](int tid) {
      for (const auto& c : plan_.chunks) {
        if (c.thread != tid) continue;
        const auto& b = topo_->blocks[c.block];
        initialise_chunk(q_.block(c.block), b, c);
        zero_chunk(q0_.block(c.block), b, c);
        zero_chunk(r_.block(c.block), b, c);
      }
    });
  }
  void first_touch_init(Team& team) { first_touch_init(team, plan_); }

  /// Residual nest for one thread.
  void residual_nest(int tid) {
    for (const auto& c : plan_.chunks)
      if (c.thread == tid) {
        const auto k = slot_of(c.block);
        residual_range(q_.block(c.block), topo_->blocks[c.block], D_, forcing_[k], r_.block(c.block), c.planes,
                       c.rows, active_[k]);
      }
  }

  /// Update nest for one thread; stage 0 first saves q into q0.
  void update_nest(int tid, int stage, const RKScheme& scheme) {
    const double coeff = scheme.alpha[stage] * scheme.dtau;
    for (const auto& c : plan_.chunks) {
      if (c.thread != tid) continue;
      const auto& b = topo_->blocks[c.block];
      const auto chk = update_range(q_.block(c.block), q0_.block(c.block), r_.block(c.block), b, coeff, c.planes,
                                    c.rows, stage == 0);
      if (!chk.finite) record_divergence(c.block, chk);
    }
  }

  /// Throws DivergenceError for the lexicographically first (block, n, p, j, i)
  /// non-finite value reported so far.
  void check_divergence() const {
    std::lock_guard lk(div_mutex_);
    if (diverged_) throw DivergenceError(div_.block, div_.i, div_.j, div_.p, div_.n);
  }

 private:
  struct DivergencePoint {
    int block, i, j, p, n;
  };

  std::size_t slot_of(int block) const {
    for (std::size_t k = 0; k < owned_.size(); ++k)
      if (owned_[k] == block) return k;
    throw PlanError("block not owned");
  }

  static void zero_chunk(BlockArray& a, const BlockSpec& b, const Chunk& c) {
    const int jlo = c.rows.begin == 1 ? 0 : c.rows.begin;
    const int jhi = c.rows.end == b.nj + 1 ? b.nj + 2 : c.rows.end;
    for (int n = c.planes.begin; n < c.planes.end; ++n)
      for (int p = 0; p < kNpde; ++p)
        for (int j = jlo; j < jhi; ++j) std::fill_n(&a(0, j, p, n), b.ni + 2, 0.0);
  }

  void record_divergence(int block, const UpdateCheck& chk) {
    std::lock_guard lk(div_mutex_);
    const DivergencePoint pt{block, chk.i, chk.j, chk.p, chk.n};
    auto key = [](const DivergencePoint& d) { return std::tie(d.block, d.n, d.p, d.j, d.i); };
    if (!diverged_ || key(pt) < key(div_)) div_ = pt;
    diverged_ = true;
  }

  const Topology* topo_;
  CaseParams params_;
  int rank_;
  TeamConfig team_cfg_;
  SpectralDeriv D_;
  std::vector<int> owned_;
  WorkPlan plan_;
  HarmonicField q_, q0_, r_;
  std::vector<BlockArray> forcing_;
  std::vector<std::vector<char>> active_;
  mutable std::mutex div_mutex_;
  bool diverged_ = false;
  DivergencePoint div_{};
};

/// One pseudo-time iteration (four stages, each residual -> update ->
/// exchange). Exchange sequence numbers continue from `seq`; returns the
/// next unused sequence number.
inline std::uint64_t rk_iteration(RankSolver& solver, const RKScheme& scheme, HaloExchanger& exchanger,
                                  const ExchangeStrategy& strategy, StageRunner& runner, RankContext& ctx,
                                  std::uint64_t seq) {
  Team& team = runner.team();
  auto exchange_nest = [&](std::uint64_t s) {
    return [&, s](int tid) {
      if (strategy.thread_mode == ThreadMode::tagged_threads) {
        exchanger.exchange_team(solver.field(), ctx, strategy.mode, s, team, tid);
      } else if (tid == 0) {
        exchanger.exchange(solver.field(), ctx, strategy.mode, s);
      }
    };
  };
  runner.region([&](int tid) {
    for (int stage = 0; stage < 4; ++stage) {
      runner.nest(tid, [&](int t) { solver.residual_nest(t); });
      runner.nest(tid, [&](int t) { solver.update_nest(t, stage, scheme); });
      solver.check_divergence();
      runner.nest(tid, exchange_nest(seq + stage));
    }
  });
  return seq + 4;
}

}  // namespace hbp
