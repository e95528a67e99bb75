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

// Global force-coefficient reductions in two packings:
//   per_item: one allreduce of length 2 (cl, cd) or 3 (cl, cd, cm) per
//             (plane, body), i.e. nbody*(2*nharms+1) collectives;
//   buffered: one allreduce of length 3*nbody*(2*nharms+1), packed plane
//             outer / body inner / (cl, cd, cm) innermost. cm is always
//             packed; with functag 2 its slots hold zeros.
// With functag 2 the moment coefficient is not reduced and comes back zero
// from either packing.
// Both reduce in ascending rank order, so results agree bitwise.

#include <algorithm>
#include <vector>

#include "hbproxy/error.hpp"
#include "hbproxy/runtime.hpp"
#include "hbproxy/solver.hpp"

namespace hbp {

enum class ReduceMode { per_item, buffered };

struct ForceReduceStrategy {
  ReduceMode mode = ReduceMode::buffered;
  int functag = 3;  // 2: cl, cd; 3: cl, cd, cm
};

inline std::vector<double> pack_forces(const ForceCoefficients& f) {
  std::vector<double> buf;
  buf.reserve(3 * f.cl.size());
  for (int k = 0; k < f.nplanes; ++k)
    for (int i = 0; i < f.nbody; ++i) {
      buf.push_back(f.cl[f.at(k, i)]);
      buf.push_back(f.cd[f.at(k, i)]);
      buf.push_back(f.cm[f.at(k, i)]);
    }
  return buf;
}

inline void unpack_forces(const std::vector<double>& buf, ForceCoefficients& f) {
  if (buf.size() != 3 * f.cl.size()) throw CollectiveError("force buffer length mismatch");
  std::size_t j = 0;
  for (int k = 0; k < f.nplanes; ++k)
    for (int i = 0; i < f.nbody; ++i) {
      f.cl[f.at(k, i)] = buf[j++];
      f.cd[f.at(k, i)] = buf[j++];
      f.cm[f.at(k, i)] = buf[j++];
    }
}

inline ForceCoefficients reduce_forces(ForceCoefficients f, const ForceReduceStrategy& strategy, RankContext& ctx) {
  if (strategy.functag != 2 && strategy.functag != 3) throw CollectiveError("functag must be 2 or 3");
  if (f.cl.size() != std::size_t(f.nplanes) * f.nbody || f.cd.size() != f.cl.size() || f.cm.size() != f.cl.size())
    throw CollectiveError("force coefficient extents do not match nplanes*nbody");

  if (strategy.mode == ReduceMode::buffered) {
    if (strategy.functag == 2) std::fill(f.cm.begin(), f.cm.end(), 0.0);
    auto buf = pack_forces(f);
    ctx.allreduce_sum(buf);
    unpack_forces(buf, f);
    return f;
  }

  double temp[3];
  for (int n = 0; n < f.nplanes; ++n)
    for (int i = 0; i < f.nbody; ++i) {
      const auto slot = f.at(n, i);
      temp[0] = f.cl[slot];
      temp[1] = f.cd[slot];
      std::size_t len = 2;
      if (strategy.functag == 3) {
        temp[2] = f.cm[slot];
        len = 3;
      }
      ctx.allreduce_sum({temp, len});
      f.cl[slot] = temp[0];
      f.cd[slot] = temp[1];
      f.cm[slot] = strategy.functag == 3 ? temp[2] : 0.0;
    }
  return f;
}

/// Collectives one reduction issues.
inline std::uint64_t predicted_collectives(const ForceCoefficients& f, ReduceMode mode) {
  return mode == ReduceMode::buffered ? 1u : static_cast<std::uint64_t>(f.nplanes) * f.nbody;
}

}  // namespace hbp
