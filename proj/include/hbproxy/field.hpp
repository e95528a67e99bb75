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

// Per-block harmonic solution storage q[i, j, p, n] with a one-cell halo ring.
// Layout: n outermost, then p, then j, then i (unit stride). p is the 0-based
// pde variable (ipde - 1).

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <memory>
#include <vector>

#include "hbproxy/mesh.hpp"

namespace hbp {

inline constexpr int kNpde = 4;

class BlockArray {
 public:
  BlockArray() = default;
  BlockArray(int block, int ni, int nj, int npde, int nplanes)
      : block_(block), ni_(ni), nj_(nj), npde_(npde), nplanes_(nplanes),
        // Default-initialised: pages are first touched by whoever initialises them.
        data_(new double[size_for(ni, nj, npde, nplanes)]) {}

  BlockArray(const BlockArray& o)
      : BlockArray(o.block_, o.ni_, o.nj_, o.npde_, o.nplanes_) {
    std::copy_n(o.data_.get(), size(), data_.get());
  }
  BlockArray& operator=(const BlockArray& o) {
    if (this != &o) *this = BlockArray(o);
    return *this;
  }
  BlockArray(BlockArray&&) noexcept = default;
  BlockArray& operator=(BlockArray&&) noexcept = default;

  int block() const { return block_; }
  int ni() const { return ni_; }
  int nj() const { return nj_; }
  int npde() const { return npde_; }
  int nplanes() const { return nplanes_; }
  std::size_t size() const { return size_for(ni_, nj_, npde_, nplanes_); }

  std::ptrdiff_t row_stride() const { return ni_ + 2; }
  std::ptrdiff_t pde_stride() const { return row_stride() * (nj_ + 2); }
  std::ptrdiff_t plane_stride() const { return pde_stride() * npde_; }

  std::size_t index(int i, int j, int p, int n) const {
    return static_cast<std::size_t>(n * plane_stride() + p * pde_stride() + j * row_stride() + i);
  }
  double& operator()(int i, int j, int p, int n) { return data_[index(i, j, p, n)]; }
  double operator()(int i, int j, int p, int n) const { return data_[index(i, j, p, n)]; }

  double* data() { return data_.get(); }
  const double* data() const { return data_.get(); }
  double* plane(int n) { return data_.get() + n * plane_stride(); }
  const double* plane(int n) const { return data_.get() + n * plane_stride(); }

  bool bitwise_equal(const BlockArray& o) const {
    return ni_ == o.ni_ && nj_ == o.nj_ && npde_ == o.npde_ && nplanes_ == o.nplanes_ &&
           std::memcmp(data(), o.data(), size() * sizeof(double)) == 0;
  }

 private:
  static std::size_t size_for(int ni, int nj, int npde, int nplanes) {
    return static_cast<std::size_t>(ni + 2) * (nj + 2) * npde * nplanes;
  }

  int block_ = 0;
  int ni_ = 0;
  int nj_ = 0;
  int npde_ = 0;
  int nplanes_ = 0;
  std::unique_ptr<double[]> data_;
};

/// The blocks owned by one rank, ascending block id.
class HarmonicField {
 public:
  HarmonicField() = default;
  HarmonicField(const Topology& topo, const std::vector<int>& owned, int nplanes) : nplanes_(nplanes) {
    slot_of_.assign(topo.blocks.size(), -1);
    for (int b : owned) {
      slot_of_[b] = static_cast<int>(blocks_.size());
      const auto& spec = topo.blocks[b];
      blocks_.emplace_back(b, spec.ni, spec.nj, kNpde, nplanes);
    }
  }

  int nplanes() const { return nplanes_; }
  std::size_t nblocks() const { return blocks_.size(); }
  bool owns(int block) const { return block >= 0 && block < static_cast<int>(slot_of_.size()) && slot_of_[block] >= 0; }

  BlockArray& block(int id) { return blocks_[slot_of_.at(id)]; }
  const BlockArray& block(int id) const { return blocks_[slot_of_.at(id)]; }
  std::vector<BlockArray>& blocks() { return blocks_; }
  const std::vector<BlockArray>& blocks() const { return blocks_; }

 private:
  int nplanes_ = 1;
  std::vector<int> slot_of_;
  std::vector<BlockArray> blocks_;
};

}  // namespace hbp
