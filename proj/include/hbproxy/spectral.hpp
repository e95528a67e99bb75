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

// Time-spectral derivative operator for an odd number of equispaced samples
// N = 2*nharms+1 over one period T = 2*pi/omega:
//
//   D[j][k] = (omega/2) * (-1)^(j-k) / sin(pi*(j-k)/N),   D[j][j] = 0.
//
// D[j][k] depends only on d = (j-k) mod N, and c(N-d) = -c(d), so the
// operator is stored as the half table c(1..nharms) and applied in paired
// form: (D q)_n = sum_{d=1..nharms} c(d) * (q[n-d] - q[n+d]) with indices
// taken mod N. The pairing makes D applied to a constant exactly zero.

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

namespace hbp {

class SpectralDeriv {
 public:
  SpectralDeriv() : SpectralDeriv(0, 1.0) {}
  SpectralDeriv(int nharms, double omega) : nharms_(nharms), omega_(omega), half_(nharms + 1, 0.0) {
    const int n = size();
    for (int d = 1; d <= nharms; ++d) {
      const double sign = (d % 2 == 0) ? 1.0 : -1.0;
      half_[d] = 0.5 * omega * sign / std::sin(std::numbers::pi * d / n);
    }
  }

  int nharms() const { return nharms_; }
  int size() const { return 2 * nharms_ + 1; }
  double omega() const { return omega_; }
  double period() const { return 2.0 * std::numbers::pi / omega_; }

  /// Coefficient for offset d = (j - k) mod N.
  double coeff(int d) const {
    const int n = size();
    d = ((d % n) + n) % n;
    if (d == 0) return 0.0;
    return d <= nharms_ ? half_[d] : -half_[n - d];
  }
  double operator()(int j, int k) const { return coeff(j - k); }

  /// Dense row-major N x N matrix.
  std::vector<double> matrix() const {
    const int n = size();
    std::vector<double> m(static_cast<std::size_t>(n) * n);
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) m[static_cast<std::size_t>(j) * n + k] = (*this)(j, k);
    return m;
  }

  /// (D q)_row for samples q spaced `stride` apart.
  double apply_row(int row, const double* q, std::ptrdiff_t stride) const {
    const int n = size();
    double acc = 0.0;
    for (int d = 1; d <= nharms_; ++d) {
      int lo = row - d;
      if (lo < 0) lo += n;
      int hi = row + d;
      if (hi >= n) hi -= n;
      acc += half_[d] * (q[lo * stride] - q[hi * stride]);
    }
    return acc;
  }

  std::vector<double> apply(std::span<const double> q) const {
    std::vector<double> out(q.size());
    for (int r = 0; r < size(); ++r) out[r] = apply_row(r, q.data(), 1);
    return out;
  }

 private:
  int nharms_;
  double omega_;
  std::vector<double> half_;
};

}  // namespace hbp
