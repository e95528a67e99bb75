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
#include <complex>
#include <numbers>

#include "hbproxy/spectral.hpp"

namespace hbp {
namespace {

// Independent derivative: forward DFT of the samples, multiply mode k by
// i*k*omega, inverse DFT. Valid for band-limited data with |k| <= nharms.
std::vector<double> dft_derivative(const std::vector<double>& f, double omega) {
  const int n = static_cast<int>(f.size());
  const int h = (n - 1) / 2;
  std::vector<std::complex<double>> c(n);
  for (int k = -h; k <= h; ++k) {
    std::complex<double> acc = 0.0;
    for (int j = 0; j < n; ++j) acc += f[j] * std::polar(1.0, -2.0 * std::numbers::pi * k * j / n);
    c[k + h] = acc / static_cast<double>(n);
  }
  std::vector<double> out(n);
  for (int j = 0; j < n; ++j) {
    std::complex<double> acc = 0.0;
    for (int k = -h; k <= h; ++k)
      acc += std::complex<double>(0.0, k * omega) * c[k + h] * std::polar(1.0, 2.0 * std::numbers::pi * k * j / n);
    out[j] = acc.real();
  }
  return out;
}

TEST(Spectral, SteadyCaseIsZero) {
  SpectralDeriv d(0, 2.0);
  EXPECT_EQ(d.size(), 1);
  EXPECT_EQ(d.matrix(), std::vector<double>{0.0});
}

TEST(Spectral, OneHarmonicMatchesDftOracle) {
  SpectralDeriv d(1, 1.0);
  const double T = d.period();
  std::vector<double> f(3);
  for (int j = 0; j < 3; ++j) f[j] = std::cos(j * T / 3);
  const auto got = d.apply(f);
  const auto ref = dft_derivative(f, 1.0);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(got[j], ref[j], 1e-12);
    EXPECT_NEAR(got[j], -std::sin(j * T / 3), 1e-12);
  }
}

TEST(Spectral, ConstantHasZeroDerivativeExactly) {
  for (int nh = 0; nh <= 12; ++nh) {
    SpectralDeriv d(nh, 1.7);
    std::vector<double> ones(d.size(), 1.0);
    for (double v : d.apply(ones)) EXPECT_EQ(v, 0.0);
  }
}

TEST(Spectral, MatrixAgreesWithDftOracleOnRandomBandLimitedData) {
  for (int nh = 1; nh <= 6; ++nh) {
    const double omega = 0.5 + nh;
    SpectralDeriv d(nh, omega);
    const int n = d.size();
    std::vector<double> f(n);
    for (int j = 0; j < n; ++j) {
      const double t = j * d.period() / n;
      f[j] = 0.3;
      for (int k = 1; k <= nh; ++k) f[j] += std::cos(k * omega * t + 0.1 * k) / k + 0.5 * std::sin(k * omega * t);
    }
    const auto got = d.apply(f);
    const auto ref = dft_derivative(f, omega);
    const auto m = d.matrix();
    for (int j = 0; j < n; ++j) {
      EXPECT_NEAR(got[j], ref[j], 1e-10 * omega * nh);
      double dense = 0.0;
      for (int k = 0; k < n; ++k) dense += m[j * n + k] * f[k];
      EXPECT_NEAR(dense, got[j], 1e-11 * omega * nh);
    }
  }
}

TEST(Spectral, AntisymmetricExactly) {
  for (int nh = 0; nh <= 10; ++nh) {
    SpectralDeriv d(nh, 3.0);
    for (int j = 0; j < d.size(); ++j)
      for (int k = 0; k < d.size(); ++k) EXPECT_EQ(d(j, k), -d(k, j));
  }
}

}  // namespace
}  // namespace hbp
