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

#include <cstddef>
#include <exception>
#include <stdexcept>
#include <string>

namespace hbp {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed case file. `line()` is 1-based, 0 when not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class TopologyError : public Error {
 public:
  using Error::Error;
};

/// More ranks requested than there are blocks to distribute.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(int block, int i, int j, int p, int n)
      : Error("non-finite value at block " + std::to_string(block) + " (i=" + std::to_string(i) +
              ", j=" + std::to_string(j) + ", p=" + std::to_string(p) + ", n=" + std::to_string(n) + ")"),
        block(block), i(i), j(j), p(p), n(n) {}
  int block, i, j, p, n;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class CollectiveError : public Error {
 public:
  using Error::Error;
};

class PlanError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// A rank worker failed; carries the rank id and the original message.
class RankError : public Error {
 public:
  RankError(int rank, const std::string& what, std::exception_ptr cause = nullptr)
      : Error("rank " + std::to_string(rank) + ": " + what), rank_(rank), cause_(std::move(cause)) {}
  int rank() const noexcept { return rank_; }
  /// The exception originally thrown by the rank.
  std::exception_ptr cause() const noexcept { return cause_; }

 private:
  int rank_;
  std::exception_ptr cause_;
};

}  // namespace hbp
