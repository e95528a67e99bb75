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

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>

#include "hbproxy/hbproxy.hpp"

namespace hbp::testing {

inline std::string case_path(const std::string& name) { return std::string(HBP_CASES_DIR) + "/" + name + ".case"; }

inline CaseConfig load(const std::string& name) { return load_case(case_path(name)); }

/// Fresh scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = base() / ("hbp_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  static std::filesystem::path base() {
    std::error_code ec;
    const std::filesystem::path shm = "/dev/shm";
    if (!std::getenv("TMPDIR") && std::filesystem::is_directory(shm, ec) && ::access(shm.c_str(), W_OK) == 0)
      return shm;
    return std::filesystem::temp_directory_path();
  }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline bool fields_equal(const std::vector<BlockArray>& a, const std::vector<BlockArray>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (!a[k].bitwise_equal(b[k])) return false;
  return true;
}

}  // namespace hbp::testing
