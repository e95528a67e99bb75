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

// Restart and flowtec binary output.
//
// Every (block, plane) pair is one record:
//   u32 LE  payload byte count
//   f64 LE  payload values
//   u32 LE  payload byte count
// Records are laid out back to back in ascending (block, plane) order.
//
//   restart.bin        all records; payload q[i,j,p,n], j outer, i inner, p innermost
//   flowtec_<n>.bin    records of plane n; payload per cell (x, y, q1, q2), j outer, i inner
//
// Bytes depend only on the field and the layout. PerValue mode issues one
// positioned write per marker and per scalar (2 + count per record),
// Buffered mode issues three (prefix, payload, suffix).

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "hbproxy/error.hpp"
#include "hbproxy/field.hpp"
#include "hbproxy/mesh.hpp"
#include "hbproxy/runtime.hpp"
#include "hbproxy/team.hpp"

namespace hbp {

inline constexpr std::size_t kIntegerSize = 4;
inline constexpr std::size_t kDoubleSize = 8;

enum class FileKind { restart, flowtec };
enum class WriteMode { per_value, buffered };

struct Record {
  int block = 0;
  int plane = 0;
  int file = 0;
  std::uint64_t offset = 0;  // of the leading marker
  std::uint64_t count = 0;   // payload values

  std::uint64_t payload_bytes() const { return count * kDoubleSize; }
  std::uint64_t total_bytes() const { return 2 * kIntegerSize + payload_bytes(); }
};

struct FileLayout {
  FileKind kind = FileKind::restart;
  int nplanes = 1;
  std::vector<std::string> files;
  std::vector<std::uint64_t> file_sizes;
  std::vector<Record> records;  // ascending (block, plane)

  std::size_t record_index(int block, int plane) const { return static_cast<std::size_t>(block) * nplanes + plane; }
  const Record& record(int block, int plane) const { return records.at(record_index(block, plane)); }
};

inline std::string flowtec_name(int plane) { return "flowtec_" + std::to_string(plane) + ".bin"; }

inline FileLayout compute_layout(const Topology& topo, int nharms, int npde, FileKind kind) {
  FileLayout l;
  l.kind = kind;
  l.nplanes = 2 * nharms + 1;
  if (kind == FileKind::restart) {
    l.files = {"restart.bin"};
  } else {
    for (int n = 0; n < l.nplanes; ++n) l.files.push_back(flowtec_name(n));
  }
  l.file_sizes.assign(l.files.size(), 0);
  for (const auto& b : topo.blocks)
    for (int n = 0; n < l.nplanes; ++n) {
      Record r;
      r.block = b.id;
      r.plane = n;
      r.file = kind == FileKind::restart ? 0 : n;
      r.count = static_cast<std::uint64_t>(b.cells()) * (kind == FileKind::restart ? npde : 4);
      r.offset = l.file_sizes[r.file];
      l.file_sizes[r.file] += r.total_bytes();
      l.records.push_back(r);
    }
  return l;
}

/// Record payload values for one (block, plane).
inline std::vector<double> record_payload(const BlockArray& q, const BlockSpec& b, FileKind kind, int plane) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(b.cells()) * 4);
  for (int j = 1; j <= b.nj; ++j)
    for (int i = 1; i <= b.ni; ++i) {
      if (kind == FileKind::restart) {
        for (int p = 0; p < q.npde(); ++p) out.push_back(q(i, j, p, plane));
      } else {
        out.push_back(b.x(i));
        out.push_back(b.y(j));
        out.push_back(q(i, j, 0, plane));
        out.push_back(q(i, j, 1, plane));
      }
    }
  return out;
}

namespace detail {

template <class T>
void store_le(T v, unsigned char* out) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::memcpy(out, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t k = 0; k < sizeof(T) / 2; ++k) std::swap(out[k], out[sizeof(T) - 1 - k]);
}

template <class T>
T load_le(const unsigned char* in) {
  unsigned char tmp[sizeof(T)];
  std::memcpy(tmp, in, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t k = 0; k < sizeof(T) / 2; ++k) std::swap(tmp[k], tmp[sizeof(T) - 1 - k]);
  T v;
  std::memcpy(&v, tmp, sizeof(T));
  return v;
}

}  // namespace detail

/// Positioned-write handle on one file.
class FileHandle {
 public:
  FileHandle() = default;
  FileHandle(const std::string& path, int flags) : path_(path) {
    fd_ = ::open(path.c_str(), flags, 0644);
    if (fd_ < 0) throw IoError("cannot open '" + path + "': " + std::strerror(errno));
  }
  FileHandle(FileHandle&& o) noexcept : fd_(std::exchange(o.fd_, -1)), path_(std::move(o.path_)) {}
  FileHandle& operator=(FileHandle&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
      path_ = std::move(o.path_);
    }
    return *this;
  }
  ~FileHandle() { close(); }

  bool is_open() const { return fd_ >= 0; }

  void write_at(std::uint64_t offset, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::size_t done = 0;
    while (done < n) {
      const auto w = ::pwrite(fd_, p + done, n - done, static_cast<off_t>(offset + done));
      if (w < 0) {
        if (errno == EINTR) continue;
        throw IoError("write to '" + path_ + "' at offset " + std::to_string(offset + done) + " failed: " +
                      std::strerror(errno));
      }
      done += static_cast<std::size_t>(w);
    }
  }

 private:
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_ = -1;
  std::string path_;
};

/// Opens one handle per team thread on `path`, threads taking turns in
/// ascending thread id. Call from every team thread inside an activation;
/// each thread receives its own handle in handles[tid].
class OrderedOpener {
 public:
  explicit OrderedOpener(int team_size) : handles_(team_size) {}

  void open(int tid, const std::string& path) {
    std::unique_lock lk(m_);
    cv_.wait(lk, [&] { return turn_ == tid || failed_; });
    if (failed_) throw IoError("ordered open aborted for thread " + std::to_string(tid));
    try {
      handles_[tid] = FileHandle(path, O_WRONLY);
    } catch (const IoError& e) {
      failed_ = true;
      cv_.notify_all();
      throw IoError("thread " + std::to_string(tid) + ": " + e.what());
    }
    ++turn_;
    cv_.notify_all();
  }
  std::vector<FileHandle>& handles() { return handles_; }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  int turn_ = 0;
  bool failed_ = false;
  std::vector<FileHandle> handles_;
};

inline std::vector<FileHandle> open_handles(const std::string& path, Team& team) {
  OrderedOpener opener(team.size());
  team.activate([&](int tid) { opener.open(tid, path); });
  return std::move(opener.handles());
}

/// Creates (or truncates) every file of the layout at its final size.
inline void prepare_files(const FileLayout& layout, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t f = 0; f < layout.files.size(); ++f) {
    const auto path = (dir / layout.files[f]).string();
    FileHandle h(path, O_WRONLY | O_CREAT | O_TRUNC);
    if (::truncate(path.c_str(), static_cast<off_t>(layout.file_sizes[f])) != 0)
      throw IoError("cannot size '" + path + "': " + std::strerror(errno));
  }
}

inline void write_record(FileHandle& h, const Record& r, std::span<const double> payload, WriteMode mode,
                         RankContext* ctx = nullptr) {
  if (payload.size() != r.count) throw IoError("payload size does not match the record layout");
  const auto marker = static_cast<std::uint32_t>(r.payload_bytes());
  unsigned char m[kIntegerSize];
  detail::store_le(marker, m);
  std::uint64_t ops = 0;
  std::uint64_t disp = r.offset;
  h.write_at(disp, m, kIntegerSize);
  ++ops;
  disp += kIntegerSize;
  if (mode == WriteMode::per_value) {
    unsigned char v[kDoubleSize];
    for (double x : payload) {
      detail::store_le(x, v);
      h.write_at(disp, v, kDoubleSize);
      ++ops;
      disp += kDoubleSize;
    }
  } else {
    std::vector<unsigned char> buf(r.payload_bytes());
    for (std::size_t k = 0; k < payload.size(); ++k) detail::store_le(payload[k], buf.data() + k * kDoubleSize);
    h.write_at(disp, buf.data(), buf.size());
    ++ops;
    disp += buf.size();
  }
  h.write_at(disp, m, kIntegerSize);
  ++ops;
  if (ctx) ctx->add_write_ops(ops);
}

/// Write-operation count of one record.
inline std::uint64_t predicted_write_ops(const Record& r, WriteMode mode) {
  return mode == WriteMode::per_value ? 2 + r.count : 3;
}

struct WriteAssignment {
  std::size_t record = 0;
  int rank = 0;
  int thread = 0;
};

/// Every record must be written by exactly one (rank, thread).
inline void validate_write_plan(const std::vector<WriteAssignment>& plan, const FileLayout& layout) {
  std::vector<int> owner(layout.records.size(), -1);
  for (std::size_t k = 0; k < plan.size(); ++k) {
    const auto& a = plan[k];
    if (a.record >= layout.records.size()) throw PlanError("write plan references unknown record");
    if (owner[a.record] >= 0) {
      const auto& r = layout.records[a.record];
      const auto& prev = plan[owner[a.record]];
      throw PlanError("record (block " + std::to_string(r.block) + ", plane " + std::to_string(r.plane) +
                      ") assigned to rank " + std::to_string(prev.rank) + " thread " + std::to_string(prev.thread) +
                      " and rank " + std::to_string(a.rank) + " thread " + std::to_string(a.thread));
    }
    owner[a.record] = static_cast<int>(k);
  }
  for (std::size_t r = 0; r < owner.size(); ++r)
    if (owner[r] < 0)
      throw PlanError("record (block " + std::to_string(layout.records[r].block) + ", plane " +
                      std::to_string(layout.records[r].plane) + ") has no writer");
}

/// Records go to the rank owning the block; inside a rank, the harmonics
/// axis assigns by plane, the blocks axis by block, and the grid-points axis
/// splits the rank's record list into contiguous runs.
inline std::vector<WriteAssignment> make_write_plan(const FileLayout& layout, const Partition& part,
                                                    const TeamConfig& team) {
  std::vector<WriteAssignment> plan;
  const auto planes = partition_work(layout.nplanes, team.threads);
  for (int rank = 0; rank < part.nranks; ++rank) {
    const auto owned = part.blocks_of(rank);
    std::vector<std::size_t> mine;
    for (std::size_t r = 0; r < layout.records.size(); ++r)
      if (part.rank_of_block[layout.records[r].block] == rank) mine.push_back(r);
    const auto runs = partition_work(static_cast<int>(mine.size()), team.threads);
    const auto blocks = partition_work(static_cast<int>(owned.size()), team.threads);
    for (std::size_t k = 0; k < mine.size(); ++k) {
      const auto& rec = layout.records[mine[k]];
      int tid = 0;
      for (int t = 0; t < team.threads; ++t) {
        bool hit = false;
        switch (team.axis) {
          case Axis::harmonics: hit = planes[t].contains(rec.plane); break;
          case Axis::gridpoints: hit = runs[t].contains(static_cast<int>(k)); break;
          case Axis::blocks: {
            const auto pos = std::find(owned.begin(), owned.end(), rec.block) - owned.begin();
            hit = blocks[t].contains(static_cast<int>(pos));
            break;
          }
        }
        if (hit) {
          tid = t;
          break;
        }
      }
      plan.push_back({mine[k], rank, tid});
    }
  }
  return plan;
}

/// Writes this rank's share of `layout`. Opens per-thread handles on every
/// file with the ordered protocol and writes in one team activation.
inline void write_output(const HarmonicField& field, const Topology& topo, const FileLayout& layout,
                         WriteMode mode, const std::vector<WriteAssignment>& plan, const std::filesystem::path& dir,
                         Team& team, RankContext& ctx) {
  std::vector<std::unique_ptr<OrderedOpener>> openers;
  for (std::size_t f = 0; f < layout.files.size(); ++f) openers.push_back(std::make_unique<OrderedOpener>(team.size()));
  team.activate([&](int tid) {
    for (std::size_t f = 0; f < layout.files.size(); ++f) openers[f]->open(tid, (dir / layout.files[f]).string());
    for (const auto& a : plan) {
      if (a.rank != ctx.rank() || a.thread != tid) continue;
      const auto& rec = layout.records[a.record];
      const auto payload = record_payload(field.block(rec.block), topo.blocks[rec.block], layout.kind, rec.plane);
      write_record(openers[rec.file]->handles()[tid], rec, payload, mode, &ctx);
    }
  });
}

/// Whole-file read.
inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat '" + path.string() + "'");
  std::vector<unsigned char> out(size);
  if (!in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(size)))
    throw IoError("short read on '" + path.string() + "'");
  return out;
}

/// Reads every record back, checking both markers. Keyed by (block, plane).
inline std::map<std::pair<int, int>, std::vector<double>> read_records(const FileLayout& layout,
                                                                       const std::filesystem::path& dir) {
  std::map<std::pair<int, int>, std::vector<double>> out;
  std::vector<std::vector<unsigned char>> bytes(layout.files.size());
  for (std::size_t f = 0; f < layout.files.size(); ++f) {
    const auto path = dir / layout.files[f];
    bytes[f] = read_file(path);
    if (bytes[f].size() != layout.file_sizes[f]) throw IoError("'" + path.string() + "' has unexpected size");
  }
  for (const auto& r : layout.records) {
    const auto* base = bytes[r.file].data() + r.offset;
    const auto pre = detail::load_le<std::uint32_t>(base);
    const auto post = detail::load_le<std::uint32_t>(base + kIntegerSize + r.payload_bytes());
    if (pre != r.payload_bytes() || post != r.payload_bytes())
      throw IoError("bad record marker at offset " + std::to_string(r.offset) + " of " + layout.files[r.file]);
    std::vector<double> v(r.count);
    for (std::uint64_t k = 0; k < r.count; ++k) v[k] = detail::load_le<double>(base + kIntegerSize + k * kDoubleSize);
    out[{r.block, r.plane}] = std::move(v);
  }
  return out;
}

/// Rebuilds interior values of every block from a restart file.
inline std::vector<BlockArray> read_restart(const Topology& topo, int nharms, const std::filesystem::path& dir) {
  const auto layout = compute_layout(topo, nharms, kNpde, FileKind::restart);
  const auto recs = read_records(layout, dir);
  std::vector<BlockArray> out;
  for (const auto& b : topo.blocks) {
    BlockArray q(b.id, b.ni, b.nj, kNpde, layout.nplanes);
    std::fill_n(q.data(), q.size(), 0.0);
    for (int n = 0; n < layout.nplanes; ++n) {
      const auto& v = recs.at({b.id, n});
      std::size_t k = 0;
      for (int j = 1; j <= b.nj; ++j)
        for (int i = 1; i <= b.ni; ++i)
          for (int p = 0; p < kNpde; ++p) q(i, j, p, n) = v[k++];
    }
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace hbp
