/*
 * Copyright 2026 The mempool-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mempool/engine.hpp"

namespace mempool {

/// Base of the system (L2) address space; everything below is L1.
inline constexpr Addr kL2Base = 0x8000'0000;

class RangeOutOfMemory : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

struct UplinkParams {
  unsigned backends_per_group = 4;
  unsigned axi_width = 64;           // bytes per cycle per group port and direction
  unsigned axi_radix = 16;
  unsigned backend_outstanding = 8;  // AXI transactions in flight per backend
  unsigned axi_min_txn_cycles = 2;   // minimum data-channel occupancy of one burst
  unsigned rocache_bytes = 8192;
  unsigned rocache_line_bytes = 32;
  unsigned rocache_ways = 2;
  unsigned rocache_stages = 4;
  Addr l2_bytes = Addr{8} << 20;

  void check(const ValidatedConfig& cfg) const;
};

/// Hierarchical request tree from tiles and DMA backends to the group ports.
class AxiTree {
 public:
  AxiTree(const ValidatedConfig& cfg, const UplinkParams& up);

  unsigned radix() const { return radix_; }
  unsigned top_ports() const { return groups_; }
  unsigned leaves() const { return unsigned(leaf_parent_.size()); }
  unsigned channel_width() const { return width_; }
  /// Leaf index of a tile, or of a DMA backend.
  unsigned tile_leaf(unsigned tile) const { return tile; }
  unsigned backend_leaf(unsigned backend) const { return tiles_ + backend; }
  /// Nodes from the leaf's parent up to and including its top port.
  std::vector<unsigned> path(unsigned leaf) const;
  /// Group port index in [0, top_ports()).
  unsigned top_port_of(unsigned leaf) const;

  /// Byte accounting for conservation checks.
  void record(unsigned leaf, std::uint64_t bytes);
  std::uint64_t leaf_bytes() const { return leaf_bytes_; }
  std::uint64_t top_bytes() const;
  std::uint64_t node_bytes(unsigned node) const { return node_bytes_[node]; }

 private:
  unsigned radix_, groups_, tiles_, width_;
  std::vector<unsigned> leaf_parent_;
  std::vector<unsigned> node_parent_;  // kRoot for top ports
  std::vector<unsigned> node_group_;
  std::vector<bool> is_top_;
  std::vector<std::uint64_t> node_bytes_;
  std::uint64_t leaf_bytes_ = 0;
};

enum class BurstDir : std::uint8_t { Read, Write };  // Read: L2 to L1

struct DmaRequest {
  Addr src = 0;
  Addr dst = 0;
  std::uint64_t len = 0;

  bool l1_is_dst() const { return dst < kL2Base; }
  Addr l1_addr() const { return l1_is_dst() ? dst : src; }
  Addr l2_addr() const { return l1_is_dst() ? src : dst; }
};

struct Burst {
  std::uint32_t id = 0;
  unsigned backend = 0;  // global backend index
  Addr l1_addr = 0;      // logical
  Addr l2_addr = 0;
  std::uint64_t len_bytes = 0;
  BurstDir dir = BurstDir::Read;
};

struct BackendRegion {
  unsigned backend = 0;
  unsigned first_tile = 0;
  unsigned tiles = 0;
};

std::vector<BackendRegion> backend_regions(const ValidatedConfig& cfg, unsigned backends_per_group);

/// Cuts a transfer at L1-line boundaries (all banks x one word) of its L1 side.
std::vector<DmaRequest> dma_split(const DmaRequest& req, const ValidatedConfig& cfg);

/// Splits one chunk into maximal contiguous runs owned by a single backend.
std::vector<Burst> dma_distribute(const DmaRequest& chunk, const ValidatedConfig& cfg,
                                  const std::vector<BackendRegion>& regions);

/// Flat byte-addressable system memory behind the group ports.
class L2Memory {
 public:
  explicit L2Memory(Addr bytes) : bytes_(bytes, 0) {}
  Addr size() const { return Addr(bytes_.size()); }
  std::uint8_t& at(Addr addr);
  std::uint8_t at(Addr addr) const;
  Word word(Addr addr) const;
  void set_word(Addr addr, Word v);

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Read-only cache in front of L2: axi-to-cache, lookup, handler, response.
class RoCache {
 public:
  struct Stats {
    std::uint64_t hits = 0;
    std::uint64_t misses = 0;
    std::uint64_t coalesced = 0;
    std::uint64_t l2_refills = 0;
    std::uint64_t bypasses = 0;
  };
  struct Line {
    Addr line;
    Cycle response;
    std::vector<std::uint8_t> data;
  };

  RoCache(const UplinkParams& up, unsigned l2_latency, const L2Memory* memory = nullptr);

  void enable_range(Addr begin, Addr end);
  bool cacheable(Addr addr) const;
  void flush();

  /// One line-sized request from `master` accepted no earlier than `cycle`.
  /// Returns the cycle its response leaves the cache.
  Cycle access(unsigned master, Addr addr, Cycle cycle);
  const Stats& stats() const { return stats_; }
  unsigned line_bytes() const { return line_bytes_; }
  unsigned stages() const { return stages_; }
  const L2Memory* memory() const { return memory_; }

 private:
  struct Way {
    Addr tag;
    bool valid;
    Cycle ready;
    std::uint64_t used;
  };
  unsigned line_bytes_, ways_, sets_, stages_, l2_latency_;
  std::vector<Way> ways_state_;
  std::vector<std::pair<Addr, Addr>> ranges_;
  std::vector<Cycle> last_response_;  // per master
  Cycle next_accept_ = 0;
  std::uint64_t clock_ = 0;
  const L2Memory* memory_;
  Stats stats_;
};

/// Breaks a read burst into line requests; responses in order for the master.
std::vector<RoCache::Line> rocache_access(RoCache& cache, const Burst& burst, unsigned master, Cycle cycle);

struct TransferStats {
  std::uint64_t bytes = 0;
  Cycle cycles = 0;      // setup through the last L1 side completion
  Cycle bus_cycles = 0;  // first address request to last data beat
  unsigned active_ports = 0;
  unsigned bursts = 0;
  unsigned backends = 0;  // per group
  double utilization = 0;        // bytes / (bus_cycles x active_ports x width)
  double system_utilization = 0; // bytes / (cycles x l2_bandwidth)
};

/// Cycle-level transfer through the backends, the group ports and the L1
/// banks. Moves real data between `l2` and the engine's banks.
TransferStats dma_run(const DmaRequest& req, Engine& engine, L2Memory& l2, const UplinkParams& up);

}  // namespace mempool
