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
#include <deque>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mempool/geometry.hpp"

namespace mempool {

enum class StoreKind : std::uint8_t { Sram, Scm, Latch };
enum class L1Lookup : std::uint8_t { Parallel, Serial };

struct L0Config {
  unsigned lines = 4;
  unsigned line_instrs = 8;
  bool prefetch = true;
  unsigned prefetch_depth = 1;  // lines fetched ahead of the current one
  StoreKind store = StoreKind::Scm;

  unsigned line_bytes() const { return line_instrs * kWordBytes; }
  unsigned capacity_instrs() const { return lines * line_instrs; }
};

struct L1IcacheConfig {
  unsigned size_bytes = 2048;
  unsigned ways = 2;
  unsigned line_bytes = 32;
  L1Lookup lookup = L1Lookup::Parallel;
  StoreKind tag_store = StoreKind::Sram;
  StoreKind data_store = StoreKind::Sram;

  unsigned sets() const { return size_bytes / (ways * line_bytes); }
  unsigned lookup_cycles() const { return lookup == L1Lookup::Parallel ? 1 : 2; }
};

struct IcacheConfig {
  std::string name = "2-way";
  L0Config l0;
  L1IcacheConfig l1;
  unsigned refill_latency = 4;  // L1 miss to line available, from the RO cache
  unsigned refill_bus_bytes = 16;

  /// Validates both levels; throws ConfigError.
  void check() const;
};

/// Named cache organizations. Accepts baseline, wide-l0, 2-way, l1-tag-latch,
/// l1-all-latch, l1-tag-l0-latch and serial-l1 (case-insensitive).
IcacheConfig icache_preset(std::string_view name);
std::vector<std::string> icache_preset_names();

struct FetchEntry {
  enum class Mark : std::uint8_t { None, BackwardBranch, Jump };
  Addr pc = 0;
  Mark mark = Mark::None;
  Addr target = 0;
};

/// Dynamic fetch sequence plus the static branch markers it carries.
struct FetchTrace {
  std::vector<FetchEntry> entries;

  /// One PC per line, decimal or 0x-hex, optionally followed by
  /// `B <target>` (backward branch) or `J <target>` (direct jump).
  /// Blank lines and `#` comments are skipped.
  static FetchTrace parse(std::istream& in);
  static FetchTrace parse(std::string_view text);

  /// `iterations` passes over a `body`-instruction loop starting at `base`.
  static FetchTrace loop(Addr base, unsigned body, unsigned iterations);
  /// `n` consecutive instructions from `base`.
  static FetchTrace straight(Addr base, unsigned n);
};

class TraceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IcacheStats {
  std::uint64_t fetches = 0;
  std::uint64_t l0_hits = 0;
  std::uint64_t l0_misses = 0;  // refill requests sent to L1, demand and prefetch
  std::uint64_t prefetches = 0;
  std::uint64_t l1_lookups = 0;
  std::uint64_t l1_hits = 0;
  std::uint64_t l1_misses = 0;
  std::uint64_t refills_coalesced = 0;
  std::uint64_t stall_cycles = 0;
  std::uint64_t cycles = 0;
  std::uint64_t tag_reads = 0;
  std::uint64_t data_way_reads = 0;
  std::uint64_t refill_beats = 0;
  std::vector<bool> l1_outcomes;  // per lookup, true on hit

  bool operator==(const IcacheStats&) const = default;
};

/// Outcome of handing one line request to the L1 refill logic.
struct RefillEvent {
  Addr line = 0;
  std::vector<unsigned> requesters;
  Cycle ready = 0;
  bool hit = false;
};

/// Per-tile L1 plus the private L0 of every core in the tile.
class TileIcache {
 public:
  TileIcache(const IcacheConfig& cfg, unsigned cores);

  /// Registers static branch markers so line scans can predict the next line.
  void learn(const FetchTrace& trace);
  void mark(Addr pc, FetchEntry::Mark mark, Addr target);

  /// Advances the L1 by one cycle; call once per cycle before any fetch().
  void tick(Cycle now);
  /// True when `core` can take the instruction at `pc` this cycle.
  bool fetch(unsigned core, Addr pc, Cycle now);

  /// Direct L1 access for one line on behalf of `requesters`; one lookup
  /// regardless of the requester count.
  RefillEvent refill(Addr line, std::vector<unsigned> requesters, Cycle now);

  /// No line request waiting for the L1.
  bool idle() const { return queue_.empty(); }
  const IcacheStats& stats() const { return stats_; }
  const IcacheConfig& config() const { return cfg_; }

 private:
  struct L0Line {
    Addr line;
    Cycle ready;
  };
  struct L0State {
    std::deque<L0Line> lines;  // oldest first
    bool pending_demand = false;
    Addr last_line = ~Addr{0};
  };
  struct Pending {
    Addr line;
    std::vector<unsigned> requesters;
  };
  struct L1Way {
    Addr tag;
    bool valid;
    Cycle ready;
    std::uint64_t used;
  };

  Addr predict_next(Addr line) const;
  L0Line* l0_find(unsigned core, Addr line);
  void request(unsigned core, Addr line, bool prefetch);
  bool l1_lookup(Addr line, Cycle now, Cycle& ready);

  IcacheConfig cfg_;
  std::vector<L0State> l0_;
  std::deque<Pending> queue_;
  std::vector<L1Way> l1_;
  std::uint64_t use_clock_ = 0;
  std::unordered_map<Addr, Addr> markers_;  // pc -> target of backward branch / jump
  IcacheStats stats_;
};

/// Replays `trace` on every core of one tile (SPMD); each core retires one
/// instruction per cycle unless its fetch stalls.
IcacheStats run_trace(const FetchTrace& trace, const IcacheConfig& cfg, unsigned cores = 1);

/// Energy-proxy counters implied by the lookup organization.
IcacheStats proxy_counts(const IcacheConfig& cfg, const FetchTrace& trace);

}  // namespace mempool
