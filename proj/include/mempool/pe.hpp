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

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mempool/engine.hpp"
#include "mempool/icache.hpp"

namespace mempool {

using Rng = std::mt19937_64;

/// Independent, reproducible stream for one core of one run.
Rng core_rng(std::uint64_t seed, unsigned core);

enum class KernelName : std::uint8_t { Matmul, Conv, Dct, Axpy, Dotp };

std::string_view to_string(KernelName k);
KernelName parse_kernel(std::string_view name);

/// Access-pattern description of one benchmark kernel, per core and per
/// (unrolled) loop iteration.
struct KernelPreset {
  KernelName name = KernelName::Axpy;
  unsigned loads_per_iter = 2;
  unsigned stores_per_iter = 1;
  unsigned compute_per_iter = 1;
  bool compute_is_mac = true;
  double local_fraction = 1.0;  // share of accesses in the core's own tile
  unsigned iterations = 64;
  unsigned unroll = 4;          // independent copies interleaved per iteration
  bool reduction = false;       // finish with an atomic add to a shared word
  double dma_in_bytes_per_iter = 0;
  double dma_out_bytes_per_iter = 0;

  unsigned loads() const { return loads_per_iter * unroll; }
  unsigned stores() const { return stores_per_iter * unroll; }
  unsigned computes() const { return compute_per_iter * unroll; }
};

KernelPreset kernel_preset(KernelName name);

struct TrafficConfig {
  enum class Kind : std::uint8_t { Uniform, HybridLocal, Kernel };
  Kind kind = Kind::Uniform;
  double lambda = 0.0;
  double p_local = 0.0;
  KernelName preset = KernelName::Axpy;
  std::uint64_t seed = 1;

  void check() const;
};

/// Abstract instruction of the kernel model.
struct Instr {
  enum class Op : std::uint8_t { Compute, Mac, Branch, Load, Store, Amo, Barrier };
  Op op = Op::Compute;
  std::int8_t dst = -1;
  std::array<std::int8_t, 2> src{-1, -1};
  Addr addr = 0;  // logical L1 address for memory ops
  Word value = 0;
  AmoKind amo = AmoKind::Add;
  Addr pc = 0;

  bool is_memory() const { return op == Op::Load || op == Op::Store || op == Op::Amo || op == Op::Barrier; }
};

/// In-order instruction stream consumed by advance().
struct Program {
  std::vector<Instr> code;
  std::size_t next = 0;

  bool done() const { return next >= code.size(); }
  const Instr& peek() const { return code[next]; }
};

inline constexpr unsigned kRegisters = 32;

struct PEModel {
  enum class State : std::uint8_t { Running, SleepingAtBarrier, StalledRaw, StalledLsu, Done };
  struct Outstanding {
    ReqId id;
    std::int8_t dst;
    Cycle generated;
  };
  struct Generated {
    Addr addr;
    Cycle generated;
  };

  unsigned core = 0;
  unsigned max_outstanding = 8;
  std::vector<Outstanding> scoreboard;
  std::deque<Generated> source;  // traffic generated but not yet accepted by the network
  State state = State::Running;
  std::array<Cycle, kRegisters> reg_ready{};  // cycle a register value becomes usable
  Cycle wake_at = 0;

  unsigned in_use() const { return unsigned(scoreboard.size() + source.size()); }
  bool retire(ReqId id, Cycle now, Cycle* generated = nullptr);
};

/// Synthetic traffic: one Bernoulli(lambda) draw per cycle while fewer than
/// max_outstanding requests are generated-but-incomplete. Returns the
/// generated logical word address, already queued in pe.source.
std::optional<Addr> gen_next(PEModel& pe, const TrafficConfig& traffic, Cycle cycle, Rng& rng,
                             const ValidatedConfig& cfg);

/// Cause charged to one core-cycle.
enum class CycleClass : std::uint8_t { Compute, Control, Sync, Icache, Lsu, Raw };

struct AdvanceResult {
  CycleClass charged = CycleClass::Compute;
  std::optional<ReqId> issued;
};

/// Attempts to issue the next instruction of `program` on `pe` this cycle.
/// `fetch_ok` reports whether the instruction fetch hit this cycle.
AdvanceResult advance(PEModel& pe, Program& program, Engine& engine, unsigned mac_depth,
                      bool fetch_ok = true);

/// Resume cycle shared by all participants: max(arrivals) + wakeup.
Cycle barrier(const std::vector<Cycle>& arrivals, unsigned wakeup_latency);

void charge(StallBreakdown& s, CycleClass c);

/// Kernel access-pattern program for one core.
Program make_kernel_program(const KernelPreset& preset, unsigned core, const ValidatedConfig& cfg,
                            std::uint64_t seed, Addr barrier_addr, Addr reduction_addr);

struct KernelOptions {
  unsigned mac_depth = 2;
  unsigned max_outstanding = 8;
  std::uint64_t seed = 1;
  bool model_icache = true;
  std::optional<IcacheConfig> icache;  // defaults to the optimized organization
  std::optional<unsigned> iterations;  // overrides the preset
  unsigned active_cores = 0;           // 0 = all
};

struct KernelResult {
  KernelName kernel = KernelName::Axpy;
  Cycle cycles = 0;  // until every core resumes from the final barrier
  StallBreakdown stalls;
  std::uint64_t instructions = 0;
  std::uint64_t requests = 0;
  Word reduction_value = 0;
  double ipc() const { return stalls.ipc(); }
};

KernelResult run_kernel(const NetworkModel& net, const KernelPreset& preset, const KernelOptions& opt = {});

/// Measurement of one (topology, traffic) point.
struct TrafficResult {
  double lambda = 0;
  double p_local = 0;
  double offered = 0;   // generated requests per core per cycle in the window
  double accepted = 0;  // completed requests per core per cycle in the window
  double mean_latency = 0;       // round trip, issue to response
  double mean_source_wait = 0;   // generation to issue
  Cycle p50_latency = 0;
  Cycle p99_latency = 0;
  std::array<double, kRouteClassSlots> class_latency{};
  std::array<std::uint64_t, kRouteClassSlots> class_count{};
  std::uint64_t generated = 0;
  std::uint64_t completed = 0;
};

struct TrafficRunOptions {
  Cycle warmup = 2000;
  Cycle window = 20000;
  unsigned max_outstanding = 8;
  bool drain = true;  // drain and check conservation afterwards
};

TrafficResult run_traffic(const NetworkModel& net, const TrafficConfig& traffic, const TrafficRunOptions& opt = {});

}  // namespace mempool
