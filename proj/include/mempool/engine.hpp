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
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mempool/addrmap.hpp"
#include "mempool/topology.hpp"

namespace mempool {

using ReqId = std::uint64_t;

enum class OpKind : std::uint8_t { Read, Write, Amo, LoadReserved, StoreConditional };
enum class AmoKind : std::uint8_t { Add, Max, Maxu, Min, Minu, And, Or, Xor, Swap };

struct MemOp {
  OpKind kind = OpKind::Read;
  AmoKind amo = AmoKind::Add;
  Word value = 0;  // store data, AMO operand or SC data

  static MemOp read() { return {OpKind::Read, AmoKind::Add, 0}; }
  static MemOp write(Word v) { return {OpKind::Write, AmoKind::Add, v}; }
  static MemOp atomic(AmoKind k, Word operand) { return {OpKind::Amo, k, operand}; }
  static MemOp load_reserved() { return {OpKind::LoadReserved, AmoKind::Add, 0}; }
  static MemOp store_conditional(Word v) { return {OpKind::StoreConditional, AmoKind::Add, v}; }
};

/// New memory value after an atomic; the response carries the old one.
Word amo_apply(AmoKind kind, Word old, Word operand);

struct Request {
  ReqId id = 0;
  unsigned source = 0;  // core index, or num_cores() + tag for DMA traffic
  MemOp op;
  Addr addr = 0;  // physical, word aligned
  Cycle issue_cycle = 0;
};

struct Response {
  ReqId id = 0;
  unsigned source = 0;
  Word value = 0;  // load data, AMO old value, or SC flag (0 = success)
  Cycle issue_cycle = 0;
  Cycle complete_cycle = 0;
  RouteClass route;
  OpKind kind = OpKind::Read;
  Addr addr = 0;
};

/// Per-bank storage and reservation register.
struct BankState {
  struct Reservation {
    unsigned row;
    unsigned source;
  };
  std::vector<Word> words;
  std::optional<Reservation> reservation;
};

/// Executes an LR or SC against one bank.
Word lrsc(BankState& bank, unsigned row, unsigned source, const MemOp& op);

/// Breakdown of core-cycles by cause. Components partition cycles x cores.
struct StallBreakdown {
  std::uint64_t compute_cycles = 0;
  std::uint64_t control_cycles = 0;
  std::uint64_t synchronization_cycles = 0;
  std::uint64_t icache_stall_cycles = 0;
  std::uint64_t lsu_stall_cycles = 0;
  std::uint64_t raw_stall_cycles = 0;

  std::uint64_t total() const {
    return compute_cycles + control_cycles + synchronization_cycles + icache_stall_cycles +
           lsu_stall_cycles + raw_stall_cycles;
  }
  double ipc() const {
    const auto t = total();
    return t ? double(compute_cycles + control_cycles) / double(t) : 0.0;
  }
  StallBreakdown& operator+=(const StallBreakdown& o);
  bool operator==(const StallBreakdown&) const = default;
};

struct SimStats {
  static constexpr std::size_t kHistogramBins = 512;

  Cycle cycles_run = 0;
  std::uint64_t injected = 0;
  std::uint64_t completed = 0;
  std::vector<std::uint64_t> latency_histogram = std::vector<std::uint64_t>(kHistogramBins, 0);
  std::array<std::uint64_t, kRouteClassSlots> class_count{};
  std::array<std::uint64_t, kRouteClassSlots> class_latency_sum{};
  std::vector<std::uint64_t> bank_conflicts;
  std::uint64_t bank_operations = 0;
  StallBreakdown stalls;

  double mean_latency(RouteClass::Kind k) const {
    const auto i = std::size_t(k);
    return class_count[i] ? double(class_latency_sum[i]) / double(class_count[i]) : 0.0;
  }
  bool operator==(const SimStats&) const = default;
};

class DrainTimeout : public std::runtime_error {
 public:
  explicit DrainTimeout(std::uint64_t in_flight);
};

class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// One bank operation in execution order; used to replay against oracles.
struct ExecRecord {
  Cycle cycle;
  ReqId id;
  unsigned source;
  MemOp op;
  Addr addr;
  Word result;
};

/// Deterministic cycle-by-cycle simulation of one cluster's L1 interconnect.
///
/// Within a cycle the driver first reads completions(), then issues requests
/// (stamped with now()), then calls step(). step() arbitrates every resource
/// in stage order. A grant into a zero-latency hop forwards the request to the
/// next resource combinationally; the chain commits only when it reaches a
/// registered queue with space or the bank, otherwise every resource on it
/// idles for the cycle. Space is judged on start-of-cycle occupancy.
class Engine {
 public:
  explicit Engine(const NetworkModel& net);

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  const NetworkModel& network() const { return net_; }
  const ValidatedConfig& config() const { return net_.config(); }
  const AddressLayout& layout() const { return layout_; }
  Cycle now() const { return now_; }

  bool can_issue(unsigned core) const;
  /// Issues from a core; `logical_addr` passes through the hybrid scrambler.
  ReqId issue(unsigned core, const MemOp& op, Addr logical_addr);

  bool can_issue_dma(Addr physical_addr) const;
  /// DMA backend access through the tile-local crossbar. `tag` identifies the
  /// backend in the response's source field (num_cores() + tag).
  ReqId issue_dma(unsigned tag, const MemOp& op, Addr physical_addr);

  void step();
  /// Responses delivered at the start of the current cycle.
  std::span<const Response> completions() const { return completions_; }

  std::uint64_t in_flight() const { return stats_.injected - stats_.completed; }
  const SimStats& stats() const { return stats_; }
  SimStats& mutable_stats() { return stats_; }

  /// Steps until nothing is in flight. Throws DrainTimeout past the bound.
  SimStats drain();

  Word peek(Addr physical) const;
  void poke(Addr physical, Word value);
  const BankState& bank(unsigned index) const { return banks_[index]; }

  void enable_exec_log(bool on) { log_enabled_ = on; }
  std::span<const ExecRecord> exec_log() const { return exec_log_; }

 private:
  using SlotId = std::uint32_t;
  static constexpr std::uint32_t kNone = ~0u;

  struct Slot {
    Request req;
    RouteClass route;
    const Hop* req_hops = nullptr;
    const Hop* resp_hops = nullptr;
    std::uint8_t n_req = 0;
    std::uint8_t n_resp = 0;
    std::uint8_t phase = 0;  // 0 request, 1 response
    std::uint8_t hop = 0;
    unsigned bank = 0;
    unsigned row = 0;
    QueueId bank_queue = 0;
    Cycle ready = 0;
    Word value = 0;
    bool direct_response = false;
  };

  struct QueueState {
    std::uint32_t offset = 0;
    std::uint32_t capacity = 0;
    std::uint32_t head = 0;
    std::uint32_t count = 0;
    std::uint32_t pops = 0;
    std::uint32_t tentative = kNone;  // chain index, wires only
  };

  static constexpr unsigned kMaxChain = 8;
  struct Chain {
    SlotId slot;
    QueueId origin;
    std::uint8_t steps = 0;
    std::array<std::pair<ResourceId, std::uint32_t>, kMaxChain> step{};
  };

  SlotId alloc_slot();
  void free_slot(SlotId s);
  ResourceId current_resource(const Slot& s) const;
  unsigned current_latency(const Slot& s) const;
  QueueId next_queue(const Slot& s) const;  // kNone if delivery / bank
  bool has_space(QueueId q) const;
  void push(QueueId q, SlotId s, Cycle ready);
  SlotId pop(QueueId q);
  SlotId head(QueueId q) const { return ring_[qs_[q].offset + qs_[q].head]; }
  void arbitrate(ResourceId r);
  void forward(std::uint32_t chain_idx);
  void commit(const Chain& chain);
  void execute_at_bank(SlotId s);
  void deliver(SlotId s, Cycle when);
  void check_conservation() const;

  const NetworkModel& net_;
  AddressLayout layout_;
  Cycle now_ = 0;
  ReqId next_id_ = 1;

  std::vector<Slot> slots_;
  std::vector<SlotId> free_slots_;
  std::vector<QueueState> qs_;
  std::vector<SlotId> ring_;
  std::vector<ResourceId> queue_target_;  // fixed downstream resource, or kNoResource
  std::vector<std::uint32_t> rr_;
  std::vector<std::uint32_t> waiting_;
  std::vector<std::uint32_t> tentative_count_;
  std::vector<Chain> chains_;
  std::vector<QueueId> touched_;

  std::vector<std::vector<SlotId>> calendar_;  // deliveries by cycle modulo size
  std::vector<Response> completions_;
  std::vector<BankState> banks_;
  std::vector<std::uint32_t> core_outstanding_;

  SimStats stats_;
  bool log_enabled_ = false;
  std::vector<ExecRecord> exec_log_;
};

}  // namespace mempool
