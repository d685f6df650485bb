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
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mempool/geometry.hpp"

namespace mempool {

enum class TopologyKind { One, Four, Hybrid };

std::string_view to_string(TopologyKind kind);
TopologyKind parse_topology(std::string_view name);

enum class Direction : std::uint8_t { North, NorthEast, East };

struct RouteClass {
  enum class Kind : std::uint8_t { LocalTile, LocalGroup, RemoteGroup };
  Kind kind = Kind::LocalTile;
  Direction direction = Direction::North;  // RemoteGroup only

  static RouteClass local_tile() { return {Kind::LocalTile, Direction::North}; }
  static RouteClass local_group() { return {Kind::LocalGroup, Direction::North}; }
  static RouteClass remote(Direction d) { return {Kind::RemoteGroup, d}; }

  bool operator==(const RouteClass& o) const {
    return kind == o.kind && (kind != Kind::RemoteGroup || direction == o.direction);
  }
};

inline constexpr unsigned kRouteClassSlots = 3;
inline unsigned slot_of(RouteClass c) { return unsigned(c.kind); }

class UnsupportedGeometry : public std::runtime_error {
 public:
  UnsupportedGeometry(TopologyKind kind, const std::string& reason);
};

using ResourceId = std::uint32_t;
using QueueId = std::uint32_t;
inline constexpr ResourceId kNoResource = ~ResourceId{0};

enum class ResourceKind : std::uint8_t {
  TxPort,
  Switch,
  PipelineReg,
  Bank,
  RespTxPort,
  RespSwitch,
  RespPipelineReg,
};

/// One arbitration point: grants at most one request per cycle.
struct ResourceSpec {
  ResourceKind kind;
  unsigned stage;               // evaluation order within a cycle
  std::vector<QueueId> inputs;  // round-robin order
};

enum class QueueKind : std::uint8_t { CoreHead, Link, Wire, BankResponse, Dma };

struct QueueSpec {
  QueueKind kind;
  unsigned capacity;  // 0 for combinational wires
};

/// A request sits in `in_queue` until `resource` grants it; it is then ready
/// at the next hop `latency` cycles later. Latency 0 means the grant chains
/// combinationally into the next hop in the same cycle.
struct Hop {
  ResourceId resource;
  QueueId in_queue;
  unsigned latency;
};

/// Immutable port/switch graph for one topology instance.
class NetworkModel {
 public:
  TopologyKind kind() const { return kind_; }
  const ValidatedConfig& config() const { return cfg_; }

  std::span<const ResourceSpec> resources() const { return resources_; }
  std::span<const QueueSpec> queues() const { return queues_; }
  /// Resources sorted by stage; the engine evaluates them in this order.
  std::span<const ResourceId> evaluation_order() const { return order_; }

  unsigned tx_ports_per_tile() const { return tx_ports_; }
  unsigned rx_ports_per_tile() const { return rx_ports_; }
  unsigned butterfly_layers() const { return layers_; }
  unsigned num_switches() const { return switches_; }

  ResourceId bank_resource(unsigned bank) const { return bank_base_ + bank; }
  QueueId core_head_queue(unsigned core) const { return core_head_base_ + core; }
  QueueId bank_response_queue(unsigned bank) const { return bank_resp_base_ + bank; }
  QueueId dma_queue(unsigned bank) const { return dma_base_ + bank; }

  /// Network hops from a core to the destination tile, excluding the bank.
  std::span<const Hop> request_prefix(unsigned src_core, unsigned dst_tile) const;
  /// Queue through which a request arriving via `prefix` enters `bank`.
  QueueId bank_input(unsigned src_core, unsigned bank) const;
  /// Hops a response takes from the bank's tile back to the core. The first
  /// hop's in_queue is the bank response queue and must be substituted.
  std::span<const Hop> response_prefix(unsigned bank_tile, unsigned dst_core) const;

  /// Zero-load round trip of the concrete route in this topology.
  unsigned route_latency(unsigned src_core, unsigned dst_tile) const;
  unsigned bank_latency() const { return cfg_.timing.latency_local_tile; }

  /// Number of switches / crossbars the request traverses.
  unsigned hop_count(unsigned src_core, unsigned dst_tile) const {
    return unsigned(request_prefix(src_core, dst_tile).size());
  }

  /// Human-readable name of a resource, for diagnostics.
  std::string describe(ResourceId r) const;

 private:
  friend NetworkModel build(TopologyKind kind, const ValidatedConfig& cfg);
  struct Builder;

  TopologyKind kind_ = TopologyKind::Hybrid;
  ValidatedConfig cfg_;
  std::vector<ResourceSpec> resources_;
  std::vector<QueueSpec> queues_;
  std::vector<ResourceId> order_;
  std::vector<std::string> labels_;
  unsigned tx_ports_ = 0;
  unsigned rx_ports_ = 0;
  unsigned layers_ = 0;
  unsigned switches_ = 0;

  ResourceId bank_base_ = 0;
  QueueId core_head_base_ = 0;
  QueueId bank_resp_base_ = 0;
  QueueId dma_base_ = 0;

  // Flattened route templates indexed by (src core, dst tile).
  std::vector<Hop> hops_;
  std::vector<std::uint32_t> req_offset_;  // size cores*tiles+1
  std::vector<QueueId> bank_link_base_;    // per (src core, dst tile): shared tile input queue
  std::vector<Hop> resp_hops_;
  std::vector<std::uint32_t> resp_offset_;  // per (bank tile, dst core)
};

NetworkModel build(TopologyKind kind, const ValidatedConfig& cfg);

RouteClass classify(unsigned src_tile, unsigned dst_tile, const ValidatedConfig& cfg);

unsigned zero_load_latency(RouteClass c, const TimingParams& timing);

}  // namespace mempool
