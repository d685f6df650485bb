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

#include "mempool/topology.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <numeric>

namespace mempool {

namespace {

constexpr unsigned kRadix = 4;
constexpr unsigned kBankStage = 20;
constexpr unsigned kRespStage = 21;

bool is_pow4(unsigned v) {
  while (v > 1) {
    if (v % kRadix) return false;
    v /= kRadix;
  }
  return v == 1;
}

unsigned log4(unsigned v) {
  unsigned n = 0;
  while (v > 1) {
    v /= kRadix;
    ++n;
  }
  return n;
}

unsigned digit(unsigned v, unsigned j) {
  for (unsigned i = 0; i < j; ++i) v /= kRadix;
  return v % kRadix;
}

unsigned set_digit(unsigned v, unsigned j, unsigned d) {
  unsigned scale = 1;
  for (unsigned i = 0; i < j; ++i) scale *= kRadix;
  return v - digit(v, j) * scale + d * scale;
}

}  // namespace

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::One: return "one";
    case TopologyKind::Four: return "four";
    case TopologyKind::Hybrid: return "hybrid";
  }
  return "?";
}

TopologyKind parse_topology(std::string_view name) {
  if (name == "one" || name == "1") return TopologyKind::One;
  if (name == "four" || name == "4") return TopologyKind::Four;
  if (name == "hybrid" || name == "h" || name == "H") return TopologyKind::Hybrid;
  throw ConfigError("unknown topology '" + std::string(name) + "'");
}

UnsupportedGeometry::UnsupportedGeometry(TopologyKind kind, const std::string& reason)
    : std::runtime_error("topology " + std::string(to_string(kind)) + ": " + reason) {}

RouteClass classify(unsigned src_tile, unsigned dst_tile, const ValidatedConfig& cfg) {
  if (src_tile == dst_tile) return RouteClass::local_tile();
  const unsigned gs = cfg.group_of_tile(src_tile);
  const unsigned gd = cfg.group_of_tile(dst_tile);
  if (gs == gd) return RouteClass::local_group();
  const unsigned diff = (gd + cfg.geometry.groups - gs) % cfg.geometry.groups;
  switch (diff) {
    case 1: return RouteClass::remote(Direction::North);
    case 2: return RouteClass::remote(Direction::NorthEast);
    default: return RouteClass::remote(Direction::East);
  }
}

unsigned zero_load_latency(RouteClass c, const TimingParams& timing) {
  switch (c.kind) {
    case RouteClass::Kind::LocalTile: return timing.latency_local_tile;
    case RouteClass::Kind::LocalGroup: return timing.latency_local_group;
    case RouteClass::Kind::RemoteGroup: return timing.latency_remote_group;
  }
  return 0;
}

struct NetworkModel::Builder {
  NetworkModel& m;
  std::map<std::pair<ResourceId, ResourceId>, std::pair<QueueId, unsigned>> links;
  std::map<ResourceId, std::pair<QueueId, unsigned>> bank_links;

  ResourceId add_resource(ResourceKind kind, unsigned stage, std::string label) {
    m.resources_.push_back({kind, stage, {}});
    m.labels_.push_back(std::move(label));
    return ResourceId(m.resources_.size() - 1);
  }

  QueueId add_queue(QueueKind kind, unsigned capacity) {
    m.queues_.push_back({kind, capacity});
    return QueueId(m.queues_.size() - 1);
  }

  QueueId link(ResourceId up, ResourceId down, unsigned latency, unsigned depth) {
    auto key = std::make_pair(up, down);
    if (auto it = links.find(key); it != links.end()) {
      assert(it->second.second == latency);
      return it->second.first;
    }
    QueueId q = latency == 0 ? add_queue(QueueKind::Wire, 0)
                             : add_queue(QueueKind::Link, depth + latency - 1);
    m.resources_[down].inputs.push_back(q);
    links.emplace(key, std::make_pair(q, latency));
    return q;
  }

  /// Tile input port fed by `up`: one queue shared by all banks of `tile`,
  /// so a request blocked on a busy bank holds up the requests behind it.
  QueueId bank_link_block(ResourceId up, unsigned tile, unsigned latency) {
    if (auto it = bank_links.find(up); it != bank_links.end()) {
      assert(it->second.second == latency);
      return it->second.first;
    }
    const auto& g = m.cfg_.geometry;
    const QueueId q = latency == 0
                          ? add_queue(QueueKind::Wire, 0)
                          : add_queue(QueueKind::Link, m.cfg_.network.queue_depth + latency - 1);
    for (unsigned b = 0; b < g.banks_per_tile; ++b)
      m.resources_[m.bank_resource(tile * g.banks_per_tile + b)].inputs.push_back(q);
    bank_links.emplace(up, std::make_pair(q, latency));
    return q;
  }

  /// Distributes `budget` cycles over a hop chain: one register at the end,
  /// the remainder at `mid`.
  static std::vector<unsigned> latencies(std::size_t hops, unsigned budget, std::size_t mid) {
    std::vector<unsigned> lat(hops, 0);
    if (budget == 0 || hops == 0) return lat;
    lat.back() = 1;
    lat[std::min(mid, hops - 1)] += budget - 1;
    return lat;
  }
};

std::span<const Hop> NetworkModel::request_prefix(unsigned src_core, unsigned dst_tile) const {
  const std::size_t idx = std::size_t(src_core) * cfg_.num_tiles() + dst_tile;
  return {hops_.data() + req_offset_[idx], hops_.data() + req_offset_[idx + 1]};
}

QueueId NetworkModel::bank_input(unsigned src_core, unsigned bank) const {
  const unsigned dst_tile = bank / cfg_.geometry.banks_per_tile;
  if (cfg_.tile_of_core(src_core) == dst_tile) return core_head_queue(src_core);
  const std::size_t idx = std::size_t(src_core) * cfg_.num_tiles() + dst_tile;
  return bank_link_base_[idx];
}

std::span<const Hop> NetworkModel::response_prefix(unsigned bank_tile, unsigned dst_core) const {
  const std::size_t idx = std::size_t(bank_tile) * cfg_.num_cores() + dst_core;
  return {resp_hops_.data() + resp_offset_[idx], resp_hops_.data() + resp_offset_[idx + 1]};
}

unsigned NetworkModel::route_latency(unsigned src_core, unsigned dst_tile) const {
  unsigned total = bank_latency();
  for (const Hop& h : request_prefix(src_core, dst_tile)) total += h.latency;
  for (const Hop& h : response_prefix(dst_tile, src_core)) total += h.latency;
  return total;
}

std::string NetworkModel::describe(ResourceId r) const {
  return r < labels_.size() ? labels_[r] : "resource#" + std::to_string(r);
}

NetworkModel build(TopologyKind kind, const ValidatedConfig& cfg) {
  const auto& g = cfg.geometry;
  const auto& tm = cfg.timing;
  const unsigned tiles = cfg.num_tiles();
  const unsigned cores = cfg.num_cores();
  const unsigned banks = cfg.num_banks();
  const unsigned N = g.cores_per_tile;
  const unsigned B = g.banks_per_tile;

  if (kind != TopologyKind::Hybrid && !is_pow4(tiles))
    throw UnsupportedGeometry(kind, "radix-4 butterfly needs a power-of-4 tile count, got " +
                                        std::to_string(tiles));
  if (kind == TopologyKind::Hybrid && g.groups > 4)
    throw UnsupportedGeometry(kind, "at most four groups can be pairwise connected");
  if (tm.latency_remote_group < tm.latency_local_tile)
    throw UnsupportedGeometry(kind, "remote latency below bank latency");

  NetworkModel m;
  m.kind_ = kind;
  m.cfg_ = cfg;
  NetworkModel::Builder b{m, {}, {}};

  const unsigned nets = kind == TopologyKind::One ? 1 : (kind == TopologyKind::Four ? N : 0);
  const unsigned layers = kind == TopologyKind::Hybrid ? 0 : log4(tiles);
  const unsigned dirs = kind == TopologyKind::Hybrid ? g.groups : 0;
  m.layers_ = layers;
  m.tx_ports_ = kind == TopologyKind::One ? 1 : (kind == TopologyKind::Four ? N : dirs);
  m.rx_ports_ = m.tx_ports_;
  m.switches_ = kind == TopologyKind::Hybrid ? g.groups * dirs : nets * layers * (tiles / kRadix);

  // Request side.
  std::vector<ResourceId> tx(std::size_t(tiles) * m.tx_ports_);
  for (unsigned t = 0; t < tiles; ++t)
    for (unsigned p = 0; p < m.tx_ports_; ++p)
      tx[t * m.tx_ports_ + p] = b.add_resource(
          ResourceKind::TxPort, 0, "tx[tile " + std::to_string(t) + ", port " + std::to_string(p) + "]");

  // Butterfly output links: [net][layer][position].
  std::vector<ResourceId> fly(std::size_t(nets) * layers * tiles);
  std::vector<ResourceId> rfly(fly.size());
  auto fly_at = [&](std::vector<ResourceId>& v, unsigned net, unsigned layer, unsigned pos) -> ResourceId& {
    return v[(std::size_t(net) * layers + layer) * tiles + pos];
  };
  for (unsigned n = 0; n < nets; ++n)
    for (unsigned l = 0; l < layers; ++l)
      for (unsigned p = 0; p < tiles; ++p)
        fly_at(fly, n, l, p) = b.add_resource(ResourceKind::Switch, 1 + l,
                                              "fly[" + std::to_string(n) + "] layer " +
                                                  std::to_string(l) + " out " + std::to_string(p));

  // Crossbar outputs: [src group][direction][dst tile within group], plus the
  // pipeline register in front of the destination tile for remote directions.
  std::vector<ResourceId> xbar(std::size_t(g.groups) * dirs * g.tiles_per_group);
  std::vector<ResourceId> rxreg(std::size_t(tiles) * dirs, kNoResource);
  for (unsigned gs = 0; gs < g.groups && dirs; ++gs)
    for (unsigned d = 0; d < dirs; ++d)
      for (unsigned o = 0; o < g.tiles_per_group; ++o)
        xbar[(gs * dirs + d) * g.tiles_per_group + o] = b.add_resource(
            ResourceKind::Switch, 1,
            "xbar[group " + std::to_string(gs) + ", dir " + std::to_string(d) + "] out " +
                std::to_string(o));
  for (unsigned t = 0; t < tiles && dirs; ++t)
    for (unsigned d = 1; d < dirs; ++d)
      rxreg[t * dirs + d] = b.add_resource(
          ResourceKind::PipelineReg, 2,
          "rx[tile " + std::to_string(t) + ", dir " + std::to_string(d) + "]");

  m.bank_base_ = ResourceId(m.resources_.size());
  for (unsigned k = 0; k < banks; ++k)
    b.add_resource(ResourceKind::Bank, kBankStage, "bank " + std::to_string(k));

  // Response side mirrors the request side.
  std::vector<ResourceId> rtx(tx.size());
  for (unsigned t = 0; t < tiles; ++t)
    for (unsigned p = 0; p < m.tx_ports_; ++p)
      rtx[t * m.tx_ports_ + p] = b.add_resource(
          ResourceKind::RespTxPort, kRespStage,
          "resp tx[tile " + std::to_string(t) + ", port " + std::to_string(p) + "]");
  for (unsigned n = 0; n < nets; ++n)
    for (unsigned l = 0; l < layers; ++l)
      for (unsigned p = 0; p < tiles; ++p)
        fly_at(rfly, n, l, p) = b.add_resource(ResourceKind::RespSwitch, kRespStage + 1 + l,
                                               "resp fly[" + std::to_string(n) + "] layer " +
                                                   std::to_string(l) + " out " + std::to_string(p));
  std::vector<ResourceId> rxbar(xbar.size());
  std::vector<ResourceId> rrxreg(rxreg.size(), kNoResource);
  for (unsigned gs = 0; gs < g.groups && dirs; ++gs)
    for (unsigned d = 0; d < dirs; ++d)
      for (unsigned o = 0; o < g.tiles_per_group; ++o)
        rxbar[(gs * dirs + d) * g.tiles_per_group + o] = b.add_resource(
            ResourceKind::RespSwitch, kRespStage + 1,
            "resp xbar[group " + std::to_string(gs) + ", dir " + std::to_string(d) + "] out " +
                std::to_string(o));
  for (unsigned t = 0; t < tiles && dirs; ++t)
    for (unsigned d = 1; d < dirs; ++d)
      rrxreg[t * dirs + d] = b.add_resource(
          ResourceKind::RespPipelineReg, kRespStage + 2,
          "resp rx[tile " + std::to_string(t) + ", dir " + std::to_string(d) + "]");

  // Queues owned by endpoints.
  m.core_head_base_ = QueueId(m.queues_.size());
  for (unsigned c = 0; c < cores; ++c) b.add_queue(QueueKind::CoreHead, 1);
  m.bank_resp_base_ = QueueId(m.queues_.size());
  for (unsigned k = 0; k < banks; ++k)
    b.add_queue(QueueKind::BankResponse, cfg.network.response_queue_depth);
  m.dma_base_ = QueueId(m.queues_.size());
  for (unsigned k = 0; k < banks; ++k) b.add_queue(QueueKind::Dma, cfg.network.dma_queue_depth);

  // Core heads compete for their own tile's banks and transmit ports.
  for (unsigned c = 0; c < cores; ++c) {
    const unsigned t = cfg.tile_of_core(c);
    for (unsigned k = 0; k < B; ++k)
      m.resources_[m.bank_resource(t * B + k)].inputs.push_back(m.core_head_queue(c));
    for (unsigned p = 0; p < m.tx_ports_; ++p)
      m.resources_[tx[t * m.tx_ports_ + p]].inputs.push_back(m.core_head_queue(c));
  }
  for (unsigned k = 0; k < banks; ++k) {
    const unsigned t = k / B;
    for (unsigned p = 0; p < m.tx_ports_; ++p)
      m.resources_[rtx[t * m.tx_ports_ + p]].inputs.push_back(m.bank_response_queue(k));
  }

  const unsigned bank_lat = m.bank_latency();
  auto budgets = [&](unsigned total) {
    const unsigned split = total - bank_lat;
    return std::make_pair((split + 1) / 2, split / 2);
  };

  struct Path {
    std::vector<ResourceId> res;
    std::vector<unsigned> depth;  // capacity of the queue behind res[i] (i >= 1)
    std::size_t mid;
    unsigned total;
  };

  auto request_path = [&](unsigned core, unsigned dst_tile) {
    Path p;
    const unsigned st = cfg.tile_of_core(core);
    const unsigned slot = core % N;
    if (kind == TopologyKind::Hybrid) {
      const unsigned gs = cfg.group_of_tile(st), gd = cfg.group_of_tile(dst_tile);
      const unsigned d = (gd + g.groups - gs) % g.groups;
      p.res = {tx[st * dirs + d], xbar[(gs * dirs + d) * g.tiles_per_group + dst_tile % g.tiles_per_group]};
      p.depth = {0, cfg.network.queue_depth};
      if (d != 0) {
        p.res.push_back(rxreg[dst_tile * dirs + d]);
        p.depth.push_back(cfg.network.queue_depth);
      }
      p.mid = 1;
      p.total = d == 0 ? tm.latency_local_group : tm.latency_remote_group;
    } else {
      const unsigned net = kind == TopologyKind::One ? 0 : slot;
      p.res = {tx[st * m.tx_ports_ + net]};
      p.depth = {0};
      unsigned pos = st;
      for (unsigned l = 0; l < layers; ++l) {
        const unsigned j = layers - 1 - l;
        pos = set_digit(pos, j, digit(dst_tile, j));
        p.res.push_back(fly_at(fly, net, l, pos));
        p.depth.push_back(cfg.network.butterfly_buffer);
      }
      p.mid = 1 + layers / 2;
      p.total = tm.latency_remote_group;
    }
    return p;
  };

  auto response_path = [&](unsigned bank_tile, unsigned core) {
    Path p;
    const unsigned st = cfg.tile_of_core(core);
    const unsigned slot = core % N;
    if (kind == TopologyKind::Hybrid) {
      const unsigned gs = cfg.group_of_tile(st), gd = cfg.group_of_tile(bank_tile);
      const unsigned d = (gd + g.groups - gs) % g.groups;
      p.res = {rtx[bank_tile * dirs + d], rxbar[(gs * dirs + d) * g.tiles_per_group + st % g.tiles_per_group]};
      p.depth = {0, cfg.network.queue_depth};
      if (d != 0) {
        p.res.push_back(rrxreg[st * dirs + d]);
        p.depth.push_back(cfg.network.queue_depth);
      }
      p.mid = 1;
      p.total = d == 0 ? tm.latency_local_group : tm.latency_remote_group;
    } else {
      const unsigned net = kind == TopologyKind::One ? 0 : slot;
      p.res = {rtx[bank_tile * m.tx_ports_ + net]};
      p.depth = {0};
      unsigned pos = bank_tile;
      for (unsigned l = 0; l < layers; ++l) {
        const unsigned j = layers - 1 - l;
        pos = set_digit(pos, j, digit(st, j));
        p.res.push_back(fly_at(rfly, net, l, pos));
        p.depth.push_back(cfg.network.butterfly_buffer);
      }
      p.mid = 1 + layers / 2;
      p.total = tm.latency_remote_group;
    }
    return p;
  };

  m.req_offset_.assign(std::size_t(cores) * tiles + 1, 0);
  m.bank_link_base_.assign(std::size_t(cores) * tiles, 0);
  for (unsigned c = 0; c < cores; ++c) {
    for (unsigned t = 0; t < tiles; ++t) {
      const std::size_t idx = std::size_t(c) * tiles + t;
      m.req_offset_[idx] = std::uint32_t(m.hops_.size());
      if (cfg.tile_of_core(c) == t) continue;
      Path p = request_path(c, t);
      const auto lat = NetworkModel::Builder::latencies(p.res.size(), budgets(p.total).first, p.mid);
      for (std::size_t i = 0; i < p.res.size(); ++i) {
        QueueId in = i == 0 ? m.core_head_queue(c) : b.link(p.res[i - 1], p.res[i], lat[i - 1], p.depth[i]);
        m.hops_.push_back({p.res[i], in, lat[i]});
      }
      m.bank_link_base_[idx] = b.bank_link_block(p.res.back(), t, lat.back());
    }
  }
  m.req_offset_.back() = std::uint32_t(m.hops_.size());

  m.resp_offset_.assign(std::size_t(tiles) * cores + 1, 0);
  for (unsigned t = 0; t < tiles; ++t) {
    for (unsigned c = 0; c < cores; ++c) {
      const std::size_t idx = std::size_t(t) * cores + c;
      m.resp_offset_[idx] = std::uint32_t(m.resp_hops_.size());
      if (cfg.tile_of_core(c) == t) continue;
      Path p = response_path(t, c);
      const auto lat = NetworkModel::Builder::latencies(p.res.size(), budgets(p.total).second, p.mid);
      for (std::size_t i = 0; i < p.res.size(); ++i) {
        QueueId in = i == 0 ? QueueId(~0u) : b.link(p.res[i - 1], p.res[i], lat[i - 1], p.depth[i]);
        m.resp_hops_.push_back({p.res[i], in, lat[i]});
      }
    }
  }
  m.resp_offset_.back() = std::uint32_t(m.resp_hops_.size());

  // Every bank also accepts DMA traffic through the tile-local crossbar.
  for (unsigned k = 0; k < banks; ++k)
    m.resources_[m.bank_resource(k)].inputs.push_back(m.dma_queue(k));

  m.order_.resize(m.resources_.size());
  std::iota(m.order_.begin(), m.order_.end(), ResourceId{0});
  std::stable_sort(m.order_.begin(), m.order_.end(), [&](ResourceId a, ResourceId c) {
    return m.resources_[a].stage < m.resources_[c].stage;
  });
  return m;
}

}  // namespace mempool
