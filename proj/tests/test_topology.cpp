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

#include <doctest.h>

#include <set>

#include "mempool/topology.hpp"

using namespace mempool;

namespace {

const ValidatedConfig& default_cfg() {
  static const ValidatedConfig cfg = validate(ClusterGeometry{}, TimingParams{});
  return cfg;
}

std::set<ResourceId> resources_between(const NetworkModel& m, unsigned ga, unsigned gb) {
  const auto& cfg = m.config();
  const unsigned T = cfg.geometry.tiles_per_group, N = cfg.geometry.cores_per_tile;
  std::set<ResourceId> used;
  for (unsigned src : {ga, gb})
    for (unsigned dst : {ga, gb}) {
      if (src == dst) continue;
      for (unsigned st = src * T; st < (src + 1) * T; ++st)
        for (unsigned dt = dst * T; dt < (dst + 1) * T; ++dt) {
          for (const Hop& h : m.request_prefix(st * N, dt)) used.insert(h.resource);
          for (const Hop& h : m.response_prefix(dt, st * N)) used.insert(h.resource);
        }
    }
  return used;
}

}  // namespace

TEST_CASE("classify examples") {
  const auto& cfg = default_cfg();
  CHECK(classify(3, 3, cfg) == RouteClass::local_tile());
  CHECK(classify(0, 5, cfg) == RouteClass::local_group());
  CHECK(classify(0, 20, cfg) == RouteClass::remote(Direction::North));
  CHECK(classify(0, 40, cfg) == RouteClass::remote(Direction::NorthEast));
  CHECK(classify(0, 60, cfg) == RouteClass::remote(Direction::East));
  CHECK(classify(20, 0, cfg) == RouteClass::remote(Direction::East));
}

TEST_CASE("zero-load latency per class") {
  const TimingParams t;
  CHECK(zero_load_latency(RouteClass::local_tile(), t) == 1);
  CHECK(zero_load_latency(RouteClass::local_group(), t) == 3);
  CHECK(zero_load_latency(RouteClass::remote(Direction::East), t) == 5);
}

TEST_CASE("hybrid has four 16x16 crossbars per group") {
  const auto m = build(TopologyKind::Hybrid, default_cfg());
  CHECK(m.tx_ports_per_tile() == 4);
  CHECK(m.rx_ports_per_tile() == 4);
  CHECK(m.num_switches() == 16);
  unsigned local_outputs = 0;
  for (ResourceId r = 0; r < m.resources().size(); ++r) {
    if (m.describe(r).rfind("xbar[group 0, dir 0] out", 0) != 0) continue;
    ++local_outputs;
    CHECK(m.resources()[r].inputs.size() == 15);  // own tile bypasses it
  }
  CHECK(local_outputs == 16);
}

TEST_CASE("topology one is a three layer radix-4 butterfly") {
  const auto m = build(TopologyKind::One, default_cfg());
  CHECK(m.butterfly_layers() == 3);
  CHECK(m.num_switches() == 3 * 16);
  CHECK(m.tx_ports_per_tile() == 1);
  CHECK(m.hop_count(0, 63) == 4);  // tx port plus one switch per layer
}

TEST_CASE("topology four has one butterfly per core slot") {
  const auto m = build(TopologyKind::Four, default_cfg());
  CHECK(m.tx_ports_per_tile() == 4);
  CHECK(m.num_switches() == 4 * 3 * 16);
}

TEST_CASE("a four tile butterfly has one layer") {
  ClusterGeometry g;
  g.tiles_per_group = 1;
  const auto m = build(TopologyKind::One, validate(g, TimingParams{}));
  CHECK(m.butterfly_layers() == 1);
  CHECK(m.num_switches() == 1);
}

TEST_CASE("unsupported geometries are rejected") {
  ClusterGeometry g;
  g.tiles_per_group = 8;  // 32 tiles is not a power of four
  CHECK_THROWS_AS(build(TopologyKind::One, validate(g, TimingParams{})), UnsupportedGeometry);
  ClusterGeometry h;
  h.groups = 8;
  h.tiles_per_group = 8;
  CHECK_THROWS_AS(build(TopologyKind::Hybrid, validate(h, TimingParams{})), UnsupportedGeometry);
}

TEST_CASE("every route's stage latencies add up to its zero-load latency") {
  const auto& cfg = default_cfg();
  for (auto kind : {TopologyKind::One, TopologyKind::Four, TopologyKind::Hybrid}) {
    const auto m = build(kind, cfg);
    for (unsigned c = 0; c < cfg.num_cores(); c += 3)
      for (unsigned t = 0; t < cfg.num_tiles(); ++t) {
        const RouteClass rc = classify(cfg.tile_of_core(c), t, cfg);
        unsigned expect = zero_load_latency(rc, cfg.timing);
        // Butterflies have no group hierarchy: every remote tile is equally far.
        if (kind != TopologyKind::Hybrid && rc.kind != RouteClass::Kind::LocalTile)
          expect = cfg.timing.latency_remote_group;
        CHECK(m.route_latency(c, t) == expect);
      }
  }
}

TEST_CASE("hybrid traffic between two groups never touches the other pair's crossbars") {
  const auto m = build(TopologyKind::Hybrid, default_cfg());
  const auto a = resources_between(m, 0, 1);
  const auto b = resources_between(m, 2, 3);
  for (ResourceId r : a) CHECK(b.count(r) == 0);
}

TEST_CASE("topology names round trip") {
  for (auto k : {TopologyKind::One, TopologyKind::Four, TopologyKind::Hybrid}) CHECK(parse_topology(to_string(k)) == k);
  CHECK_THROWS_AS(parse_topology("mesh"), ConfigError);
}
