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
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mempool/geometry.hpp"
#include "mempool/icache.hpp"
#include "mempool/pe.hpp"
#include "mempool/uplink.hpp"

namespace mempool {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DmaDirection : std::uint8_t { In, Out };  // In: L2 to L1

struct WorkloadParams {
  TrafficConfig::Kind traffic = TrafficConfig::Kind::Uniform;
  double lambda = 0.1;
  double p_local = 0.0;
  std::string kernel = "all";  // a kernel name or "all"
  unsigned max_outstanding = 8;
  unsigned mac_depth = 2;
  std::optional<unsigned> iterations;
  Cycle warmup = 2000;
  Cycle window = 20000;
  unsigned rounds = 3;
  bool model_icache = true;
  DmaDirection dma_direction = DmaDirection::In;
  std::string trace;  // fetch trace for icache-sim; empty selects a built-in loop
};

struct SweepParams {
  std::vector<double> lambdas{0.01, 0.02, 0.05, 0.08, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.5};
  std::vector<double> p_locals{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<std::uint64_t> sizes{1024, 2048, 4096, 8192, 16384, 32768, 65536, 131072, 262144};
  std::vector<unsigned> backends{1, 2, 4, 8, 16};
  std::vector<std::string> icache_presets{"baseline", "2-way", "serial-l1"};
};

struct SimConfig {
  ClusterGeometry geometry;
  TimingParams timing;
  NetworkParams network;
  UplinkParams uplink;
  IcacheConfig icache = icache_preset("serial-l1");
  WorkloadParams workload;
  SweepParams sweep;

  /// Geometry and timing checks plus the sweep and workload ranges.
  ValidatedConfig validated() const;
  void check() const;
};

/// INI sections: geometry, timing, network, dma, icache, workload, sweep.
/// List values are comma separated. Unknown sections or keys are errors.
SimConfig parse_config(std::istream& in);
SimConfig parse_config_string(const std::string& text);
/// Throws IoError when the file cannot be read, ConfigError on bad content.
SimConfig load_config(const std::string& path);

}  // namespace mempool
