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
#include <stdexcept>
#include <string>
#include <vector>

namespace mempool {

using Cycle = std::uint64_t;
using Addr = std::uint64_t;
using Word = std::uint32_t;

inline constexpr unsigned kWordBytes = 4;
inline constexpr unsigned kByteBits = 2;

/// Cluster shape. Every other module derives its sizes from these counts.
struct ClusterGeometry {
  unsigned cores_per_tile = 4;
  unsigned tiles_per_group = 16;
  unsigned groups = 4;
  unsigned banks_per_tile = 16;
  unsigned bank_words = 256;
  unsigned seq_rows_per_bank = 32;

  bool operator==(const ClusterGeometry&) const = default;
};

/// Zero-load round-trip latencies and system-level timing, in cycles.
struct TimingParams {
  unsigned latency_local_tile = 1;
  unsigned latency_local_group = 3;
  unsigned latency_remote_group = 5;
  unsigned l2_latency = 12;
  unsigned l2_bandwidth = 256;  // bytes per cycle, whole system
  unsigned dma_setup = 30;
  unsigned wakeup_latency = 1;

  bool operator==(const TimingParams&) const = default;
};

/// Buffering knobs of the L1 interconnect model.
struct NetworkParams {
  unsigned queue_depth = 2;         // registered crossbar/pipeline inputs
  unsigned butterfly_buffer = 2;    // per switch output skid buffer
  unsigned response_queue_depth = 1;  // bank output register
  unsigned dma_queue_depth = 2;

  bool operator==(const NetworkParams&) const = default;
};

enum class DiagnosticCode { NonPowerOfTwo, SeqRegionTooLarge, ZeroCount, InvalidTiming };

struct Diagnostic {
  DiagnosticCode code;
  std::string field;

  bool operator==(const Diagnostic&) const = default;
};

std::string to_string(const Diagnostic& d);

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<Diagnostic> diags);
  explicit ConfigError(const std::string& message);

  const std::vector<Diagnostic>& diagnostics() const { return diags_; }

 private:
  std::vector<Diagnostic> diags_;
};

/// Geometry plus the derived address-field widths.
struct ValidatedConfig {
  ClusterGeometry geometry;
  TimingParams timing;
  NetworkParams network;

  unsigned bank_bits = 0;  // b
  unsigned tile_bits = 0;  // t
  unsigned row_bits = 0;
  unsigned seq_bits = 0;  // s

  unsigned num_tiles() const { return geometry.tiles_per_group * geometry.groups; }
  unsigned num_cores() const { return geometry.cores_per_tile * num_tiles(); }
  unsigned num_banks() const { return geometry.banks_per_tile * num_tiles(); }
  double banking_factor() const { return double(num_banks()) / double(num_cores()); }
  Addr l1_bytes() const { return Addr(num_banks()) * geometry.bank_words * kWordBytes; }
  /// Bytes covered by one row across every bank; the DMA splitter's unit.
  Addr l1_line_bytes() const { return Addr(num_banks()) * kWordBytes; }

  unsigned group_of_tile(unsigned tile) const { return tile / geometry.tiles_per_group; }
  unsigned tile_of_core(unsigned core) const { return core / geometry.cores_per_tile; }
};

bool is_pow2(std::uint64_t v);
unsigned log2_exact(std::uint64_t v);

/// Returns every violated constraint; empty when the configuration is usable.
std::vector<Diagnostic> check(const ClusterGeometry& geometry, const TimingParams& timing);

/// Throws ConfigError carrying the full diagnostic list on failure.
ValidatedConfig validate(const ClusterGeometry& geometry, const TimingParams& timing,
                         const NetworkParams& network = {});

}  // namespace mempool
