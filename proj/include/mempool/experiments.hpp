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
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "mempool/config.hpp"
#include "mempool/topology.hpp"

namespace mempool {

inline constexpr std::string_view kVersion = "0.1.0";
inline constexpr std::uint64_t kDefaultSeed = 0x6d656d706f6f6cULL;

enum class Experiment : std::uint8_t { NetworkSweep, ScrambleSweep, DmaUtil, KernelRun, IcacheSim, DoubleBuffer };

/// Subcommand spelling, e.g. "sweep-network".
std::string_view experiment_name(Experiment e);

enum class ExecMode : std::uint8_t { Serial, Parallel };

struct RunContext {
  SimConfig config;
  std::uint64_t seed = kDefaultSeed;
  TopologyKind topology = TopologyKind::Hybrid;
  unsigned jobs = 0;  // 0 lets OpenMP decide
  ExecMode mode = ExecMode::Parallel;
};

/// One record per sweep point, in sweep order.
struct Table {
  Experiment experiment = Experiment::NetworkSweep;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::string to_csv() const;
  std::string to_json() const;
  /// Column lookup for callers that post-process results.
  const std::string& cell(std::size_t row, std::string_view column) const;
  double number(std::size_t row, std::string_view column) const;
};

/// Runs `body(i)` for i in [0, n), serially or across OpenMP threads. The
/// first exception thrown by any point is rethrown after the loop.
void for_each_point(std::size_t n, ExecMode mode, unsigned jobs, const std::function<void(std::size_t)>& body);

template <class R, class F>
std::vector<R> run_points(std::size_t n, ExecMode mode, unsigned jobs, F&& point) {
  std::vector<R> out(n);
  for_each_point(n, mode, jobs, [&](std::size_t i) { out[i] = point(i); });
  return out;
}

Table run_network_sweep(const RunContext& ctx);
Table run_scramble_sweep(const RunContext& ctx);
Table run_dma_util(const RunContext& ctx);
Table run_kernels(const RunContext& ctx);
/// `trace_text` in fetch-trace format; empty uses a built-in loop.
Table run_icache_sim(const RunContext& ctx, const std::string& trace_text);
Table run_double_buffer(const RunContext& ctx);

struct BufferPhase {
  unsigned index = 0;  // 0 is the initial load, rounds + 1 the final write back
  Cycle start = 0;
  Cycle compute = 0;
  Cycle dma = 0;
  Cycle overlap = 0;
  Cycle length = 0;
};

/// Phase timeline of a double-buffered kernel: a DMA-only load, `rounds`
/// phases where compute overlaps the next load and previous write back, and a
/// DMA-only write back.
std::vector<BufferPhase> double_buffer_schedule(const std::vector<Cycle>& compute, Cycle dma_in, Cycle dma_out);

/// Highest accepted throughput over the table rows matching `p_local`.
double saturation(const Table& sweep, double p_local = -1.0);

}  // namespace mempool
