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

// Serial reference path against the OpenMP sweep driver on the same points.

#include <benchmark/benchmark.h>

#include "mempool/experiments.hpp"

using namespace mempool;

namespace {

RunContext sweep_context(ExecMode mode) {
  RunContext ctx;
  ctx.mode = mode;
  ctx.config.workload.warmup = 200;
  ctx.config.workload.window = 2000;
  ctx.config.sweep.lambdas = {0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  return ctx;
}

void BM_NetworkSweep(benchmark::State& state) {
  const RunContext ctx = sweep_context(state.range(0) ? ExecMode::Parallel : ExecMode::Serial);
  for (auto _ : state) benchmark::DoNotOptimize(run_network_sweep(ctx));
  state.SetItemsProcessed(state.iterations() * std::int64_t(ctx.config.sweep.lambdas.size()));
}
BENCHMARK(BM_NetworkSweep)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DmaSweep(benchmark::State& state) {
  RunContext ctx = sweep_context(state.range(0) ? ExecMode::Parallel : ExecMode::Serial);
  ctx.config.sweep.sizes = {4096, 16384, 65536};
  for (auto _ : state) benchmark::DoNotOptimize(run_dma_util(ctx));
}
BENCHMARK(BM_DmaSweep)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
