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

#include <nlohmann/json.hpp>

#include "mempool/experiments.hpp"

using namespace mempool;

namespace {

RunContext small(ExecMode mode) {
  RunContext ctx;
  ctx.mode = mode;
  ctx.jobs = 4;
  ctx.seed = 1234;
  auto& w = ctx.config.workload;
  w.warmup = 100;
  w.window = 400;
  w.iterations = 2;
  w.rounds = 2;
  auto& s = ctx.config.sweep;
  s.lambdas = {0.05, 0.3};
  s.p_locals = {0.0, 1.0};
  s.sizes = {1024, 8192};
  s.backends = {1, 4};
  return ctx;
}

Table run(Experiment e, const RunContext& ctx) {
  switch (e) {
    case Experiment::NetworkSweep: return run_network_sweep(ctx);
    case Experiment::ScrambleSweep: return run_scramble_sweep(ctx);
    case Experiment::DmaUtil: return run_dma_util(ctx);
    case Experiment::KernelRun: return run_kernels(ctx);
    case Experiment::IcacheSim: return run_icache_sim(ctx, "");
    case Experiment::DoubleBuffer: return run_double_buffer(ctx);
  }
  return {};
}

const std::vector<Experiment> kAll = {Experiment::NetworkSweep, Experiment::ScrambleSweep, Experiment::DmaUtil,
                                      Experiment::KernelRun,    Experiment::IcacheSim,     Experiment::DoubleBuffer};

}  // namespace

TEST_CASE("parallel sweeps produce byte-identical output to the serial path") {
  for (auto e : kAll) {
    CAPTURE(experiment_name(e));
    const std::string serial = run(e, small(ExecMode::Serial)).to_csv();
    const std::string parallel = run(e, small(ExecMode::Parallel)).to_csv();
    CHECK(serial == parallel);
  }
}

TEST_CASE("csv output starts with the version header") {
  for (auto e : kAll) {
    const std::string csv = run(e, small(ExecMode::Serial)).to_csv();
    const std::string header = "# mempool-sim v" + std::string(kVersion) + " " + std::string(experiment_name(e)) + "\n";
    CHECK(csv.rfind(header, 0) == 0);
  }
}

TEST_CASE("sweep tables have one row per point") {
  const auto ctx = small(ExecMode::Serial);
  CHECK(run_network_sweep(ctx).rows.size() == 2);
  CHECK(run_scramble_sweep(ctx).rows.size() == 4);
  CHECK(run_dma_util(ctx).rows.size() == 4);
  CHECK(run_kernels(ctx).rows.size() == 5);
  CHECK(run_icache_sim(ctx, "").rows.size() == 3);
}

TEST_CASE("json output mirrors the table") {
  const Table t = run_dma_util(small(ExecMode::Serial));
  const auto j = nlohmann::json::parse(t.to_json());
  CHECK(j["experiment"] == "dma-util");
  CHECK(j["version"] == std::string(kVersion));
  REQUIRE(j["records"].size() == t.rows.size());
  CHECK(j["records"][0]["bytes"].get<double>() == doctest::Approx(t.number(0, "bytes")));
}

TEST_CASE("different seeds change network results") {
  auto a = small(ExecMode::Serial);
  auto b = a;
  b.seed = 99;
  CHECK(run_network_sweep(a).to_csv() != run_network_sweep(b).to_csv());
}

TEST_CASE("double-buffer schedule examples") {
  SUBCASE("a single round cannot overlap") {
    const auto p = double_buffer_schedule({100}, 40, 30);
    REQUIRE(p.size() == 3);
    CHECK(p[0].length == 40);
    CHECK(p[1].start == 40);
    CHECK(p[1].dma == 0);
    CHECK(p[1].overlap == 0);
    CHECK(p[1].length == 100);
    CHECK(p[2].start == 140);
    CHECK(p[2].length == 30);
  }
  SUBCASE("compute-bound rounds hide the transfers") {
    const auto p = double_buffer_schedule({500, 500, 500, 500}, 40, 30);
    REQUIRE(p.size() == 6);
    CHECK(p[1].dma == 40);
    CHECK(p[2].dma == 70);
    CHECK(p[4].dma == 30);
    for (unsigned r = 1; r <= 4; ++r) {
      CHECK(p[r].length == 500);
      CHECK(p[r].overlap == p[r].dma);
    }
    CHECK(p[5].start == 40 + 4 * 500);
  }
  SUBCASE("transfer-bound rounds take the DMA time") {
    const auto p = double_buffer_schedule({10, 10, 10}, 40, 30);
    CHECK(p[2].length == 70);
    CHECK(p[2].overlap == 10);
  }
}

TEST_CASE("saturation picks the best accepted load") {
  Table t;
  t.columns = {"p_local", "accepted"};
  t.rows = {{"0.0", "0.2"}, {"0.0", "0.3"}, {"1.0", "0.9"}};
  CHECK(saturation(t, 0.0) == doctest::Approx(0.3));
  CHECK(saturation(t) == doctest::Approx(0.9));
}

TEST_CASE("invalid icache trace is reported") {
  CHECK_THROWS_AS(run_icache_sim(small(ExecMode::Serial), "0x3\n"), TraceError);
}
