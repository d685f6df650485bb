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

#include "mempool/experiments.hpp"

#include <fmt/format.h>
#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "mempool/addrmap.hpp"
#include "mempool/engine.hpp"
#include "mempool/pe.hpp"
#include "mempool/uplink.hpp"

namespace mempool {

namespace {

std::string num(double v) { return fmt::format("{:.6f}", v); }
std::string num(std::uint64_t v) { return fmt::format("{}", v); }
std::string num(unsigned v) { return fmt::format("{}", v); }

const std::vector<std::string> kTrafficColumns = {
    "topology",       "traffic",     "lambda",       "p_local",           "offered",
    "accepted",       "mean_latency", "p50_latency", "p99_latency",       "latency_local_tile",
    "latency_local_group", "latency_remote_group", "mean_source_wait", "generated", "completed"};

std::vector<std::string> traffic_row(TopologyKind topo, TrafficConfig::Kind kind, const TrafficResult& r) {
  return {std::string(to_string(topo)),
          kind == TrafficConfig::Kind::Uniform ? "uniform" : "hybrid-local",
          num(r.lambda),
          num(r.p_local),
          num(r.offered),
          num(r.accepted),
          num(r.mean_latency),
          num(std::uint64_t(r.p50_latency)),
          num(std::uint64_t(r.p99_latency)),
          num(r.class_latency[0]),
          num(r.class_latency[1]),
          num(r.class_latency[2]),
          num(r.mean_source_wait),
          num(r.generated),
          num(r.completed)};
}

TrafficRunOptions traffic_options(const SimConfig& c) {
  TrafficRunOptions o;
  o.warmup = c.workload.warmup;
  o.window = c.workload.window;
  o.max_outstanding = c.workload.max_outstanding;
  return o;
}

Table traffic_sweep(const RunContext& ctx, Experiment e, TrafficConfig::Kind kind,
                    const std::vector<double>& p_locals) {
  const SimConfig& c = ctx.config;
  const NetworkModel net = build(ctx.topology, c.validated());
  struct Point {
    double lambda, p_local;
  };
  std::vector<Point> points;
  for (double p : p_locals)
    for (double l : c.sweep.lambdas) points.push_back({l, p});
  const TrafficRunOptions opt = traffic_options(c);
  auto results = run_points<TrafficResult>(points.size(), ctx.mode, ctx.jobs, [&](std::size_t i) {
    TrafficConfig t;
    t.kind = kind;
    t.lambda = points[i].lambda;
    t.p_local = points[i].p_local;
    t.seed = ctx.seed;
    return run_traffic(net, t, opt);
  });
  Table tab;
  tab.experiment = e;
  tab.columns = kTrafficColumns;
  for (const auto& r : results) tab.rows.push_back(traffic_row(ctx.topology, kind, r));
  return tab;
}

struct DmaPoint {
  unsigned backends;
  std::uint64_t bytes;
};

TransferStats dma_point(const NetworkModel& net, const SimConfig& c, const DmaPoint& p, DmaDirection dir,
                        std::uint64_t seed) {
  const ValidatedConfig& cfg = net.config();
  const AddressLayout layout = AddressLayout::from(cfg);
  const Addr l1_base = layout.sequential_span();
  if (l1_base + p.bytes > cfg.l1_bytes()) throw ConfigError(fmt::format("transfer of {} B exceeds the interleaved L1 region", p.bytes));
  UplinkParams up = c.uplink;
  up.backends_per_group = p.backends;
  Engine engine(net);
  L2Memory l2(std::max<Addr>(p.bytes, kWordBytes));
  Rng rng = core_rng(seed, p.backends);
  if (dir == DmaDirection::In) {
    for (Addr a = 0; a < p.bytes; a += kWordBytes) l2.set_word(kL2Base + a, Word(rng()));
  } else {
    for (Addr a = 0; a < p.bytes; a += kWordBytes) engine.poke(scramble(l1_base + a, layout), Word(rng()));
  }
  const DmaRequest req = dir == DmaDirection::In ? DmaRequest{kL2Base, l1_base, p.bytes}
                                                 : DmaRequest{l1_base, kL2Base, p.bytes};
  const TransferStats st = dma_run(req, engine, l2, up);
  for (Addr a = 0; a < p.bytes; a += kWordBytes)
    if (engine.peek(scramble(l1_base + a, layout)) != l2.word(kL2Base + a))
      throw InvariantViolation(fmt::format("DMA data mismatch at offset {}", a));
  return st;
}

Cycle dma_cycles(const NetworkModel& net, const SimConfig& c, std::uint64_t bytes, DmaDirection dir,
                 std::uint64_t seed) {
  if (bytes == 0) return 0;
  return dma_point(net, c, {c.uplink.backends_per_group, bytes}, dir, seed).cycles;
}

std::vector<KernelName> selected_kernels(const SimConfig& c) {
  if (c.workload.kernel == "all")
    return {KernelName::Matmul, KernelName::Conv, KernelName::Dct, KernelName::Axpy, KernelName::Dotp};
  return {parse_kernel(c.workload.kernel)};
}

KernelOptions kernel_options(const SimConfig& c, std::uint64_t seed) {
  KernelOptions o;
  o.mac_depth = c.workload.mac_depth;
  o.max_outstanding = c.workload.max_outstanding;
  o.seed = seed;
  o.model_icache = c.workload.model_icache;
  o.icache = c.icache;
  o.iterations = c.workload.iterations;
  return o;
}

}  // namespace

std::string_view experiment_name(Experiment e) {
  switch (e) {
    case Experiment::NetworkSweep: return "sweep-network";
    case Experiment::ScrambleSweep: return "sweep-scramble";
    case Experiment::DmaUtil: return "dma-util";
    case Experiment::KernelRun: return "kernel";
    case Experiment::IcacheSim: return "icache-sim";
    case Experiment::DoubleBuffer: return "double-buffer";
  }
  return "unknown";
}

void for_each_point(std::size_t n, ExecMode mode, unsigned jobs, const std::function<void(std::size_t)>& body) {
  if (mode == ExecMode::Serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  const long count = long(n);
  const int threads = jobs ? int(jobs) : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long i = 0; i < count; ++i) {
    try {
      body(std::size_t(i));
    } catch (...) {
#pragma omp critical(mempool_point_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

std::string Table::to_csv() const {
  std::string out = fmt::format("# mempool-sim v{} {}\n", kVersion, experiment_name(experiment));
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(columns);
  for (const auto& r : rows) line(r);
  return out;
}

std::string Table::to_json() const {
  nlohmann::ordered_json j;
  j["tool"] = "mempool-sim";
  j["version"] = std::string(kVersion);
  j["experiment"] = std::string(experiment_name(experiment));
  j["columns"] = columns;
  auto recs = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json rec;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      double v = 0;
      const auto& s = r[i];
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec == std::errc{} && p == s.data() + s.size())
        rec[columns[i]] = v;
      else
        rec[columns[i]] = s;
    }
    recs.push_back(std::move(rec));
  }
  j["records"] = std::move(recs);
  return j.dump(2) + "\n";
}

const std::string& Table::cell(std::size_t row, std::string_view column) const {
  const auto it = std::find(columns.begin(), columns.end(), column);
  if (it == columns.end()) throw std::out_of_range("no column " + std::string(column));
  return rows.at(row).at(std::size_t(it - columns.begin()));
}

double Table::number(std::size_t row, std::string_view column) const {
  const std::string& s = cell(row, column);
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw std::invalid_argument("not a number: " + s);
  return v;
}

Table run_network_sweep(const RunContext& ctx) {
  return traffic_sweep(ctx, Experiment::NetworkSweep, ctx.config.workload.traffic, {ctx.config.workload.p_local});
}

Table run_scramble_sweep(const RunContext& ctx) {
  return traffic_sweep(ctx, Experiment::ScrambleSweep, TrafficConfig::Kind::HybridLocal, ctx.config.sweep.p_locals);
}

Table run_dma_util(const RunContext& ctx) {
  const SimConfig& c = ctx.config;
  const NetworkModel net = build(ctx.topology, c.validated());
  std::vector<DmaPoint> points;
  for (unsigned b : c.sweep.backends)
    for (auto s : c.sweep.sizes) points.push_back({b, s});
  auto results = run_points<TransferStats>(points.size(), ctx.mode, ctx.jobs, [&](std::size_t i) {
    return dma_point(net, c, points[i], c.workload.dma_direction, ctx.seed);
  });
  Table tab;
  tab.experiment = Experiment::DmaUtil;
  tab.columns = {"backends", "bytes", "direction", "cycles", "utilization", "bus_cycles", "active_ports", "bursts",
                 "system_utilization"};
  for (const auto& r : results)
    tab.rows.push_back({num(r.backends), num(r.bytes), c.workload.dma_direction == DmaDirection::In ? "in" : "out",
                        num(std::uint64_t(r.cycles)), num(r.utilization), num(std::uint64_t(r.bus_cycles)),
                        num(r.active_ports), num(r.bursts), num(r.system_utilization)});
  return tab;
}

Table run_kernels(const RunContext& ctx) {
  const SimConfig& c = ctx.config;
  const NetworkModel net = build(ctx.topology, c.validated());
  const auto kernels = selected_kernels(c);
  auto results = run_points<KernelResult>(kernels.size(), ctx.mode, ctx.jobs, [&](std::size_t i) {
    return run_kernel(net, kernel_preset(kernels[i]), kernel_options(c, ctx.seed));
  });
  Table tab;
  tab.experiment = Experiment::KernelRun;
  tab.columns = {"kernel", "topology", "cycles", "instructions", "requests", "ipc", "compute", "control",
                 "synchronization", "icache", "lsu", "raw", "reduction"};
  for (const auto& r : results) {
    const auto& s = r.stalls;
    tab.rows.push_back({std::string(to_string(r.kernel)), std::string(to_string(ctx.topology)),
                        num(std::uint64_t(r.cycles)), num(r.instructions), num(r.requests), num(r.ipc()),
                        num(s.compute_cycles), num(s.control_cycles), num(s.synchronization_cycles),
                        num(s.icache_stall_cycles), num(s.lsu_stall_cycles), num(s.raw_stall_cycles),
                        num(std::uint64_t(r.reduction_value))});
  }
  return tab;
}

Table run_icache_sim(const RunContext& ctx, const std::string& trace_text) {
  const SimConfig& c = ctx.config;
  const FetchTrace trace = trace_text.empty() ? FetchTrace::loop(0x1000, 48, 64) : FetchTrace::parse(trace_text);
  const unsigned cores = c.geometry.cores_per_tile;
  const auto& names = c.sweep.icache_presets;
  auto results = run_points<IcacheStats>(names.size(), ctx.mode, ctx.jobs, [&](std::size_t i) {
    IcacheConfig ic = icache_preset(names[i]);
    ic.refill_latency = c.icache.refill_latency;
    return run_trace(trace, ic, cores);
  });
  Table tab;
  tab.experiment = Experiment::IcacheSim;
  tab.columns = {"config", "cores", "fetches", "l0_hits", "l0_misses", "prefetches", "l1_lookups", "l1_hits",
                 "l1_misses", "refills_coalesced", "stall_cycles", "cycles", "tag_reads", "data_way_reads",
                 "refill_beats"};
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& s = results[i];
    tab.rows.push_back({icache_preset(names[i]).name, num(cores), num(s.fetches), num(s.l0_hits), num(s.l0_misses),
                        num(s.prefetches), num(s.l1_lookups), num(s.l1_hits), num(s.l1_misses),
                        num(s.refills_coalesced), num(s.stall_cycles), num(s.cycles), num(s.tag_reads),
                        num(s.data_way_reads), num(s.refill_beats)});
  }
  return tab;
}

std::vector<BufferPhase> double_buffer_schedule(const std::vector<Cycle>& compute, Cycle dma_in, Cycle dma_out) {
  if (compute.empty()) throw ConfigError("double buffering needs at least one round");
  std::vector<BufferPhase> out;
  Cycle t = 0;
  out.push_back({0, t, 0, dma_in, 0, dma_in});
  t += dma_in;
  const unsigned rounds = unsigned(compute.size());
  for (unsigned r = 1; r <= rounds; ++r) {
    const Cycle dma = (r < rounds ? dma_in : 0) + (r > 1 ? dma_out : 0);
    const Cycle c = compute[r - 1];
    out.push_back({r, t, c, dma, std::min(c, dma), std::max(c, dma)});
    t += std::max(c, dma);
  }
  out.push_back({rounds + 1, t, 0, dma_out, 0, dma_out});
  return out;
}

Table run_double_buffer(const RunContext& ctx) {
  const SimConfig& c = ctx.config;
  const NetworkModel net = build(ctx.topology, c.validated());
  const ValidatedConfig& cfg = net.config();
  const auto kernels = selected_kernels(c);
  const unsigned rounds = c.workload.rounds;

  struct Job {
    std::size_t kernel;
    int round;  // -1 dma in, -2 dma out
  };
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    jobs.push_back({k, -1});
    jobs.push_back({k, -2});
    for (unsigned r = 0; r < rounds; ++r) jobs.push_back({k, int(r)});
  }
  auto bytes_of = [&](const KernelPreset& p, double per_iter) {
    const unsigned iters = c.workload.iterations.value_or(p.iterations);
    const double total = per_iter * p.unroll * iters * cfg.num_cores();
    return (std::uint64_t(std::ceil(total)) + kWordBytes - 1) / kWordBytes * kWordBytes;
  };
  auto cycles = run_points<Cycle>(jobs.size(), ctx.mode, ctx.jobs, [&](std::size_t i) -> Cycle {
    const KernelPreset p = kernel_preset(kernels[jobs[i].kernel]);
    if (jobs[i].round == -1) return dma_cycles(net, c, bytes_of(p, p.dma_in_bytes_per_iter), DmaDirection::In, ctx.seed);
    if (jobs[i].round == -2)
      return dma_cycles(net, c, bytes_of(p, p.dma_out_bytes_per_iter), DmaDirection::Out, ctx.seed);
    return run_kernel(net, p, kernel_options(c, ctx.seed + std::uint64_t(jobs[i].round))).cycles;
  });

  Table tab;
  tab.experiment = Experiment::DoubleBuffer;
  tab.columns = {"kernel", "phase", "kind", "start", "compute_cycles", "dma_cycles", "overlap", "phase_cycles"};
  std::size_t j = 0;
  for (std::size_t k = 0; k < kernels.size(); ++k) {
    const Cycle in = cycles[j++];
    const Cycle out = cycles[j++];
    std::vector<Cycle> compute(cycles.begin() + long(j), cycles.begin() + long(j + rounds));
    j += rounds;
    for (const auto& ph : double_buffer_schedule(compute, in, out)) {
      const char* kind = ph.index == 0 ? "load" : ph.index == rounds + 1 ? "writeback" : "round";
      tab.rows.push_back({std::string(to_string(kernels[k])), num(ph.index), kind, num(std::uint64_t(ph.start)),
                          num(std::uint64_t(ph.compute)), num(std::uint64_t(ph.dma)), num(std::uint64_t(ph.overlap)),
                          num(std::uint64_t(ph.length))});
    }
  }
  return tab;
}

double saturation(const Table& sweep, double p_local) {
  double best = 0;
  for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
    if (p_local >= 0 && std::abs(sweep.number(i, "p_local") - p_local) > 1e-9) continue;
    best = std::max(best, sweep.number(i, "accepted"));
  }
  return best;
}

}  // namespace mempool
