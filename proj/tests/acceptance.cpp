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

// Acceptance run: one PASS/FAIL line per criterion. Exits non-zero if any
// criterion fails.

#include <fmt/core.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mempool/experiments.hpp"
#include "mempool/uplink.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mempool;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

const ValidatedConfig& cfg() {
  static const ValidatedConfig c = validate(ClusterGeometry{}, TimingParams{});
  return c;
}

const NetworkModel& net(TopologyKind k) {
  static const NetworkModel one = build(TopologyKind::One, cfg());
  static const NetworkModel four = build(TopologyKind::Four, cfg());
  static const NetworkModel hybrid = build(TopologyKind::Hybrid, cfg());
  return k == TopologyKind::One ? one : k == TopologyKind::Four ? four : hybrid;
}

RunContext context() {
  RunContext ctx;
  ctx.seed = kDefaultSeed;
  return ctx;
}

// Round-trip histogram per route class, issue to response, for uniform
// traffic at `lambda`.
std::array<std::map<Cycle, std::uint64_t>, kRouteClassSlots> round_trips(double lambda) {
  Engine e(net(TopologyKind::Hybrid));
  TrafficConfig t;
  t.lambda = lambda;
  std::vector<PEModel> pes(cfg().num_cores());
  std::vector<Rng> rngs;
  for (unsigned c = 0; c < pes.size(); ++c) {
    pes[c].core = c;
    rngs.push_back(core_rng(kDefaultSeed, c));
  }
  std::array<std::map<Cycle, std::uint64_t>, kRouteClassSlots> hist;
  for (Cycle now = 0; now < 100000; ++now) {
    for (const auto& r : e.completions()) {
      pes[r.source].retire(r.id, now);
      ++hist[slot_of(r.route)][now - r.issue_cycle];
    }
    for (unsigned c = 0; c < pes.size(); ++c) {
      gen_next(pes[c], t, now, rngs[c], cfg());
      if (!pes[c].source.empty() && e.can_issue(c)) {
        const auto g = pes[c].source.front();
        pes[c].source.pop_front();
        pes[c].scoreboard.push_back({e.issue(c, MemOp::read(), g.addr), -1, g.generated});
      }
    }
    e.step();
  }
  return hist;
}

double mean_of(const std::map<Cycle, std::uint64_t>& h) {
  std::uint64_t n = 0, sum = 0;
  for (const auto& [lat, cnt] : h) n += cnt, sum += lat * cnt;
  return n ? double(sum) / double(n) : 0.0;
}

// The measured round trip per class is the zero-load value; the residual
// contention in the mean vanishes as the load drops.
Outcome ac1() {
  Outcome o;
  auto low = round_trips(0.001);
  const auto higher = round_trips(0.01);
  const Cycle expect[] = {1, 3, 5};
  const char* names[] = {"local tile", "local group", "remote group"};
  for (unsigned i = 0; i < 3; ++i) {
    std::uint64_t n = 0, best = 0;
    Cycle mode = 0;
    for (const auto& [lat, cnt] : low[i]) {
      n += cnt;
      if (cnt > best) best = cnt, mode = lat;
    }
    const double share = n ? double(low[i][expect[i]]) / double(n) : 0.0;
    const double excess = mean_of(low[i]) - double(expect[i]);
    const double excess_hi = mean_of(higher[i]) - double(expect[i]);
    o.note(fmt::format("{} {} (mean {:.4f}, {:.2f}% at {}, n={}; mean at 0.01 {:.4f})", names[i], mode,
                       mean_of(low[i]), 100 * share, expect[i], n, mean_of(higher[i])));
    o.require(n > 0 && mode == expect[i], fmt::format("{} round trip {} != {}", names[i], mode, expect[i]));
    o.require(low[i].begin()->first == expect[i], fmt::format("{} faster than zero-load", names[i]));
    o.require(excess <= excess_hi, fmt::format("{} contention does not shrink with load", names[i]));
  }
  return o;
}

std::map<TopologyKind, Table> g_sweeps;

const Table& network_sweep(TopologyKind k) {
  auto it = g_sweeps.find(k);
  if (it != g_sweeps.end()) return it->second;
  RunContext ctx = context();
  ctx.topology = k;
  return g_sweeps[k] = run_network_sweep(ctx);
}

Outcome ac2() {
  Outcome o;
  const double one = saturation(network_sweep(TopologyKind::One));
  const double four = saturation(network_sweep(TopologyKind::Four));
  const double hybrid = saturation(network_sweep(TopologyKind::Hybrid));
  o.note(fmt::format("one {:.3f} four {:.3f} hybrid {:.3f}", one, four, hybrid));
  o.require(std::abs(one - 0.10) <= 0.04, "one outside 0.10 +- 0.04");
  o.require(std::abs(four - 0.37) <= 0.07, "four outside 0.37 +- 0.07");
  o.require(std::abs(hybrid - 0.40) <= 0.07, "hybrid outside 0.40 +- 0.07");
  o.require(one < four && four <= hybrid, "ordering one < four <= hybrid violated");
  return o;
}

Outcome ac3() {
  Outcome o;
  const Table& t = network_sweep(TopologyKind::Hybrid);
  bool found = false;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (std::abs(t.number(i, "lambda") - 0.35) > 1e-9) continue;
    found = true;
    const double lat = t.number(i, "mean_latency");
    o.note(fmt::format("mean latency {:.3f} at 0.35", lat));
    o.require(lat <= 8.0, "latency above 8 cycles");
  }
  o.require(found, "no sweep point at 0.35");
  return o;
}

Outcome ac4() {
  Outcome o;
  RunContext ctx = context();
  ctx.config.sweep.lambdas = {0.2, 0.3, 0.4, 0.5, 0.7, 1.0};
  const Table t = run_scramble_sweep(ctx);
  const std::vector<double> ps = ctx.config.sweep.p_locals;
  std::vector<double> sat;
  for (double p : ps) sat.push_back(saturation(t, p));
  std::string line = "saturation";
  for (std::size_t i = 0; i < ps.size(); ++i) line += fmt::format(" {:.2f}:{:.3f}", ps[i], sat[i]);
  o.note(line);
  for (std::size_t i = 1; i < sat.size(); ++i) o.require(sat[i] >= sat[i - 1], "saturation not monotone in p_local");
  o.require(sat.back() >= 0.9, "p_local 1 below 0.9");
  auto at = [&](double p, double l) {
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      if (std::abs(t.number(i, "p_local") - p) < 1e-9 && std::abs(t.number(i, "lambda") - l) < 1e-9)
        return t.number(i, "accepted");
    return 0.0;
  };
  const double gain = at(0.25, 0.5) / at(0.0, 0.5) - 1.0;
  o.note(fmt::format("gain at 0.5: {:.1f}%", 100 * gain));
  o.require(gain >= 0.15, "p_local 0.25 gain below 15%");
  return o;
}

Outcome ac5() {
  Outcome o;
  RunContext ctx = context();
  ctx.config.sweep.backends = {4, 16};
  ctx.config.sweep.sizes = {1024, 65536, 262144};
  const Table t = run_dma_util(ctx);
  auto util = [&](unsigned b, std::uint64_t s) {
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      if (t.number(i, "backends") == b && t.number(i, "bytes") == double(s)) return t.number(i, "utilization");
    return -1.0;
  };
  o.note(fmt::format("4/group: 1KiB {:.3f} 64KiB {:.3f} 256KiB {:.3f}; 16/group: 64KiB {:.3f} 256KiB {:.3f}",
                     util(4, 1024), util(4, 65536), util(4, 262144), util(16, 65536), util(16, 262144)));
  o.require(util(4, 65536) >= 0.9 && util(4, 262144) >= 0.9, "large transfers below 90%");
  o.require(util(4, 1024) >= 0.40 && util(4, 1024) <= 0.65, "1 KiB outside [0.40, 0.65]");
  o.require(util(16, 65536) < util(4, 65536) && util(16, 262144) < util(4, 262144),
            "16 backends not worse than 4");
  return o;
}

// Issue intervals of one core streaming independent loads to one route class.
std::vector<Cycle> issue_intervals(unsigned max_outstanding, unsigned first_tile) {
  Engine e(net(TopologyKind::Hybrid));
  const auto l = e.layout();
  PEModel pe;
  pe.max_outstanding = max_outstanding;
  Program p;
  const Addr base_row = l.sequential_span() >> (2 + l.bank_bits + l.tile_bits);
  for (unsigned i = 0; i < 200; ++i) {
    Instr in;
    in.op = Instr::Op::Load;
    in.addr = physical_address({first_tile + i % 3, i % 16, unsigned(base_row + i / 48), 0}, l);
    p.code.push_back(in);
  }
  std::vector<Cycle> at;
  for (int guard = 0; guard < 5000 && !p.done(); ++guard) {
    for (const auto& r : e.completions()) pe.retire(r.id, e.now());
    if (advance(pe, p, e, 2).issued) at.push_back(e.now());
    e.step();
  }
  std::vector<Cycle> d;
  for (std::size_t i = 50; i < at.size(); ++i) d.push_back(at[i] - at[i - 1]);
  return d;
}

Outcome ac6() {
  Outcome o;
  const auto& t = cfg().timing;
  struct Case {
    unsigned mo, tile, expect;
    const char* what;
  } cases[] = {{8, 1, 1, "local group, 8 outstanding"},
               {8, 20, 1, "remote group, 8 outstanding"},
               {1, 1, t.latency_local_group, "local group, 1 outstanding"},
               {1, 20, t.latency_remote_group, "remote group, 1 outstanding"}};
  for (const auto& c : cases) {
    const auto d = issue_intervals(c.mo, c.tile);
    const bool exact = !d.empty() && std::all_of(d.begin(), d.end(), [&](Cycle x) { return x == c.expect; });
    o.note(fmt::format("{}: 1/{}", c.what, d.empty() ? 0 : d.back()));
    o.require(exact, fmt::format("{} not exactly 1/{}", c.what, c.expect));
  }
  return o;
}

Outcome ac7() {
  Outcome o;
  unsigned layouts = 0;
  for (unsigned t = 0; t <= 14; ++t)
    for (unsigned b = 0; t + b <= 14; ++b)
      for (unsigned s = 0; t + b + s <= 14; ++s) {
        AddressLayout l;
        l.bank_bits = b;
        l.tile_bits = t;
        l.seq_bits = s;
        l.row_bits = s;
        ++layouts;
        const Addr span = l.sequential_span();
        std::vector<bool> hit(span, false);
        bool ok = true;
        for (Addr a = 0; a < span; ++a) {
          const Addr p = scramble(a, l);
          if (p >= span || hit[p]) ok = false;
          else hit[p] = true;
          if (descramble(p, l) != a) ok = false;
          if (region_of(a, l) != Region::sequential(unsigned(a / l.sequential_bytes_per_tile()))) ok = false;
          if (locate(p, l).tile != a / l.sequential_bytes_per_tile()) ok = false;
        }
        o.require(ok, fmt::format("layout t={} b={} s={} fails", t, b, s));
      }
  const auto l = AddressLayout::from(cfg());
  testing::Gen g(7);
  unsigned bad = 0;
  for (int i = 0; i < 1000000; ++i) {
    const Addr a = g.range(0, l.l1_bytes() - 1);
    if (descramble(scramble(a, l), l) != a || scramble(descramble(a, l), l) != a) ++bad;
  }
  o.note(fmt::format("{} layouts exhaustive, 1e6 round trips, {} mismatches", layouts, bad));
  o.require(bad == 0, "round trip mismatch");
  return o;
}

Outcome ac8() {
  Outcome o;
  testing::Gen g(8);
  const auto l = AddressLayout::from(cfg());
  for (auto k : {TopologyKind::One, TopologyKind::Four, TopologyKind::Hybrid})
    for (int run = 0; run < 3; ++run) {
      Engine e(net(k));
      const double lambda = g.unit();
      for (int cyc = 0; cyc < 3000; ++cyc) {
        for (unsigned c = 0; c < 256; ++c)
          if (g.coin(lambda) && e.can_issue(c)) e.issue(c, MemOp::read(), g.range(0, l.l1_bytes() / 4 - 1) * 4);
        e.step();
      }
      const auto s = e.drain();
      o.require(s.injected == s.completed, fmt::format("{} lost requests", to_string(k)));
    }

  for (auto k : {TopologyKind::One, TopologyKind::Four, TopologyKind::Hybrid}) {
    Engine e(net(k));
    const Addr word = l.sequential_span() + 0x1234 * 4;
    std::vector<unsigned> left(256, 100);
    unsigned pending = 25600;
    while (pending) {
      for (unsigned c = 0; c < 256; ++c)
        if (left[c] && e.can_issue(c)) {
          e.issue(c, MemOp::atomic(AmoKind::Add, 1), word);
          --left[c];
          --pending;
        }
      e.step();
    }
    e.drain();
    const Word v = e.peek(scramble(word, l));
    o.note(fmt::format("{} amo sum {}", to_string(k), v));
    o.require(v == 25600, "atomic sum wrong");
  }

  std::uint64_t ops = 0, bad = 0;
  for (int run = 0; run < 50; ++run) {
    Engine e(net(TopologyKind::Hybrid));
    e.enable_exec_log(true);
    std::vector<Addr> words;
    for (int i = 0; i < 4; ++i) words.push_back(g.range(0, l.l1_bytes() / 4 - 1) * 4);
    words.push_back(words[0] ^ 4);  // same bank neighbourhood contention
    std::vector<unsigned> cores;
    for (int i = 0; i < 8; ++i) cores.push_back(unsigned(g.range(0, 255)));
    for (int cyc = 0; cyc < 500; ++cyc) {
      for (unsigned c : cores) {
        if (!g.coin(0.6) || !e.can_issue(c)) continue;
        const Addr a = g.pick(words);
        switch (g.range(0, 4)) {
          case 0:
          case 1: e.issue(c, MemOp::load_reserved(), a); break;
          case 2: e.issue(c, MemOp::store_conditional(Word(g.u64())), a); break;
          case 3: e.issue(c, MemOp::write(Word(g.u64())), a); break;
          default: e.issue(c, MemOp::atomic(AmoKind::Add, 1), a); break;
        }
      }
      e.step();
    }
    e.drain();
    std::map<Addr, Word> mem;
    bad += testing::reservation_replay(e.exec_log(), l, mem);
    for (const auto& [a, v] : mem)
      if (e.peek(a) != v) ++bad;
    ops += e.exec_log().size();
  }
  o.note(fmt::format("lr/sc oracle: {} ops, {} mismatches", ops, bad));
  o.require(bad == 0, "reservation oracle mismatch");
  return o;
}

Outcome ac9() {
  Outcome o;
  testing::Gen g(9);
  const auto l = AddressLayout::from(cfg());
  std::uint64_t bytes = 0, bad = 0;
  for (int i = 0; i < 10000; ++i) {
    const unsigned bpg = unsigned(g.pick(std::vector<std::uint64_t>{1, 2, 4, 8, 16}));
    const auto regions = backend_regions(cfg(), bpg);
    const std::uint64_t len = g.range(0, 3) == 0 ? g.range(0, 64) : g.range(1, 20000);
    const Addr l1 = g.range(0, l.l1_bytes() - len);
    const Addr l2 = kL2Base + g.range(0, 1 << 20);
    const bool in = g.coin();
    const DmaRequest req = in ? DmaRequest{l2, l1, len} : DmaRequest{l1, l2, len};
    std::vector<std::uint8_t> seen(len, 0);
    for (const auto& chunk : dma_split(req, cfg()))
      for (const auto& b : dma_distribute(chunk, cfg(), regions)) {
        if ((b.dir == BurstDir::Read) != in) ++bad;
        for (std::uint64_t k = 0; k < b.len_bytes; ++k) {
          const Addr off = b.l1_addr + k - l1;
          if (off >= len || b.l2_addr + k - l2 != off) {
            ++bad;
            continue;
          }
          ++seen[off];
          const unsigned tile = locate(scramble((b.l1_addr + k) & ~Addr{3}, l), l).tile;
          const unsigned per = cfg().geometry.tiles_per_group / bpg;
          if (b.backend != (tile / 16) * bpg + (tile % 16) / per) ++bad;
        }
      }
    for (auto c : seen)
      if (c != 1) ++bad;
    bytes += len;
  }
  o.note(fmt::format("1e4 transfers, {} bytes, {} errors", bytes, bad));
  o.require(bad == 0, "coverage or ownership error");
  return o;
}

Outcome ac10() {
  Outcome o;
  testing::Gen g(10);
  auto par = icache_preset("l1-tag-l0-latch");
  auto ser = icache_preset("serial-l1");
  unsigned diff = 0, proxy = 0;
  for (int i = 0; i < 100; ++i) {
    FetchTrace t;
    Addr pc = 0x1000 + 4 * g.range(0, 1024);
    const unsigned n = unsigned(g.range(50, 2000));
    for (unsigned k = 0; k < n; ++k) {
      FetchEntry e;
      e.pc = pc;
      const auto r = g.range(0, 19);
      if (r == 0 && pc > 0x1000) {
        e.mark = FetchEntry::Mark::BackwardBranch;
        e.target = pc - 4 * g.range(1, std::min<Addr>(64, (pc - 0x1000) / 4));
        pc = e.target;
      } else if (r == 1) {
        e.mark = FetchEntry::Mark::Jump;
        e.target = 0x1000 + 4 * g.range(0, 4096);
        pc = e.target;
      } else {
        pc += 4;
      }
      t.entries.push_back(e);
    }
    const auto a = proxy_counts(par, t);
    const auto b = proxy_counts(ser, t);
    if (a.l1_outcomes != b.l1_outcomes) ++diff;
    if (b.data_way_reads != b.l1_hits || a.data_way_reads != a.l1_lookups * par.l1.ways) ++proxy;
  }
  o.require(diff == 0, fmt::format("{} traces differ between serial and parallel", diff));
  o.require(proxy == 0, fmt::format("{} traces break the data-way read identity", proxy));

  const auto c = icache_preset("serial-l1");
  unsigned loop_fail = 0;
  for (unsigned body = 1; body <= 32; ++body) {
    const auto warm = run_trace(FetchTrace::loop(0x1000, body, 1), c);
    const auto many = run_trace(FetchTrace::loop(0x1000, body, 50), c);
    if (many.l0_misses != warm.l0_misses) ++loop_fail;
  }
  o.note(fmt::format("100 traces, {} differ; {} of 32 loop sizes miss after warm-up", diff, loop_fail));
  o.require(loop_fail == 0, "loop misses after the first iteration");
  return o;
}

std::string run_experiment(Experiment e) {
  RunContext ctx = context();
  ctx.config.workload.window = 4000;
  ctx.config.workload.warmup = 500;
  ctx.config.workload.iterations = 8;
  switch (e) {
    case Experiment::NetworkSweep: return run_network_sweep(ctx).to_csv();
    case Experiment::ScrambleSweep: return run_scramble_sweep(ctx).to_csv();
    case Experiment::DmaUtil: return run_dma_util(ctx).to_csv();
    case Experiment::KernelRun: return run_kernels(ctx).to_csv();
    case Experiment::IcacheSim: return run_icache_sim(ctx, "").to_csv();
    case Experiment::DoubleBuffer: return run_double_buffer(ctx).to_csv();
  }
  return {};
}

Outcome ac11() {
  Outcome o;
  for (auto e : {Experiment::NetworkSweep, Experiment::ScrambleSweep, Experiment::DmaUtil, Experiment::KernelRun,
                 Experiment::IcacheSim, Experiment::DoubleBuffer}) {
    const auto h1 = std::hash<std::string>{}(run_experiment(e));
    const auto h2 = std::hash<std::string>{}(run_experiment(e));
    o.note(fmt::format("{} {:016x}", experiment_name(e), h1));
    o.require(h1 == h2, fmt::format("{} not reproducible", experiment_name(e)));
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> all = {
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4},   {"AC5", ac5},  {"AC6", ac6},
      {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10}, {"AC11", ac11}};
  std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0;
  for (const auto& [name, fn] : all) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fmt::print("{} {} ({:.1f}s) {}\n", name, o.pass ? "PASS" : "FAIL", secs, o.detail);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}
