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

#include "mempool/pe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace mempool {

namespace {

constexpr Cycle kPending = std::numeric_limits<Cycle>::max();
constexpr Addr kCodeBase = 0x1000;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

Addr uniform_word(Rng& rng, Addr words) { return std::uniform_int_distribution<Addr>(0, words - 1)(rng); }

/// Logical address of word `w` of `tile`'s sequential region.
Addr sequential_word(const AddressLayout& l, unsigned tile, Addr w) {
  return (Addr(tile) << (l.seq_bits + l.bank_bits + l.byte_bits)) + w * kWordBytes;
}

/// Uniform word outside the sequential region of `tile`.
Addr word_outside_own_region(Rng& rng, const AddressLayout& l, unsigned tile) {
  const Addr total = l.l1_bytes() / kWordBytes;
  const Addr own = l.sequential_bytes_per_tile() / kWordBytes;
  Addr w = uniform_word(rng, total - own);
  const Addr own_start = sequential_word(l, tile, 0) / kWordBytes;
  if (w >= own_start) w += own;
  return w * kWordBytes;
}

/// Uniform word in the interleaved region.
Addr interleaved_word(Rng& rng, const AddressLayout& l) {
  const Addr start = l.sequential_span() / kWordBytes;
  const Addr total = l.l1_bytes() / kWordBytes;
  if (start >= total) return uniform_word(rng, total) * kWordBytes;
  return (start + uniform_word(rng, total - start)) * kWordBytes;
}

}  // namespace

Rng core_rng(std::uint64_t seed, unsigned core) {
  return Rng(splitmix64(splitmix64(seed) ^ (0x632be59bd9b4e019ull * (core + 1))));
}

std::string_view to_string(KernelName k) {
  switch (k) {
    case KernelName::Matmul: return "matmul";
    case KernelName::Conv: return "conv";
    case KernelName::Dct: return "dct";
    case KernelName::Axpy: return "axpy";
    case KernelName::Dotp: return "dotp";
  }
  return "?";
}

KernelName parse_kernel(std::string_view name) {
  for (KernelName k : {KernelName::Matmul, KernelName::Conv, KernelName::Dct, KernelName::Axpy, KernelName::Dotp})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown kernel '" + std::string(name) + "'");
}

KernelPreset kernel_preset(KernelName name) {
  KernelPreset p;
  p.name = name;
  switch (name) {
    case KernelName::Matmul:
      // 4x4 output block: eight operand loads feed 16 MACs.
      p.loads_per_iter = 8;
      p.stores_per_iter = 0;
      p.compute_per_iter = 16;
      p.local_fraction = 0.0;
      p.unroll = 1;
      p.iterations = 64;
      p.dma_in_bytes_per_iter = 0.5;
      p.dma_out_bytes_per_iter = 0.25;
      break;
    case KernelName::Conv:
      p.loads_per_iter = 6;
      p.stores_per_iter = 2;
      p.compute_per_iter = 18;
      p.local_fraction = 0.9;
      p.unroll = 1;
      p.iterations = 64;
      p.dma_in_bytes_per_iter = 8;
      p.dma_out_bytes_per_iter = 8;
      break;
    case KernelName::Dct:
      p.loads_per_iter = 8;
      p.stores_per_iter = 8;
      p.compute_per_iter = 24;
      p.compute_is_mac = false;
      p.local_fraction = 1.0;
      p.unroll = 1;
      p.iterations = 32;
      p.dma_in_bytes_per_iter = 32;
      p.dma_out_bytes_per_iter = 32;
      break;
    case KernelName::Axpy:
      p.loads_per_iter = 2;
      p.stores_per_iter = 1;
      p.compute_per_iter = 1;
      p.local_fraction = 1.0;
      p.unroll = 4;
      p.iterations = 64;
      p.dma_in_bytes_per_iter = 8;
      p.dma_out_bytes_per_iter = 4;
      break;
    case KernelName::Dotp:
      p.loads_per_iter = 2;
      p.stores_per_iter = 0;
      p.compute_per_iter = 1;
      p.local_fraction = 1.0;
      p.unroll = 4;
      p.iterations = 64;
      p.reduction = true;
      p.dma_in_bytes_per_iter = 8;
      p.dma_out_bytes_per_iter = 0;
      break;
  }
  return p;
}

void TrafficConfig::check() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda must lie in [0, 1]");
  if (!(p_local >= 0.0 && p_local <= 1.0)) throw ConfigError("p_local must lie in [0, 1]");
}

bool PEModel::retire(ReqId id, Cycle now, Cycle* generated) {
  for (std::size_t i = 0; i < scoreboard.size(); ++i) {
    if (scoreboard[i].id != id) continue;
    if (scoreboard[i].dst >= 0) reg_ready[std::size_t(scoreboard[i].dst)] = now;
    if (generated) *generated = scoreboard[i].generated;
    scoreboard.erase(scoreboard.begin() + std::ptrdiff_t(i));
    return true;
  }
  return false;
}

std::optional<Addr> gen_next(PEModel& pe, const TrafficConfig& traffic, Cycle cycle, Rng& rng,
                             const ValidatedConfig& cfg) {
  if (traffic.kind == TrafficConfig::Kind::Kernel) return std::nullopt;
  if (pe.state != PEModel::State::Running || pe.in_use() >= pe.max_outstanding) return std::nullopt;
  if (!(uniform01(rng) < traffic.lambda)) return std::nullopt;

  const AddressLayout l = AddressLayout::from(cfg);
  const unsigned tile = cfg.tile_of_core(pe.core);
  Addr addr = 0;
  if (traffic.kind == TrafficConfig::Kind::Uniform) {
    addr = uniform_word(rng, l.l1_bytes() / kWordBytes) * kWordBytes;
  } else if (uniform01(rng) < traffic.p_local) {
    addr = sequential_word(l, tile, uniform_word(rng, l.sequential_bytes_per_tile() / kWordBytes));
  } else {
    addr = word_outside_own_region(rng, l, tile);
  }
  pe.source.push_back({addr, cycle});
  return addr;
}

void charge(StallBreakdown& s, CycleClass c) {
  switch (c) {
    case CycleClass::Compute: ++s.compute_cycles; break;
    case CycleClass::Control: ++s.control_cycles; break;
    case CycleClass::Sync: ++s.synchronization_cycles; break;
    case CycleClass::Icache: ++s.icache_stall_cycles; break;
    case CycleClass::Lsu: ++s.lsu_stall_cycles; break;
    case CycleClass::Raw: ++s.raw_stall_cycles; break;
  }
}

AdvanceResult advance(PEModel& pe, Program& program, Engine& engine, unsigned mac_depth, bool fetch_ok) {
  const Cycle now = engine.now();
  AdvanceResult r;
  if (pe.state == PEModel::State::SleepingAtBarrier) {
    if (pe.wake_at > now) {
      r.charged = CycleClass::Sync;
      return r;
    }
    pe.state = PEModel::State::Running;
  }
  if (program.done()) {
    pe.state = PEModel::State::Done;
    r.charged = CycleClass::Sync;
    return r;
  }
  pe.state = PEModel::State::Running;
  if (!fetch_ok) {
    r.charged = CycleClass::Icache;
    return r;
  }
  const Instr& ins = program.peek();
  for (std::int8_t s : ins.src)
    if (s >= 0 && pe.reg_ready[std::size_t(s)] > now) {
      pe.state = PEModel::State::StalledRaw;
      r.charged = CycleClass::Raw;
      return r;
    }
  if (ins.dst >= 0 && pe.reg_ready[std::size_t(ins.dst)] > now) {
    pe.state = PEModel::State::StalledRaw;
    r.charged = CycleClass::Raw;
    return r;
  }

  switch (ins.op) {
    case Instr::Op::Compute:
      if (ins.dst >= 0) pe.reg_ready[std::size_t(ins.dst)] = now + 1;
      r.charged = CycleClass::Compute;
      break;
    case Instr::Op::Mac:
      if (ins.dst >= 0) pe.reg_ready[std::size_t(ins.dst)] = now + std::max(1u, mac_depth);
      r.charged = CycleClass::Compute;
      break;
    case Instr::Op::Branch:
      r.charged = CycleClass::Control;
      break;
    case Instr::Op::Load:
    case Instr::Op::Store:
    case Instr::Op::Amo:
    case Instr::Op::Barrier: {
      if (pe.scoreboard.size() >= pe.max_outstanding || !engine.can_issue(pe.core)) {
        pe.state = PEModel::State::StalledLsu;
        r.charged = CycleClass::Lsu;
        return r;
      }
      MemOp op = MemOp::read();
      if (ins.op == Instr::Op::Store) op = MemOp::write(ins.value);
      if (ins.op == Instr::Op::Amo) op = MemOp::atomic(ins.amo, ins.value);
      if (ins.op == Instr::Op::Barrier) op = MemOp::atomic(AmoKind::Add, 1);
      const ReqId id = engine.issue(pe.core, op, ins.addr);
      pe.scoreboard.push_back({id, ins.dst, now});
      if (ins.dst >= 0) pe.reg_ready[std::size_t(ins.dst)] = kPending;
      if (ins.op == Instr::Op::Barrier) {
        pe.state = PEModel::State::SleepingAtBarrier;
        pe.wake_at = kPending;
      }
      r.issued = id;
      r.charged = CycleClass::Control;
      break;
    }
  }
  ++program.next;
  return r;
}

Cycle barrier(const std::vector<Cycle>& arrivals, unsigned wakeup_latency) {
  if (arrivals.empty()) throw std::invalid_argument("barrier without participants");
  return *std::max_element(arrivals.begin(), arrivals.end()) + wakeup_latency;
}

Program make_kernel_program(const KernelPreset& preset, unsigned core, const ValidatedConfig& cfg,
                            std::uint64_t seed, Addr barrier_addr, Addr reduction_addr) {
  const AddressLayout l = AddressLayout::from(cfg);
  const unsigned tile = cfg.tile_of_core(core);
  const unsigned slot = core % cfg.geometry.cores_per_tile;
  const unsigned B = cfg.geometry.banks_per_tile;
  const unsigned banks_per_core = std::max(1u, B / cfg.geometry.cores_per_tile);
  const unsigned first_bank = (slot * banks_per_core) % B;
  const Addr seq_rows = Addr{1} << l.seq_bits;
  Rng rng = core_rng(seed ^ 0x4b45524eull, core);

  std::uint64_t counter = 0;
  auto local_addr = [&] {
    const Addr bank = first_bank + counter % banks_per_core;
    const Addr row = (counter / banks_per_core) % seq_rows;
    ++counter;
    return sequential_word(l, tile, row * B + bank);
  };
  auto data_addr = [&] {
    if (preset.local_fraction >= 1.0 || uniform01(rng) < preset.local_fraction) return local_addr();
    return interleaved_word(rng, l);
  };

  constexpr std::int8_t kLoadRegs = 20;
  constexpr std::int8_t kLoadBase = 1;
  constexpr std::int8_t kAccBase = 22;
  constexpr std::int8_t kAccRegs = 8;

  Program prog;
  const unsigned body = preset.loads() + preset.computes() + preset.stores() + 1;
  prog.code.reserve(std::size_t(body) * preset.iterations + 4);
  for (unsigned it = 0; it < preset.iterations; ++it) {
    Addr pc = kCodeBase;
    std::vector<std::int8_t> loaded;
    for (unsigned j = 0; j < preset.loads(); ++j) {
      Instr ins;
      ins.op = Instr::Op::Load;
      ins.dst = std::int8_t(kLoadBase + j % kLoadRegs);
      ins.addr = data_addr();
      ins.pc = pc;
      pc += kWordBytes;
      loaded.push_back(ins.dst);
      prog.code.push_back(ins);
    }
    std::vector<std::int8_t> results;
    const unsigned n_loaded = unsigned(loaded.size());
    for (unsigned k = 0; k < preset.computes(); ++k) {
      Instr ins;
      ins.op = preset.compute_is_mac ? Instr::Op::Mac : Instr::Op::Compute;
      ins.dst = std::int8_t(kAccBase + k % kAccRegs);
      if (n_loaded) {
        ins.src[0] = loaded[k % n_loaded];
        ins.src[1] = loaded[(k + n_loaded / 2) % n_loaded];
      }
      ins.pc = pc;
      pc += kWordBytes;
      results.push_back(ins.dst);
      prog.code.push_back(ins);
    }
    for (unsigned j = 0; j < preset.stores(); ++j) {
      Instr ins;
      ins.op = Instr::Op::Store;
      if (!results.empty()) ins.src[0] = results[j % results.size()];
      ins.addr = data_addr();
      ins.value = Word(j);
      ins.pc = pc;
      pc += kWordBytes;
      prog.code.push_back(ins);
    }
    Instr br;
    br.op = Instr::Op::Branch;
    br.pc = pc;
    prog.code.push_back(br);
  }

  Addr pc = kCodeBase + Addr(body) * kWordBytes;
  if (preset.reduction) {
    Instr amo;
    amo.op = Instr::Op::Amo;
    amo.amo = AmoKind::Add;
    amo.addr = reduction_addr;
    amo.value = Word(preset.iterations * preset.computes());
    amo.src[0] = kAccBase;
    amo.pc = pc;
    pc += kWordBytes;
    prog.code.push_back(amo);
  }
  Instr bar;
  bar.op = Instr::Op::Barrier;
  bar.addr = barrier_addr;
  bar.pc = pc;
  prog.code.push_back(bar);
  return prog;
}

KernelResult run_kernel(const NetworkModel& net, const KernelPreset& preset_in, const KernelOptions& opt) {
  const auto& cfg = net.config();
  KernelPreset preset = preset_in;
  if (opt.iterations) preset.iterations = *opt.iterations;

  const unsigned cores = opt.active_cores ? std::min(opt.active_cores, cfg.num_cores()) : cfg.num_cores();
  const AddressLayout l = AddressLayout::from(cfg);
  const Addr barrier_addr = l.l1_bytes() - kWordBytes;
  const Addr reduction_addr = l.l1_bytes() - 2 * kWordBytes;

  Engine engine(net);
  const Addr barrier_phys = scramble(barrier_addr, l);
  const Addr reduction_phys = scramble(reduction_addr, l);

  std::vector<PEModel> pes(cores);
  std::vector<Program> progs(cores);
  std::vector<bool> fetched(cores, false);
  for (unsigned c = 0; c < cores; ++c) {
    pes[c].core = c;
    pes[c].max_outstanding = opt.max_outstanding;
    progs[c] = make_kernel_program(preset, c, cfg, opt.seed, barrier_addr, reduction_addr);
  }

  const unsigned N = cfg.geometry.cores_per_tile;
  std::vector<std::unique_ptr<TileIcache>> icaches;
  if (opt.model_icache) {
    const IcacheConfig ic = opt.icache.value_or(icache_preset("serial-l1"));
    for (unsigned t = 0; t * N < cores; ++t) {
      icaches.push_back(std::make_unique<TileIcache>(ic, N));
      for (const Instr& ins : progs[t * N].code)
        if (ins.op == Instr::Op::Branch) icaches.back()->mark(ins.pc, FetchEntry::Mark::BackwardBranch, kCodeBase);
    }
  }

  KernelResult res;
  res.kernel = preset.name;
  const std::uint64_t bound = std::uint64_t(progs.empty() ? 0 : progs[0].code.size()) * 200 + 100000;
  for (;;) {
    const Cycle now = engine.now();
    if (now > bound) throw DrainTimeout(engine.in_flight());
    for (const Response& resp : engine.completions()) {
      if (resp.source >= cores) continue;
      pes[resp.source].retire(resp.id, now);
      if (resp.kind == OpKind::Amo && resp.addr == barrier_phys && resp.value + 1 == cores) {
        engine.poke(barrier_phys, 0);
        for (auto& pe : pes)
          if (pe.state == PEModel::State::SleepingAtBarrier) pe.wake_at = now + cfg.timing.wakeup_latency;
      }
    }

    bool all_done = true;
    for (unsigned c = 0; c < cores; ++c)
      all_done = all_done && progs[c].done() &&
                 (pes[c].state != PEModel::State::SleepingAtBarrier || pes[c].wake_at <= now);
    if (all_done) break;

    for (auto& ic : icaches) ic->tick(now);
    for (unsigned c = 0; c < cores; ++c) {
      PEModel& pe = pes[c];
      bool fetch_ok = true;
      const bool awake = pe.state != PEModel::State::SleepingAtBarrier || pe.wake_at <= now;
      if (!icaches.empty() && awake && !progs[c].done() && !fetched[c])
        fetched[c] = icaches[c / N]->fetch(c % N, progs[c].peek().pc, now);
      if (!icaches.empty() && !progs[c].done()) fetch_ok = fetched[c];
      const std::size_t before = progs[c].next;
      const AdvanceResult r = advance(pe, progs[c], engine, opt.mac_depth, fetch_ok);
      if (progs[c].next != before) {
        ++res.instructions;
        fetched[c] = false;
      }
      if (r.issued) ++res.requests;
      charge(res.stalls, r.charged);
    }
    engine.step();
  }
  res.cycles = engine.now();
  engine.drain();
  res.reduction_value = engine.peek(reduction_phys);
  engine.mutable_stats().stalls = res.stalls;
  return res;
}

TrafficResult run_traffic(const NetworkModel& net, const TrafficConfig& traffic, const TrafficRunOptions& opt) {
  traffic.check();
  if (traffic.kind == TrafficConfig::Kind::Kernel)
    throw ConfigError("kernel traffic runs through run_kernel");
  const auto& cfg = net.config();
  const unsigned cores = cfg.num_cores();
  Engine engine(net);
  std::vector<PEModel> pes(cores);
  std::vector<Rng> rngs;
  rngs.reserve(cores);
  for (unsigned c = 0; c < cores; ++c) {
    pes[c].core = c;
    pes[c].max_outstanding = opt.max_outstanding;
    rngs.push_back(core_rng(traffic.seed, c));
  }

  TrafficResult res;
  res.lambda = traffic.lambda;
  res.p_local = traffic.p_local;
  std::uint64_t latency_sum = 0, wait_sum = 0;
  std::array<std::uint64_t, kRouteClassSlots> class_sum{};
  std::vector<std::uint64_t> hist(4096, 0);  // last bin collects the tail
  const Cycle end = opt.warmup + opt.window;

  for (Cycle now = 0; now < end; ++now) {
    const bool in_window = now >= opt.warmup;
    for (const Response& resp : engine.completions()) {
      Cycle generated = resp.issue_cycle;
      pes[resp.source].retire(resp.id, now, &generated);
      if (!in_window) continue;
      const Cycle lat = now - resp.issue_cycle;
      ++res.completed;
      latency_sum += lat;
      wait_sum += resp.issue_cycle - generated;
      ++hist[std::min<Cycle>(lat, hist.size() - 1)];
      ++res.class_count[slot_of(resp.route)];
      class_sum[slot_of(resp.route)] += lat;
    }
    for (unsigned c = 0; c < cores; ++c) {
      PEModel& pe = pes[c];
      if (gen_next(pe, traffic, now, rngs[c], cfg) && in_window) ++res.generated;
      if (!pe.source.empty() && engine.can_issue(c)) {
        const auto g = pe.source.front();
        pe.source.pop_front();
        const ReqId id = engine.issue(c, MemOp::read(), g.addr);
        pe.scoreboard.push_back({id, -1, g.generated});
      }
    }
    engine.step();
  }
  if (opt.drain) {
    for (unsigned c = 0; c < cores; ++c) {
      while (!pes[c].source.empty()) {
        while (!engine.can_issue(c)) engine.step();
        engine.issue(c, MemOp::read(), pes[c].source.front().addr);
        pes[c].source.pop_front();
      }
    }
    const SimStats s = engine.drain();
    if (s.injected != s.completed) throw InvariantViolation("requests lost during drain");
  }

  const double denom = double(cores) * double(opt.window);
  res.offered = double(res.generated) / denom;
  res.accepted = double(res.completed) / denom;
  res.mean_latency = res.completed ? double(latency_sum) / double(res.completed) : 0.0;
  res.mean_source_wait = res.completed ? double(wait_sum) / double(res.completed) : 0.0;
  for (unsigned k = 0; k < kRouteClassSlots; ++k)
    res.class_latency[k] = res.class_count[k] ? double(class_sum[k]) / double(res.class_count[k]) : 0.0;
  auto percentile = [&](double q) {
    const auto target = std::uint64_t(std::ceil(q * double(res.completed)));
    std::uint64_t seen = 0;
    for (std::size_t i = 0; i < hist.size(); ++i)
      if ((seen += hist[i]) >= target && target) return Cycle(i);
    return Cycle{0};
  };
  res.p50_latency = percentile(0.50);
  res.p99_latency = percentile(0.99);
  return res;
}

}  // namespace mempool
