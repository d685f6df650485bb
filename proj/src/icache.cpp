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

#include "mempool/icache.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <sstream>

namespace mempool {

namespace {

constexpr Cycle kNotReady = std::numeric_limits<Cycle>::max();

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Addr parse_number(const std::string& tok, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const Addr v = std::stoull(tok, &used, 0);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw TraceError("trace line " + std::to_string(line_no) + ": bad number '" + tok + "'");
  }
}

}  // namespace

void IcacheConfig::check() const {
  if (l0.lines == 0 || l0.line_instrs == 0 || !is_pow2(l0.line_instrs))
    throw ConfigError("L0 needs at least one line of a power-of-two instruction count");
  if (l1.ways == 0 || l1.line_bytes < kWordBytes || !is_pow2(l1.line_bytes))
    throw ConfigError("L1 line size must be a power of two of at least one word");
  if (l1.size_bytes % (l1.ways * l1.line_bytes) || l1.sets() == 0 || !is_pow2(l1.sets()))
    throw ConfigError("L1 set count must be a power of two");
  if (l0.line_bytes() > l1.line_bytes || l1.line_bytes % l0.line_bytes())
    throw ConfigError("L0 line must divide the L1 line");
  if (refill_bus_bytes == 0) throw ConfigError("refill bus width must be positive");
}

IcacheConfig icache_preset(std::string_view name) {
  const std::string n = lower(name);
  IcacheConfig c;
  c.name = n;
  // Start from the optimized organization and walk back as needed.
  c.l0 = L0Config{4, 8, true, 1, StoreKind::Scm};
  c.l1 = L1IcacheConfig{2048, 2, 32, L1Lookup::Parallel, StoreKind::Sram, StoreKind::Sram};
  if (n == "baseline") {
    c.l0.line_instrs = 4;
    c.l1.ways = 4;
    c.l1.line_bytes = 16;
  } else if (n == "wide-l0") {
    c.l1.ways = 4;
  } else if (n == "2-way") {
  } else if (n == "l1-tag-latch") {
    c.l1.tag_store = StoreKind::Latch;
  } else if (n == "l1-all-latch") {
    c.l1.tag_store = StoreKind::Latch;
    c.l1.data_store = StoreKind::Latch;
  } else if (n == "l1-tag-l0-latch") {
    c.l1.tag_store = StoreKind::Latch;
    c.l0.store = StoreKind::Latch;
  } else if (n == "serial-l1") {
    c.l1.tag_store = StoreKind::Latch;
    c.l0.store = StoreKind::Latch;
    c.l1.lookup = L1Lookup::Serial;
  } else {
    throw ConfigError("unknown icache configuration '" + std::string(name) + "'");
  }
  return c;
}

std::vector<std::string> icache_preset_names() {
  return {"baseline", "wide-l0", "2-way", "l1-tag-latch", "l1-all-latch", "l1-tag-l0-latch", "serial-l1"};
}

FetchTrace FetchTrace::parse(std::istream& in) {
  FetchTrace t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok)) continue;
    FetchEntry e;
    e.pc = parse_number(tok, line_no);
    if (e.pc % kWordBytes) throw TraceError("trace line " + std::to_string(line_no) + ": PC not word aligned");
    if (ss >> tok) {
      if (tok == "B" || tok == "b")
        e.mark = FetchEntry::Mark::BackwardBranch;
      else if (tok == "J" || tok == "j")
        e.mark = FetchEntry::Mark::Jump;
      else
        throw TraceError("trace line " + std::to_string(line_no) + ": unknown marker '" + tok + "'");
      if (!(ss >> tok)) throw TraceError("trace line " + std::to_string(line_no) + ": marker without target");
      e.target = parse_number(tok, line_no);
      if (e.target % kWordBytes)
        throw TraceError("trace line " + std::to_string(line_no) + ": target not word aligned");
      if (e.mark == FetchEntry::Mark::BackwardBranch && e.target > e.pc)
        throw TraceError("trace line " + std::to_string(line_no) + ": backward branch jumps forward");
    }
    if (ss >> tok) throw TraceError("trace line " + std::to_string(line_no) + ": trailing text");
    t.entries.push_back(e);
  }
  return t;
}

FetchTrace FetchTrace::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse(in);
}

FetchTrace FetchTrace::loop(Addr base, unsigned body, unsigned iterations) {
  FetchTrace t;
  t.entries.reserve(std::size_t(body) * iterations);
  for (unsigned it = 0; it < iterations; ++it)
    for (unsigned i = 0; i < body; ++i) {
      FetchEntry e{base + Addr(i) * kWordBytes, FetchEntry::Mark::None, 0};
      if (i + 1 == body) {
        e.mark = FetchEntry::Mark::BackwardBranch;
        e.target = base;
      }
      t.entries.push_back(e);
    }
  return t;
}

FetchTrace FetchTrace::straight(Addr base, unsigned n) {
  FetchTrace t;
  t.entries.reserve(n);
  for (unsigned i = 0; i < n; ++i) t.entries.push_back({base + Addr(i) * kWordBytes, FetchEntry::Mark::None, 0});
  return t;
}

TileIcache::TileIcache(const IcacheConfig& cfg, unsigned cores) : cfg_(cfg), l0_(cores) {
  cfg_.check();
  l1_.assign(std::size_t(cfg_.l1.sets()) * cfg_.l1.ways, L1Way{0, false, 0, 0});
}

void TileIcache::learn(const FetchTrace& trace) {
  for (const auto& e : trace.entries)
    if (e.mark != FetchEntry::Mark::None) mark(e.pc, e.mark, e.target);
}

void TileIcache::mark(Addr pc, FetchEntry::Mark m, Addr target) {
  if (m == FetchEntry::Mark::None)
    markers_.erase(pc);
  else
    markers_[pc] = target;
}

Addr TileIcache::predict_next(Addr line) const {
  const unsigned lb = cfg_.l0.line_bytes();
  for (unsigned i = 0; i < cfg_.l0.line_instrs; ++i) {
    auto it = markers_.find(line * lb + Addr(i) * kWordBytes);
    if (it != markers_.end()) return it->second / lb;
  }
  return line + 1;
}

TileIcache::L0Line* TileIcache::l0_find(unsigned core, Addr line) {
  for (auto& l : l0_[core].lines)
    if (l.line == line) return &l;
  return nullptr;
}

void TileIcache::request(unsigned core, Addr line, bool prefetch) {
  auto& lines = l0_[core].lines;
  if (lines.size() >= cfg_.l0.lines) lines.pop_front();
  lines.push_back({line, kNotReady});
  ++stats_.l0_misses;
  if (prefetch) ++stats_.prefetches;
  for (auto& p : queue_)
    if (p.line == line) {
      p.requesters.push_back(core);
      return;
    }
  queue_.push_back({line, {core}});
}

bool TileIcache::l1_lookup(Addr l0_line, Cycle now, Cycle& ready) {
  const Addr line = l0_line * cfg_.l0.line_bytes() / cfg_.l1.line_bytes;
  const unsigned sets = cfg_.l1.sets();
  const unsigned ways = cfg_.l1.ways;
  const std::size_t set = std::size_t(line % sets);
  const Addr tag = line / sets;
  L1Way* base = &l1_[set * ways];

  ++stats_.l1_lookups;
  stats_.tag_reads += ways;
  const Cycle looked_up = now + cfg_.l1.lookup_cycles();

  L1Way* hit = nullptr;
  for (unsigned w = 0; w < ways; ++w)
    if (base[w].valid && base[w].tag == tag) hit = &base[w];

  if (hit) {
    ++stats_.l1_hits;
    stats_.data_way_reads += cfg_.l1.lookup == L1Lookup::Parallel ? ways : 1;
    hit->used = ++use_clock_;
    ready = std::max(looked_up, hit->ready);
    stats_.l1_outcomes.push_back(true);
    return true;
  }
  ++stats_.l1_misses;
  if (cfg_.l1.lookup == L1Lookup::Parallel) stats_.data_way_reads += ways;
  stats_.refill_beats += (cfg_.l1.line_bytes + cfg_.refill_bus_bytes - 1) / cfg_.refill_bus_bytes;
  L1Way* victim = base;
  for (unsigned w = 0; w < ways; ++w) {
    if (!base[w].valid) {
      victim = &base[w];
      break;
    }
    if (base[w].used < victim->used) victim = &base[w];
  }
  ready = looked_up + cfg_.refill_latency;
  *victim = L1Way{tag, true, ready, ++use_clock_};
  stats_.l1_outcomes.push_back(false);
  return false;
}

RefillEvent TileIcache::refill(Addr line, std::vector<unsigned> requesters, Cycle now) {
  if (requesters.empty()) throw std::invalid_argument("refill without requesters");
  RefillEvent ev;
  ev.line = line;
  ev.hit = l1_lookup(line, now, ev.ready);
  stats_.refills_coalesced += requesters.size() - 1;
  ev.requesters = std::move(requesters);
  return ev;
}

void TileIcache::tick(Cycle now) {
  stats_.cycles = now + 1;
  if (queue_.empty()) return;
  Pending p = std::move(queue_.front());
  queue_.pop_front();
  const RefillEvent ev = refill(p.line, std::move(p.requesters), now);
  for (unsigned core : ev.requesters)
    if (L0Line* l = l0_find(core, ev.line); l && l->ready == kNotReady) l->ready = ev.ready;
}

bool TileIcache::fetch(unsigned core, Addr pc, Cycle now) {
  L0State& st = l0_[core];
  const Addr line = pc / cfg_.l0.line_bytes();
  const bool first = !st.pending_demand;
  L0Line* l = l0_find(core, line);
  if (first) ++stats_.fetches;
  if (!l) {
    request(core, line, false);
  } else if (first) {
    ++stats_.l0_hits;
  }
  if (cfg_.l0.prefetch && line != st.last_line) {
    st.last_line = line;
    Addr next = line;
    for (unsigned d = 0; d < cfg_.l0.prefetch_depth; ++d) {
      next = predict_next(next);
      if (!l0_find(core, next)) request(core, next, true);
    }
  }
  l = l0_find(core, line);
  if (l && l->ready <= now) {
    st.pending_demand = false;
    return true;
  }
  st.pending_demand = true;
  ++stats_.stall_cycles;
  return false;
}

IcacheStats run_trace(const FetchTrace& trace, const IcacheConfig& cfg, unsigned cores) {
  TileIcache ic(cfg, cores);
  ic.learn(trace);
  std::vector<std::size_t> pos(cores, 0);
  const std::size_t n = trace.entries.size();
  const Cycle bound = Cycle(n + 16) * cores * (cfg.refill_latency + cfg.l1.lookup_cycles() + 4) + 1024;
  for (Cycle now = 0;; ++now) {
    if (now > bound) throw std::logic_error("icache replay made no progress");
    bool done = true;
    for (unsigned c = 0; c < cores; ++c) done = done && pos[c] == n;
    if (done && ic.idle()) break;
    ic.tick(now);
    for (unsigned c = 0; c < cores; ++c)
      if (pos[c] < n && ic.fetch(c, trace.entries[pos[c]].pc, now)) ++pos[c];
  }
  return ic.stats();
}

IcacheStats proxy_counts(const IcacheConfig& cfg, const FetchTrace& trace) { return run_trace(trace, cfg, 1); }

}  // namespace mempool
