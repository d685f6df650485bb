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

#include "mempool/uplink.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <unordered_map>

namespace mempool {

namespace {

constexpr unsigned kRoot = ~0u;
constexpr Cycle kNever = std::numeric_limits<Cycle>::max();

unsigned ceil_div(std::uint64_t a, std::uint64_t b) { return unsigned((a + b - 1) / b); }

void check_l1_range(Addr addr, std::uint64_t len, const ValidatedConfig& cfg) {
  const Addr l1 = AddressLayout::from(cfg).l1_bytes();
  if (addr > l1 || len > l1 - addr) throw RangeOutOfMemory("DMA range exceeds L1");
}

}  // namespace

void UplinkParams::check(const ValidatedConfig& cfg) const {
  if (backends_per_group == 0 || cfg.geometry.tiles_per_group % backends_per_group)
    throw ConfigError("backends per group must divide the tiles per group");
  if (axi_width == 0 || !is_pow2(axi_width)) throw ConfigError("AXI width must be a power of two");
  if (axi_radix < 2) throw ConfigError("AXI radix must be at least 2");
  if (backend_outstanding == 0) throw ConfigError("backends need at least one outstanding transaction");
  if (axi_min_txn_cycles == 0) throw ConfigError("minimum transaction occupancy must be positive");
  if (rocache_ways == 0 || rocache_line_bytes == 0 || !is_pow2(rocache_line_bytes) ||
      rocache_bytes % (rocache_ways * rocache_line_bytes) ||
      !is_pow2(rocache_bytes / (rocache_ways * rocache_line_bytes)))
    throw ConfigError("RO cache geometry must give a power-of-two set count");
  if (rocache_stages == 0) throw ConfigError("RO cache needs at least one stage");
}

AxiTree::AxiTree(const ValidatedConfig& cfg, const UplinkParams& up)
    : radix_(up.axi_radix), groups_(cfg.geometry.groups), tiles_(cfg.num_tiles()), width_(up.axi_width) {
  const unsigned T = cfg.geometry.tiles_per_group;
  const unsigned bpg = up.backends_per_group;
  leaf_parent_.assign(tiles_ + groups_ * bpg, kRoot);
  for (unsigned g = 0; g < groups_; ++g) {
    // Children at the current level: (is_leaf, index).
    std::vector<std::pair<bool, unsigned>> level;
    for (unsigned t = 0; t < T; ++t) level.push_back({true, g * T + t});
    for (unsigned b = 0; b < bpg; ++b) level.push_back({true, tiles_ + g * bpg + b});
    for (;;) {
      const unsigned parents = ceil_div(level.size(), radix_);
      const unsigned first = unsigned(node_parent_.size());
      for (unsigned p = 0; p < parents; ++p) {
        node_parent_.push_back(kRoot);
        node_group_.push_back(g);
        is_top_.push_back(false);
      }
      for (std::size_t i = 0; i < level.size(); ++i) {
        const unsigned parent = first + unsigned(i / radix_);
        if (level[i].first)
          leaf_parent_[level[i].second] = parent;
        else
          node_parent_[level[i].second] = parent;
      }
      if (parents == 1) {
        is_top_[first] = true;
        break;
      }
      level.clear();
      for (unsigned p = 0; p < parents; ++p) level.push_back({false, first + p});
    }
  }
  node_bytes_.assign(node_parent_.size(), 0);
}

std::vector<unsigned> AxiTree::path(unsigned leaf) const {
  std::vector<unsigned> p;
  for (unsigned n = leaf_parent_.at(leaf); n != kRoot; n = node_parent_[n]) p.push_back(n);
  return p;
}

unsigned AxiTree::top_port_of(unsigned leaf) const { return node_group_[path(leaf).back()]; }

void AxiTree::record(unsigned leaf, std::uint64_t bytes) {
  leaf_bytes_ += bytes;
  for (unsigned n : path(leaf)) node_bytes_[n] += bytes;
}

std::uint64_t AxiTree::top_bytes() const {
  std::uint64_t sum = 0;
  for (std::size_t n = 0; n < node_bytes_.size(); ++n)
    if (is_top_[n]) sum += node_bytes_[n];
  return sum;
}

std::vector<BackendRegion> backend_regions(const ValidatedConfig& cfg, unsigned backends_per_group) {
  const unsigned T = cfg.geometry.tiles_per_group;
  if (backends_per_group == 0 || T % backends_per_group)
    throw ConfigError("backends per group must divide the tiles per group");
  const unsigned per = T / backends_per_group;
  std::vector<BackendRegion> r;
  for (unsigned b = 0; b < cfg.geometry.groups * backends_per_group; ++b) r.push_back({b, b * per, per});
  return r;
}

std::vector<DmaRequest> dma_split(const DmaRequest& req, const ValidatedConfig& cfg) {
  const bool src_l1 = req.src < kL2Base;
  const bool dst_l1 = req.dst < kL2Base;
  if (src_l1 == dst_l1) throw std::invalid_argument("DMA transfer must touch L1 on exactly one side");
  if (req.len == 0) return {};
  check_l1_range(req.l1_addr(), req.len, cfg);
  if (req.l2_addr() + req.len < req.l2_addr()) throw RangeOutOfMemory("DMA range wraps the address space");

  const Addr line = Addr(cfg.num_banks()) * kWordBytes;
  std::vector<DmaRequest> out;
  Addr l1 = req.l1_addr();
  const Addr end = l1 + req.len;
  while (l1 < end) {
    const Addr next = std::min(end, (l1 / line + 1) * line);
    const Addr off = l1 - req.l1_addr();
    DmaRequest c;
    c.len = next - l1;
    if (dst_l1) {
      c.dst = l1;
      c.src = req.src + off;
    } else {
      c.src = l1;
      c.dst = req.dst + off;
    }
    out.push_back(c);
    l1 = next;
  }
  return out;
}

std::vector<Burst> dma_distribute(const DmaRequest& chunk, const ValidatedConfig& cfg,
                                  const std::vector<BackendRegion>& regions) {
  std::vector<Burst> out;
  if (chunk.len == 0) return out;
  const AddressLayout l = AddressLayout::from(cfg);
  const Addr line = Addr(cfg.num_banks()) * kWordBytes;
  const Addr base = chunk.l1_addr();
  if (base / line != (base + chunk.len - 1) / line) throw std::invalid_argument("chunk spans an L1 line");
  check_l1_range(base, chunk.len, cfg);

  std::vector<unsigned> backend_of_tile(cfg.num_tiles(), 0);
  for (const auto& r : regions)
    for (unsigned t = r.first_tile; t < r.first_tile + r.tiles && t < cfg.num_tiles(); ++t)
      backend_of_tile[t] = r.backend;

  auto owner = [&](Addr logical) {
    return backend_of_tile[locate_unchecked(scramble_unchecked(logical & ~Addr{3}, l), l).tile];
  };
  const BurstDir dir = chunk.l1_is_dst() ? BurstDir::Read : BurstDir::Write;
  const Addr end = base + chunk.len;
  Addr run_start = base;
  unsigned run_owner = owner(base);
  Addr a = (base & ~Addr{3}) + kWordBytes;
  for (;; a += kWordBytes) {
    const bool at_end = a >= end;
    const unsigned o = at_end ? run_owner : owner(a);
    if (at_end || o != run_owner) {
      const Addr run_end = std::min(a, end);
      Burst b;
      b.id = std::uint32_t(out.size());
      b.backend = run_owner;
      b.l1_addr = run_start;
      b.l2_addr = chunk.l2_addr() + (run_start - base);
      b.len_bytes = run_end - run_start;
      b.dir = dir;
      out.push_back(b);
      if (at_end) break;
      run_start = a;
      run_owner = o;
    }
  }
  return out;
}

std::uint8_t& L2Memory::at(Addr addr) {
  if (addr < kL2Base || addr - kL2Base >= bytes_.size()) throw RangeOutOfMemory("address outside L2");
  return bytes_[addr - kL2Base];
}

std::uint8_t L2Memory::at(Addr addr) const {
  if (addr < kL2Base || addr - kL2Base >= bytes_.size()) throw RangeOutOfMemory("address outside L2");
  return bytes_[addr - kL2Base];
}

Word L2Memory::word(Addr addr) const {
  Word w = 0;
  for (unsigned i = 0; i < kWordBytes; ++i) w |= Word(at(addr + i)) << (8 * i);
  return w;
}

void L2Memory::set_word(Addr addr, Word v) {
  for (unsigned i = 0; i < kWordBytes; ++i) at(addr + i) = std::uint8_t(v >> (8 * i));
}

RoCache::RoCache(const UplinkParams& up, unsigned l2_latency, const L2Memory* memory)
    : line_bytes_(up.rocache_line_bytes),
      ways_(up.rocache_ways),
      sets_(up.rocache_bytes / (up.rocache_ways * up.rocache_line_bytes)),
      stages_(up.rocache_stages),
      l2_latency_(l2_latency),
      ways_state_(std::size_t(sets_) * ways_, Way{0, false, 0, 0}),
      memory_(memory) {}

void RoCache::enable_range(Addr begin, Addr end) { ranges_.push_back({begin, end}); }

bool RoCache::cacheable(Addr addr) const {
  if (ranges_.empty()) return true;
  for (const auto& [b, e] : ranges_)
    if (addr >= b && addr < e) return true;
  return false;
}

void RoCache::flush() {
  for (auto& w : ways_state_) w.valid = false;
}

Cycle RoCache::access(unsigned master, Addr addr, Cycle cycle) {
  const Cycle start = std::max(cycle, next_accept_);
  next_accept_ = start + 1;
  const Cycle done = start + stages_;
  Cycle resp = done;
  if (!cacheable(addr)) {
    ++stats_.bypasses;
    resp = done + l2_latency_;
  } else {
    const Addr line = addr / line_bytes_;
    Way* set = &ways_state_[std::size_t(line % sets_) * ways_];
    const Addr tag = line / sets_;
    Way* hit = nullptr;
    for (unsigned w = 0; w < ways_; ++w)
      if (set[w].valid && set[w].tag == tag) hit = &set[w];
    if (hit) {
      hit->used = ++clock_;
      if (hit->ready > done) {
        ++stats_.coalesced;
        resp = hit->ready;
      } else {
        ++stats_.hits;
      }
    } else {
      ++stats_.misses;
      ++stats_.l2_refills;
      Way* victim = set;
      for (unsigned w = 0; w < ways_; ++w) {
        if (!set[w].valid) {
          victim = &set[w];
          break;
        }
        if (set[w].used < victim->used) victim = &set[w];
      }
      resp = done + l2_latency_;
      *victim = Way{tag, true, resp, ++clock_};
    }
  }
  if (master >= last_response_.size()) last_response_.resize(master + 1, 0);
  resp = std::max(resp, last_response_[master]);
  last_response_[master] = resp;
  return resp;
}

std::vector<RoCache::Line> rocache_access(RoCache& cache, const Burst& burst, unsigned master, Cycle cycle) {
  std::vector<RoCache::Line> out;
  if (burst.len_bytes == 0) return out;
  const Addr lb = cache.line_bytes();
  const Addr first = burst.l2_addr / lb;
  const Addr last = (burst.l2_addr + burst.len_bytes - 1) / lb;
  for (Addr line = first; line <= last; ++line) {
    RoCache::Line l;
    l.line = line;
    l.response = cache.access(master, line * lb, cycle);
    if (const L2Memory* m = cache.memory()) {
      l.data.resize(lb);
      for (Addr i = 0; i < lb; ++i) l.data[i] = m->at(line * lb + i);
    }
    out.push_back(std::move(l));
  }
  return out;
}

TransferStats dma_run(const DmaRequest& req, Engine& engine, L2Memory& l2, const UplinkParams& up) {
  const ValidatedConfig& cfg = engine.config();
  up.check(cfg);
  const AddressLayout layout = AddressLayout::from(cfg);
  TransferStats st;
  st.backends = up.backends_per_group;
  st.bytes = req.len;
  if (req.len == 0) return st;
  if (req.l1_addr() % kWordBytes || req.l2_addr() % kWordBytes || req.len % kWordBytes)
    throw std::invalid_argument("DMA transfers are word aligned");
  if (req.l2_addr() < kL2Base || req.l2_addr() - kL2Base + req.len > l2.size())
    throw RangeOutOfMemory("DMA range exceeds L2");

  const auto regions = backend_regions(cfg, up.backends_per_group);
  std::vector<Burst> bursts;
  for (const auto& chunk : dma_split(req, cfg))
    for (Burst b : dma_distribute(chunk, cfg, regions)) {
      b.id = std::uint32_t(bursts.size());
      bursts.push_back(b);
    }
  st.bursts = unsigned(bursts.size());

  const unsigned cores = cfg.num_cores();
  const unsigned groups = cfg.geometry.groups;
  const unsigned bpg = up.backends_per_group;
  const unsigned nb = groups * bpg;
  const unsigned W = up.axi_width;
  const Cycle start = engine.now();

  AxiTree tree(cfg, up);
  std::vector<std::deque<std::size_t>> pending(nb);
  std::vector<bool> port_active(groups, false);
  for (const Burst& b : bursts) {
    pending[b.backend].push_back(b.id);
    port_active[b.backend / bpg] = true;
    tree.record(tree.backend_leaf(b.backend), b.len_bytes);
  }
  st.active_ports = unsigned(std::count(port_active.begin(), port_active.end(), true));

  for (unsigned i = 0; i < cfg.timing.dma_setup; ++i) engine.step();

  auto beats_of = [&](const Burst& b) { return ceil_div(b.l2_addr % W + b.len_bytes, W); };
  auto phys = [&](Addr logical) { return scramble(logical, layout); };

  struct Txn {
    std::size_t burst;
    Cycle first_beat;
    unsigned beats;
    unsigned next_beat;
    Cycle done;  // write response for L1-to-L2 transfers
  };
  std::vector<std::vector<Txn>> inflight(nb);
  std::vector<unsigned> rr(groups, 0);
  std::vector<Cycle> data_free(groups, 0);
  Cycle first_request = kNever;
  Cycle last_beat = 0;
  const std::uint64_t total_words = req.len / kWordBytes;
  std::uint64_t words_done = 0;
  const Cycle bound = start + cfg.timing.dma_setup + 64 * total_words + 10000;

  if (req.l1_is_dst()) {
    std::vector<std::deque<std::pair<Addr, Word>>> wbuf(nb);
    for (;;) {
      const Cycle now = engine.now();
      if (now > bound) throw DrainTimeout(engine.in_flight());
      for (const Response& r : engine.completions())
        if (r.source >= cores) ++words_done;
      if (words_done == total_words) break;

      for (unsigned g = 0; g < groups; ++g)
        for (unsigned k = 0; k < bpg; ++k) {
          const unsigned be = g * bpg + (rr[g] + k) % bpg;
          if (pending[be].empty() || inflight[be].size() >= up.backend_outstanding) continue;
          const Burst& b = bursts[pending[be].front()];
          pending[be].pop_front();
          const unsigned beats = beats_of(b);
          const Cycle s = std::max(now + cfg.timing.l2_latency, data_free[g]);
          data_free[g] = s + std::max(beats, up.axi_min_txn_cycles);
          inflight[be].push_back({b.id, s, beats, 0, 0});
          first_request = std::min(first_request, now);
          rr[g] = (rr[g] + k + 1) % bpg;
          break;
        }

      for (unsigned be = 0; be < nb; ++be) {
        auto& txns = inflight[be];
        for (auto& t : txns) {
          const Burst& b = bursts[t.burst];
          while (t.next_beat < t.beats && t.first_beat + t.next_beat <= now) {
            const Addr beat_lo = (b.l2_addr / W + t.next_beat) * W;
            const Addr lo = std::max(beat_lo, b.l2_addr);
            const Addr hi = std::min(beat_lo + W, b.l2_addr + b.len_bytes);
            for (Addr a = lo; a < hi; a += kWordBytes)
              wbuf[be].push_back({phys(b.l1_addr + (a - b.l2_addr)), l2.word(a)});
            last_beat = std::max(last_beat, now);
            ++t.next_beat;
          }
        }
        std::erase_if(txns, [](const Txn& t) { return t.next_beat == t.beats; });

        auto& buf = wbuf[be];
        std::deque<std::pair<Addr, Word>> keep;
        for (const auto& [pa, v] : buf) {
          if (engine.can_issue_dma(pa))
            engine.issue_dma(be, MemOp::write(v), pa);
          else
            keep.push_back({pa, v});
        }
        buf.swap(keep);
      }
      engine.step();
    }
  } else {
    // L1 to L2: read words through the banks, then stream bursts out.
    std::vector<std::vector<Word>> data(bursts.size());
    std::vector<std::uint64_t> words_missing(bursts.size());
    std::unordered_map<ReqId, std::pair<std::size_t, std::size_t>> reads;
    std::vector<std::size_t> read_cursor(nb, 0);  // index into order[be]
    std::vector<std::vector<std::size_t>> order(nb);
    std::vector<std::size_t> next_word(bursts.size(), 0);
    for (const Burst& b : bursts) {
      order[b.backend].push_back(b.id);
      data[b.id].assign(b.len_bytes / kWordBytes, 0);
      words_missing[b.id] = b.len_bytes / kWordBytes;
    }
    std::uint64_t bursts_left = bursts.size();
    for (;;) {
      const Cycle now = engine.now();
      if (now > bound) throw DrainTimeout(engine.in_flight());
      for (const Response& r : engine.completions()) {
        if (r.source < cores) continue;
        auto it = reads.find(r.id);
        if (it == reads.end()) continue;
        data[it->second.first][it->second.second] = r.value;
        --words_missing[it->second.first];
        ++words_done;
        reads.erase(it);
      }
      for (unsigned be = 0; be < nb; ++be)
        std::erase_if(inflight[be], [&](const Txn& t) {
          if (t.done > now) return false;
          --bursts_left;
          return true;
        });
      if (bursts_left == 0) break;

      // Bank reads, a window of bursts ahead of the port.
      for (unsigned be = 0; be < nb; ++be) {
        const auto& ord = order[be];
        const std::size_t limit = std::min(ord.size(), read_cursor[be] + up.backend_outstanding);
        while (read_cursor[be] < ord.size() && next_word[ord[read_cursor[be]]] == data[ord[read_cursor[be]]].size())
          ++read_cursor[be];
        for (std::size_t i = read_cursor[be]; i < limit; ++i) {
          const Burst& b = bursts[ord[i]];
          auto& w = next_word[b.id];
          while (w < data[b.id].size()) {
            const Addr pa = phys(b.l1_addr + w * kWordBytes);
            if (!engine.can_issue_dma(pa)) break;
            reads[engine.issue_dma(be, MemOp::read(), pa)] = {b.id, w};
            ++w;
          }
        }
      }

      for (unsigned g = 0; g < groups; ++g)
        for (unsigned k = 0; k < bpg; ++k) {
          const unsigned be = g * bpg + (rr[g] + k) % bpg;
          if (pending[be].empty() || inflight[be].size() >= up.backend_outstanding) continue;
          const Burst& b = bursts[pending[be].front()];
          if (words_missing[b.id]) continue;
          pending[be].pop_front();
          const unsigned beats = beats_of(b);
          const Cycle s = std::max(now, data_free[g]);
          data_free[g] = s + std::max(beats, up.axi_min_txn_cycles);
          for (std::size_t i = 0; i < data[b.id].size(); ++i) l2.set_word(b.l2_addr + i * kWordBytes, data[b.id][i]);
          const Cycle end_beat = s + beats - 1;
          inflight[be].push_back({b.id, s, beats, beats, end_beat + cfg.timing.l2_latency});
          first_request = std::min(first_request, now);
          last_beat = std::max(last_beat, end_beat);
          rr[g] = (rr[g] + k + 1) % bpg;
          break;
        }
      engine.step();
    }
  }

  if (tree.top_bytes() != tree.leaf_bytes() || tree.leaf_bytes() != req.len)
    throw InvariantViolation("AXI byte conservation violated");
  st.cycles = engine.now() - start;
  st.bus_cycles = first_request == kNever ? 0 : last_beat - first_request + 1;
  if (st.bus_cycles && st.active_ports)
    st.utilization = double(st.bytes) / (double(st.bus_cycles) * st.active_ports * W);
  st.system_utilization = double(st.bytes) / (double(st.cycles) * cfg.timing.l2_bandwidth);
  return st;
}

}  // namespace mempool
