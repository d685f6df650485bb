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

#include "mempool/engine.hpp"

#include <algorithm>
#include <bit>
#include <string>

namespace mempool {

Word amo_apply(AmoKind kind, Word old, Word operand) {
  const auto so = static_cast<std::int32_t>(old);
  const auto sv = static_cast<std::int32_t>(operand);
  switch (kind) {
    case AmoKind::Add: return old + operand;
    case AmoKind::Max: return so >= sv ? old : operand;
    case AmoKind::Maxu: return std::max(old, operand);
    case AmoKind::Min: return so <= sv ? old : operand;
    case AmoKind::Minu: return std::min(old, operand);
    case AmoKind::And: return old & operand;
    case AmoKind::Or: return old | operand;
    case AmoKind::Xor: return old ^ operand;
    case AmoKind::Swap: return operand;
  }
  return old;
}

Word lrsc(BankState& bank, unsigned row, unsigned source, const MemOp& op) {
  if (op.kind == OpKind::LoadReserved) {
    bank.reservation = BankState::Reservation{row, source};
    return bank.words[row];
  }
  const bool ok = bank.reservation && bank.reservation->row == row && bank.reservation->source == source;
  bank.reservation.reset();
  if (!ok) return 1;
  bank.words[row] = op.value;
  return 0;
}

StallBreakdown& StallBreakdown::operator+=(const StallBreakdown& o) {
  compute_cycles += o.compute_cycles;
  control_cycles += o.control_cycles;
  synchronization_cycles += o.synchronization_cycles;
  icache_stall_cycles += o.icache_stall_cycles;
  lsu_stall_cycles += o.lsu_stall_cycles;
  raw_stall_cycles += o.raw_stall_cycles;
  return *this;
}

DrainTimeout::DrainTimeout(std::uint64_t in_flight)
    : std::runtime_error("drain did not finish; " + std::to_string(in_flight) + " requests in flight") {}

Engine::Engine(const NetworkModel& net) : net_(net), layout_(AddressLayout::from(net.config())) {
  const auto queues = net_.queues();
  qs_.resize(queues.size());
  std::uint32_t offset = 0;
  for (std::size_t q = 0; q < queues.size(); ++q) {
    qs_[q].offset = offset;
    qs_[q].capacity = queues[q].capacity;
    offset += queues[q].capacity;
  }
  ring_.assign(offset, kNone);

  const auto res = net_.resources();
  rr_.assign(res.size(), 0);
  waiting_.assign(res.size(), 0);
  tentative_count_.assign(res.size(), 0);

  const auto& cfg = net_.config();
  unsigned max_lat = net_.bank_latency();
  for (unsigned t = 0; t < cfg.num_tiles(); ++t)
    for (unsigned c = 0; c < cfg.num_cores(); ++c) {
      for (const Hop& h : net_.request_prefix(c, t)) max_lat = std::max(max_lat, h.latency);
      for (const Hop& h : net_.response_prefix(t, c)) max_lat = std::max(max_lat, h.latency);
    }
  calendar_.resize(std::bit_ceil(max_lat + 2));

  banks_.resize(cfg.num_banks());
  for (auto& b : banks_) b.words.assign(cfg.geometry.bank_words, 0);
  stats_.bank_conflicts.assign(cfg.num_banks(), 0);
}

Engine::SlotId Engine::alloc_slot() {
  if (!free_slots_.empty()) {
    SlotId s = free_slots_.back();
    free_slots_.pop_back();
    return s;
  }
  slots_.emplace_back();
  return SlotId(slots_.size() - 1);
}

void Engine::free_slot(SlotId s) { free_slots_.push_back(s); }

ResourceId Engine::current_resource(const Slot& s) const {
  if (s.phase == 0) return s.hop < s.n_req ? s.req_hops[s.hop].resource : net_.bank_resource(s.bank);
  return s.resp_hops[s.hop].resource;
}

unsigned Engine::current_latency(const Slot& s) const {
  if (s.phase == 0) return s.hop < s.n_req ? s.req_hops[s.hop].latency : net_.bank_latency();
  return s.resp_hops[s.hop].latency;
}

QueueId Engine::next_queue(const Slot& s) const {
  if (s.phase == 0) {
    if (s.hop + 1u < s.n_req) return s.req_hops[s.hop + 1].in_queue;
    if (s.hop + 1u == s.n_req) return s.bank_queue;
    return kNone;
  }
  return s.hop + 1u < s.n_resp ? s.resp_hops[s.hop + 1].in_queue : kNone;
}

bool Engine::has_space(QueueId q) const {
  const auto& Q = qs_[q];
  return Q.count + Q.pops < Q.capacity;
}

void Engine::push(QueueId q, SlotId s, Cycle ready) {
  auto& Q = qs_[q];
  if (Q.count >= Q.capacity)
    throw InvariantViolation("queue " + std::to_string(q) + " overflow at cycle " + std::to_string(now_));
  std::uint32_t pos = Q.head + Q.count;
  if (pos >= Q.capacity) pos -= Q.capacity;
  ring_[Q.offset + pos] = s;
  ++Q.count;
  slots_[s].ready = ready;
  ++waiting_[current_resource(slots_[s])];
}

Engine::SlotId Engine::pop(QueueId q) {
  auto& Q = qs_[q];
  SlotId s = ring_[Q.offset + Q.head];
  if (++Q.head == Q.capacity) Q.head = 0;
  --Q.count;
  if (Q.pops++ == 0) touched_.push_back(q);
  --waiting_[current_resource(slots_[s])];
  return s;
}

bool Engine::can_issue(unsigned core) const { return qs_[net_.core_head_queue(core)].count == 0; }

ReqId Engine::issue(unsigned core, const MemOp& op, Addr logical_addr) {
  const auto& cfg = net_.config();
  if (core >= cfg.num_cores()) throw std::out_of_range("core index out of range");
  if (logical_addr % kWordBytes) throw std::invalid_argument("unaligned word access");
  if (!can_issue(core)) throw InvariantViolation("core " + std::to_string(core) + " issued while busy");
  const Addr phys = scramble(logical_addr, layout_);
  const PhysicalLocation loc = locate_unchecked(phys, layout_);
  const unsigned bank = loc.tile * cfg.geometry.banks_per_tile + loc.bank;
  const unsigned src_tile = cfg.tile_of_core(core);

  const SlotId id = alloc_slot();
  Slot& s = slots_[id];
  s = Slot{};
  s.req = Request{next_id_++, core, op, phys, now_};
  s.route = classify(src_tile, loc.tile, cfg);
  const auto rq = net_.request_prefix(core, loc.tile);
  const auto rs = net_.response_prefix(loc.tile, core);
  s.req_hops = rq.data();
  s.n_req = std::uint8_t(rq.size());
  s.resp_hops = rs.data();
  s.n_resp = std::uint8_t(rs.size());
  s.bank = bank;
  s.row = loc.row;
  s.bank_queue = net_.bank_input(core, bank);
  s.direct_response = s.n_resp == 0;
  push(net_.core_head_queue(core), id, now_);
  ++stats_.injected;
  return s.req.id;
}

bool Engine::can_issue_dma(Addr physical_addr) const {
  const PhysicalLocation loc = locate(physical_addr, layout_);
  const unsigned bank = loc.tile * net_.config().geometry.banks_per_tile + loc.bank;
  return has_space(net_.dma_queue(bank));
}

ReqId Engine::issue_dma(unsigned tag, const MemOp& op, Addr physical_addr) {
  const auto& cfg = net_.config();
  if (physical_addr % kWordBytes) throw std::invalid_argument("unaligned word access");
  const PhysicalLocation loc = locate(physical_addr, layout_);
  const unsigned bank = loc.tile * cfg.geometry.banks_per_tile + loc.bank;
  const QueueId q = net_.dma_queue(bank);
  if (!has_space(q)) throw InvariantViolation("DMA queue of bank " + std::to_string(bank) + " full");

  const SlotId id = alloc_slot();
  Slot& s = slots_[id];
  s = Slot{};
  s.req = Request{next_id_++, cfg.num_cores() + tag, op, physical_addr, now_};
  s.route = RouteClass::local_tile();
  s.bank = bank;
  s.row = loc.row;
  s.bank_queue = q;
  s.direct_response = true;
  push(q, id, now_);
  ++stats_.injected;
  return s.req.id;
}

void Engine::arbitrate(ResourceId r) {
  if (waiting_[r] == 0 && tentative_count_[r] == 0) return;
  const ResourceSpec& spec = net_.resources()[r];
  const auto& in = spec.inputs;
  const auto n = std::uint32_t(in.size());
  const bool is_bank = spec.kind == ResourceKind::Bank;

  std::uint32_t chosen = kNone;
  unsigned candidates = 0;
  std::uint32_t idx = rr_[r];
  for (std::uint32_t i = 0; i < n; ++i, ++idx) {
    if (idx >= n) idx -= n;
    const QueueState& Q = qs_[in[idx]];
    if (Q.capacity == 0) {
      if (Q.tentative == kNone) continue;
    } else {
      if (Q.count == 0 || Q.pops) continue;
      const Slot& s = slots_[head(in[idx])];
      if (s.ready > now_ || current_resource(s) != r) continue;
    }
    ++candidates;
    if (chosen == kNone) {
      chosen = idx;
      if (!is_bank) break;
    }
  }
  if (is_bank && candidates > 1)
    stats_.bank_conflicts[r - net_.bank_resource(0)] += candidates - 1;
  if (chosen == kNone) return;

  const QueueId q = in[chosen];
  Chain ch;
  if (qs_[q].capacity == 0) {
    ch = chains_[qs_[q].tentative];
  } else {
    ch.slot = head(q);
    ch.origin = q;
  }
  if (ch.steps >= kMaxChain) throw InvariantViolation("combinational chain too long");
  ch.step[ch.steps++] = {r, chosen};
  chains_.push_back(ch);
  forward(std::uint32_t(chains_.size() - 1));
}

void Engine::forward(std::uint32_t ci) {
  const Chain& ch = chains_[ci];
  Slot view = slots_[ch.slot];
  view.hop = std::uint8_t(view.hop + ch.steps - 1);

  if (view.phase == 0 && view.hop == view.n_req) {
    if (view.direct_response || has_space(net_.bank_response_queue(view.bank))) commit(ch);
    return;
  }
  const unsigned lat = current_latency(view);
  const QueueId nq = next_queue(view);
  if (lat == 0 && nq != kNone) {
    QueueState& W = qs_[nq];
    W.tentative = ci;
    touched_.push_back(nq);
    view.hop++;
    ++tentative_count_[current_resource(view)];
    return;
  }
  if (nq == kNone || has_space(nq)) commit(ch);
}

void Engine::commit(const Chain& ch) {
  const SlotId id = pop(ch.origin);
  for (unsigned i = 0; i < ch.steps; ++i) {
    const auto [r, idx] = ch.step[i];
    const auto n = std::uint32_t(net_.resources()[r].inputs.size());
    rr_[r] = idx + 1 == n ? 0 : idx + 1;
  }
  Slot& s = slots_[id];
  s.hop = std::uint8_t(s.hop + ch.steps - 1);
  if (s.phase == 0 && s.hop == s.n_req) {
    execute_at_bank(id);
    return;
  }
  const unsigned lat = current_latency(s);
  const QueueId nq = next_queue(s);
  s.hop++;
  if (nq == kNone)
    deliver(id, now_ + std::max(1u, lat));
  else
    push(nq, id, now_ + lat);
}

void Engine::execute_at_bank(SlotId id) {
  Slot& s = slots_[id];
  BankState& bank = banks_[s.bank];
  Word& w = bank.words[s.row];
  const MemOp& op = s.req.op;
  auto clear_reservation = [&] {
    if (bank.reservation && bank.reservation->row == s.row) bank.reservation.reset();
  };
  switch (op.kind) {
    case OpKind::Read:
      s.value = w;
      break;
    case OpKind::Write:
      w = op.value;
      s.value = 0;
      clear_reservation();
      break;
    case OpKind::Amo:
      s.value = w;
      w = amo_apply(op.amo, w, op.value);
      clear_reservation();
      break;
    case OpKind::LoadReserved:
    case OpKind::StoreConditional:
      s.value = lrsc(bank, s.row, s.req.source, op);
      break;
  }
  ++stats_.bank_operations;
  if (log_enabled_) exec_log_.push_back({now_, s.req.id, s.req.source, op, s.req.addr, s.value});

  const Cycle ready = now_ + net_.bank_latency();
  if (s.direct_response) {
    deliver(id, ready);
    return;
  }
  s.phase = 1;
  s.hop = 0;
  push(net_.bank_response_queue(s.bank), id, ready);
}

void Engine::deliver(SlotId id, Cycle when) {
  if (when - now_ >= calendar_.size()) throw InvariantViolation("delivery beyond calendar horizon");
  calendar_[when & (calendar_.size() - 1)].push_back(id);
}

void Engine::step() {
  completions_.clear();
  for (ResourceId r : net_.evaluation_order()) arbitrate(r);

  for (QueueId q : touched_) {
    qs_[q].pops = 0;
    qs_[q].tentative = kNone;
  }
  touched_.clear();
  std::fill(tentative_count_.begin(), tentative_count_.end(), 0u);
  chains_.clear();

  ++now_;
  ++stats_.cycles_run;
  auto& bucket = calendar_[now_ & (calendar_.size() - 1)];
  for (SlotId id : bucket) {
    const Slot& s = slots_[id];
    Response resp;
    resp.id = s.req.id;
    resp.source = s.req.source;
    resp.value = s.value;
    resp.issue_cycle = s.req.issue_cycle;
    resp.complete_cycle = now_;
    resp.route = s.route;
    resp.kind = s.req.op.kind;
    resp.addr = s.req.addr;
    completions_.push_back(resp);

    const Cycle lat = now_ - s.req.issue_cycle;
    ++stats_.completed;
    ++stats_.latency_histogram[std::min<std::size_t>(lat, SimStats::kHistogramBins - 1)];
    ++stats_.class_count[slot_of(s.route)];
    stats_.class_latency_sum[slot_of(s.route)] += lat;
    free_slot(id);
  }
  bucket.clear();
  check_conservation();
}

void Engine::check_conservation() const {
  const std::uint64_t live = slots_.size() - free_slots_.size();
  if (stats_.injected != stats_.completed + live)
    throw InvariantViolation("request conservation violated at cycle " + std::to_string(now_));
}

SimStats Engine::drain() {
  const std::uint64_t bound = 10000 + 64 * in_flight();
  for (std::uint64_t i = 0; in_flight() > 0; ++i) {
    if (i >= bound) throw DrainTimeout(in_flight());
    step();
  }
  return stats_;
}

Word Engine::peek(Addr physical) const {
  const PhysicalLocation loc = locate(physical, layout_);
  return banks_[loc.tile * net_.config().geometry.banks_per_tile + loc.bank].words[loc.row];
}

void Engine::poke(Addr physical, Word value) {
  const PhysicalLocation loc = locate(physical, layout_);
  banks_[loc.tile * net_.config().geometry.banks_per_tile + loc.bank].words[loc.row] = value;
}

}  // namespace mempool
