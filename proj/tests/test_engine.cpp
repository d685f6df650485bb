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

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>

#include "mempool/engine.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mempool;

namespace {

const ValidatedConfig& default_cfg() {
  static const ValidatedConfig cfg = validate(ClusterGeometry{}, TimingParams{});
  return cfg;
}

const NetworkModel& net(TopologyKind k) {
  static const NetworkModel one = build(TopologyKind::One, default_cfg());
  static const NetworkModel four = build(TopologyKind::Four, default_cfg());
  static const NetworkModel hybrid = build(TopologyKind::Hybrid, default_cfg());
  return k == TopologyKind::One ? one : k == TopologyKind::Four ? four : hybrid;
}

// Logical address of word `row` in bank `bank` of `tile`, in the interleaved region.
Addr interleaved(unsigned tile, unsigned bank, unsigned row) {
  const auto l = AddressLayout::from(default_cfg());
  const Addr first_row = l.sequential_span() >> (2 + l.bank_bits + l.tile_bits);
  return physical_address({tile, bank, unsigned(first_row + row), 0}, l);
}

std::map<ReqId, Response> run_to_idle(Engine& e, std::uint64_t limit = 10000) {
  std::map<ReqId, Response> out;
  for (std::uint64_t i = 0; i < limit && e.in_flight(); ++i) {
    e.step();
    for (const auto& r : e.completions()) out[r.id] = r;
  }
  return out;
}

std::int32_t sx(std::int32_t v) { return v; }

}  // namespace

TEST_CASE("local tile read completes one cycle after issue") {
  Engine e(net(TopologyKind::Hybrid));
  e.step();
  const Cycle c = e.now();
  const ReqId id = e.issue(0, MemOp::read(), interleaved(0, 3, 0));
  auto done = run_to_idle(e);
  CHECK(done.at(id).complete_cycle == c + 1);
  CHECK(done.at(id).route == RouteClass::local_tile());
}

TEST_CASE("two cores on one bank are served in consecutive cycles") {
  Engine e(net(TopologyKind::Hybrid));
  const Cycle c = e.now();
  const ReqId a = e.issue(0, MemOp::read(), interleaved(0, 5, 1));
  const ReqId b = e.issue(1, MemOp::read(), interleaved(0, 5, 2));
  auto done = run_to_idle(e);
  std::vector<Cycle> t{done.at(a).complete_cycle, done.at(b).complete_cycle};
  std::sort(t.begin(), t.end());
  CHECK(t == std::vector<Cycle>{c + 1, c + 2});
  CHECK(e.stats().bank_conflicts[5] == 1);
}

TEST_CASE("round-robin alternates winners on a contended bank") {
  // Oracle: with both cores re-requesting every cycle, grants alternate.
  Engine e(net(TopologyKind::Hybrid));
  std::vector<unsigned> winners;
  for (int cyc = 0; cyc < 12; ++cyc) {
    for (unsigned core : {0u, 1u})
      if (e.can_issue(core)) e.issue(core, MemOp::read(), interleaved(0, 7, 0));
    e.step();
    for (const auto& r : e.completions()) winners.push_back(r.source);
  }
  REQUIRE(winners.size() >= 8);
  for (std::size_t i = 1; i < winners.size(); ++i) CHECK(winners[i] != winners[i - 1]);
}

TEST_CASE("remote group read on hybrid completes after five cycles") {
  Engine e(net(TopologyKind::Hybrid));
  const Cycle c = e.now();
  const ReqId id = e.issue(0, MemOp::read(), interleaved(20, 0, 0));
  auto done = run_to_idle(e);
  CHECK(done.at(id).complete_cycle == c + 5);
  CHECK(done.at(id).route == RouteClass::remote(Direction::North));
  const ReqId id2 = e.issue(0, MemOp::read(), interleaved(5, 0, 0));
  const Cycle c2 = e.now();
  done = run_to_idle(e);
  CHECK(done.at(id2).complete_cycle == c2 + 3);
}

TEST_CASE("stores are visible to later loads") {
  Engine e(net(TopologyKind::Hybrid));
  e.issue(3, MemOp::write(0xdeadbeef), interleaved(33, 9, 4));
  run_to_idle(e);
  const ReqId r = e.issue(100, MemOp::read(), interleaved(33, 9, 4));
  auto done = run_to_idle(e);
  CHECK(done.at(r).value == 0xdeadbeef);
}

TEST_CASE("amo examples") {
  CHECK(amo_apply(AmoKind::Add, 5, 3) == 8);
  CHECK(amo_apply(AmoKind::Swap, 7, 9) == 9);
  CHECK(amo_apply(AmoKind::Max, Word(-1), 2) == 2);
  CHECK(amo_apply(AmoKind::Maxu, Word(-1), 2) == Word(-1));
  CHECK(amo_apply(AmoKind::And, 0b1100, 0b1010) == 0b1000);
  CHECK(amo_apply(AmoKind::Or, 0b1100, 0b1010) == 0b1110);
  CHECK(amo_apply(AmoKind::Xor, 0b1100, 0b1010) == 0b0110);
}

TEST_CASE("signed and unsigned min/max agree with a comparison oracle on all 8-bit pairs") {
  for (int a = -128; a < 128; ++a)
    for (int b = -128; b < 128; ++b) {
      const Word wa = Word(sx(a)), wb = Word(sx(b));
      CHECK(amo_apply(AmoKind::Max, wa, wb) == Word(sx(a > b ? a : b)));
      CHECK(amo_apply(AmoKind::Min, wa, wb) == Word(sx(a < b ? a : b)));
      CHECK(amo_apply(AmoKind::Maxu, wa, wb) == (wa > wb ? wa : wb));
      CHECK(amo_apply(AmoKind::Minu, wa, wb) == (wa < wb ? wa : wb));
      const Word ua = Word(a & 0xff), ub = Word(b & 0xff);
      CHECK(amo_apply(AmoKind::Maxu, ua, ub) == Word(std::max(a & 0xff, b & 0xff)));
    }
}

TEST_CASE("lr/sc examples") {
  BankState bank;
  bank.words.assign(8, 0);
  bank.words[2] = 11;
  CHECK(lrsc(bank, 2, 0, MemOp::load_reserved()) == 11);
  CHECK(lrsc(bank, 2, 0, MemOp::store_conditional(42)) == 0);
  CHECK(bank.words[2] == 42);

  SUBCASE("an intervening store breaks the reservation") {
    Engine e(net(TopologyKind::Hybrid));
    const Addr a = interleaved(1, 1, 1);
    e.issue(0, MemOp::load_reserved(), a);
    run_to_idle(e);
    e.issue(50, MemOp::write(7), a);
    run_to_idle(e);
    const ReqId sc = e.issue(0, MemOp::store_conditional(9), a);
    auto done = run_to_idle(e);
    CHECK(done.at(sc).value == 1);
    CHECK(e.peek(scramble(a, e.layout())) == 7);
  }
  SUBCASE("sc without lr fails") {
    BankState b2;
    b2.words.assign(4, 3);
    CHECK(lrsc(b2, 1, 0, MemOp::store_conditional(5)) == 1);
    CHECK(b2.words[1] == 3);
  }
}

TEST_CASE("drain examples") {
  Engine idle(net(TopologyKind::Hybrid));
  const SimStats s0 = idle.drain();
  CHECK(s0.completed == 0);
  CHECK(s0.cycles_run == 0);

  Engine e(net(TopologyKind::Hybrid));
  testing::Gen g(5);
  const auto l = e.layout();
  unsigned issued = 0;
  while (issued < 1000) {
    for (unsigned c = 0; c < 256 && issued < 1000; ++c)
      if (g.coin(0.01) && e.can_issue(c)) {
        e.issue(c, MemOp::read(), g.range(0, l.l1_bytes() / 4 - 1) * 4);
        ++issued;
      }
    e.step();
  }
  const SimStats s = e.drain();
  CHECK(s.injected == 1000);
  CHECK(s.completed == 1000);
}

TEST_CASE("concurrent atomic increments sum exactly") {
  for (auto kind : {TopologyKind::One, TopologyKind::Hybrid}) {
    Engine e(net(kind));
    const Addr a = interleaved(17, 3, 2);
    const unsigned n = 64;
    std::vector<unsigned> left(n, 3);
    unsigned pending = n * 3;
    while (pending) {
      for (unsigned c = 0; c < n; ++c)
        if (left[c] && e.can_issue(c * 4)) {
          e.issue(c * 4, MemOp::atomic(AmoKind::Add, 1), a);
          --left[c];
          --pending;
        }
      e.step();
    }
    e.drain();
    CHECK(e.peek(scramble(a, e.layout())) == n * 3);
  }
}

TEST_CASE("drain on an idle engine takes zero cycles") {
  Engine e(net(TopologyKind::Four));
  for (int i = 0; i < 5; ++i) e.step();
  const Cycle before = e.now();
  e.drain();
  CHECK(e.now() == before);
}

TEST_CASE("property: conservation, bank exclusivity and unique responses under random traffic") {
  testing::for_all(6, 31, [](testing::Gen& g, unsigned i) {
    const auto kind = std::vector<TopologyKind>{TopologyKind::One, TopologyKind::Four, TopologyKind::Hybrid}[i % 3];
    Engine e(net(kind));
    e.enable_exec_log(true);
    const auto l = e.layout();
    const double lambda = 0.05 + 0.5 * g.unit();
    std::set<ReqId> issued, seen;
    for (int cyc = 0; cyc < 600; ++cyc) {
      for (const auto& r : e.completions()) {
        CHECK(issued.count(r.id) == 1);
        CHECK(seen.insert(r.id).second);
        CHECK(r.complete_cycle >= r.issue_cycle + zero_load_latency(r.route, default_cfg().timing));
      }
      for (unsigned c = 0; c < 256; ++c)
        if (g.coin(lambda) && e.can_issue(c)) {
          const auto op = g.coin(0.2) ? MemOp::write(Word(g.u64())) : MemOp::read();
          issued.insert(e.issue(c, op, g.range(0, l.l1_bytes() / 4 - 1) * 4));
        }
      CHECK(e.stats().injected == e.stats().completed + e.in_flight());
      e.step();
    }
    const SimStats s = e.drain();
    CHECK(s.injected == s.completed);
    CHECK(s.injected == issued.size());
    std::set<std::pair<Cycle, Addr>> busy;
    for (const auto& rec : e.exec_log()) {
      const auto loc = locate(rec.addr, l);
      CHECK(busy.insert({rec.cycle, Addr(loc.tile) * 16 + loc.bank}).second);
    }
  });
}

TEST_CASE("property: zero-load latency per route class is exact") {
  for (auto kind : {TopologyKind::One, TopologyKind::Four, TopologyKind::Hybrid}) {
    Engine e(net(kind));
    testing::Gen g(7);
    const auto l = e.layout();
    std::map<std::uint64_t, std::set<Cycle>> lat;
    for (int i = 0; i < 300; ++i) {
      const unsigned c = unsigned(g.range(0, 255));
      const ReqId id = e.issue(c, MemOp::read(), g.range(0, l.l1_bytes() / 4 - 1) * 4);
      auto done = run_to_idle(e);
      const auto& r = done.at(id);
      lat[slot_of(r.route)].insert(r.complete_cycle - r.issue_cycle);
    }
    for (const auto& [slot, s] : lat) {
      REQUIRE(s.size() == 1);
      unsigned expect = slot == 0 ? 1 : slot == 1 ? 3 : 5;
      if (kind != TopologyKind::Hybrid && slot != 0) expect = 5;
      CHECK(*s.begin() == expect);
    }
  }
}

TEST_CASE("property: identical schedules give identical statistics") {
  auto run = [](std::uint64_t seed) {
    Engine e(net(TopologyKind::Hybrid));
    testing::Gen g(seed);
    for (int cyc = 0; cyc < 400; ++cyc) {
      for (unsigned c = 0; c < 256; ++c)
        if (g.coin(0.3) && e.can_issue(c)) e.issue(c, MemOp::read(), g.range(0, (1u << 18) - 1) * 4);
      e.step();
    }
    return e.drain();
  };
  CHECK(run(9) == run(9));
}

TEST_CASE("property: no core starves under saturation") {
  Engine e(net(TopologyKind::One));
  testing::Gen g(3);
  std::vector<unsigned> served(256, 0);
  for (int cyc = 0; cyc < 3000; ++cyc) {
    for (const auto& r : e.completions()) ++served[r.source];
    for (unsigned c = 0; c < 256; ++c)
      if (e.can_issue(c)) e.issue(c, MemOp::read(), interleaved(unsigned(g.range(0, 63)), 0, 0));
    e.step();
  }
  for (unsigned c = 0; c < 256; ++c) CHECK(served[c] > 0);
}

TEST_CASE("property: lr/sc results match a sequential reservation oracle") {
  testing::for_all(20, 41, [](testing::Gen& g, unsigned) {
    Engine e(net(TopologyKind::Hybrid));
    e.enable_exec_log(true);
    const std::vector<Addr> words = {interleaved(2, 4, 0), interleaved(2, 4, 1), interleaved(40, 0, 0)};
    const std::vector<unsigned> cores = {0, 1, 8, 200};
    std::map<ReqId, Word> result;
    for (int cyc = 0; cyc < 300; ++cyc) {
      for (const auto& r : e.completions()) result[r.id] = r.value;
      for (unsigned c : cores) {
        if (!g.coin(0.5) || !e.can_issue(c)) continue;
        const Addr a = g.pick(words);
        const auto k = g.range(0, 3);
        const MemOp op = k == 0   ? MemOp::load_reserved()
                         : k == 1 ? MemOp::store_conditional(Word(g.u64()))
                         : k == 2 ? MemOp::write(Word(g.u64()))
                                  : MemOp::atomic(AmoKind::Add, 1);
        e.issue(c, op, a);
      }
      e.step();
    }
    e.drain();
    for (const auto& r : e.completions()) result[r.id] = r.value;

    std::map<Addr, Word> mem;
    CHECK(testing::reservation_replay(e.exec_log(), e.layout(), mem) == 0);
    for (const auto& rec : e.exec_log())
      if (rec.op.kind != OpKind::Write && result.count(rec.id)) CHECK(result[rec.id] == rec.result);
    for (const auto& [a, v] : mem) CHECK(e.peek(a) == v);
  });
}
