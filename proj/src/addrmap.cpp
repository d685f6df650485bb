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

#include "mempool/addrmap.hpp"

#include <string>

namespace mempool {

namespace {

void require_in_l1(Addr addr, const AddressLayout& layout) {
  if (addr >= layout.l1_bytes()) throw AddressOutOfRange(addr);
}

}  // namespace

AddressOutOfRange::AddressOutOfRange(Addr addr)
    : std::out_of_range("address out of L1 range: " + std::to_string(addr)), addr_(addr) {}

AddressLayout AddressLayout::from(const ValidatedConfig& cfg) {
  AddressLayout l;
  l.bank_bits = cfg.bank_bits;
  l.tile_bits = cfg.tile_bits;
  l.seq_bits = cfg.seq_bits;
  l.row_bits = cfg.row_bits;
  return l;
}

Addr scramble(Addr addr, const AddressLayout& layout) {
  require_in_l1(addr, layout);
  return scramble_unchecked(addr, layout);
}

Addr descramble(Addr addr, const AddressLayout& layout) {
  require_in_l1(addr, layout);
  return descramble_unchecked(addr, layout);
}

PhysicalLocation locate(Addr addr, const AddressLayout& layout) {
  require_in_l1(addr, layout);
  return locate_unchecked(addr, layout);
}

Addr physical_address(const PhysicalLocation& loc, const AddressLayout& l) {
  if (loc.byte >= (1u << l.byte_bits) || loc.bank >= (1u << l.bank_bits) ||
      loc.tile >= (1u << l.tile_bits) || Addr(loc.row) >= (Addr{1} << l.row_bits))
    throw std::out_of_range("physical location outside geometry");
  Addr a = loc.row;
  a = (a << l.tile_bits) | loc.tile;
  a = (a << l.bank_bits) | loc.bank;
  a = (a << l.byte_bits) | loc.byte;
  return a;
}

Region region_of(Addr addr, const AddressLayout& layout) {
  require_in_l1(addr, layout);
  if (addr >= layout.sequential_span()) return Region::interleaved();
  return Region::sequential(
      unsigned(addr >> (layout.seq_bits + layout.bank_bits + layout.byte_bits)));
}

}  // namespace mempool
