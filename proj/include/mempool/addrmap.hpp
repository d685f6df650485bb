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

#pragma once

#include <stdexcept>

#include "mempool/geometry.hpp"

namespace mempool {

/// Bit-field view of an L1 byte address.
///
/// Interleaved layout, LSB first: byte [0,2), bank [2,2+b), tile [2+b,2+b+t),
/// row [2+b+t, ...). The hybrid scrambler rewrites addresses below
/// 2^(t+s+b+2) so that each tile owns one contiguous 2^(s+b+2) byte window.
struct AddressLayout {
  unsigned byte_bits = kByteBits;
  unsigned bank_bits = 0;
  unsigned tile_bits = 0;
  unsigned seq_bits = 0;
  unsigned row_bits = 0;

  static AddressLayout from(const ValidatedConfig& cfg);

  unsigned total_bits() const { return byte_bits + bank_bits + tile_bits + row_bits; }
  Addr l1_bytes() const { return Addr{1} << total_bits(); }
  Addr sequential_span() const { return Addr{1} << (tile_bits + seq_bits + bank_bits + byte_bits); }
  Addr sequential_bytes_per_tile() const { return Addr{1} << (seq_bits + bank_bits + byte_bits); }
};

struct PhysicalLocation {
  unsigned tile = 0;
  unsigned bank = 0;
  unsigned row = 0;
  unsigned byte = 0;

  bool operator==(const PhysicalLocation&) const = default;
};

struct Region {
  enum class Kind { Sequential, Interleaved };
  Kind kind = Kind::Interleaved;
  unsigned owner_tile = 0;  // meaningful for Sequential only

  static Region sequential(unsigned tile) { return {Kind::Sequential, tile}; }
  static Region interleaved() { return {Kind::Interleaved, 0}; }
  bool operator==(const Region&) const = default;
};

class AddressOutOfRange : public std::out_of_range {
 public:
  explicit AddressOutOfRange(Addr addr);
  Addr address() const { return addr_; }

 private:
  Addr addr_;
};

// The *_unchecked variants skip the range check and are used on hot paths
// that already guarantee addr < l1_bytes().

inline Addr scramble_unchecked(Addr addr, const AddressLayout& l) {
  if (addr >= l.sequential_span()) return addr;
  const unsigned low_bits = l.byte_bits + l.bank_bits;
  const Addr low = addr & ((Addr{1} << low_bits) - 1);
  const Addr seq = (addr >> low_bits) & ((Addr{1} << l.seq_bits) - 1);
  const Addr tile = (addr >> (low_bits + l.seq_bits)) & ((Addr{1} << l.tile_bits) - 1);
  return low | (tile << low_bits) | (seq << (low_bits + l.tile_bits));
}

inline Addr descramble_unchecked(Addr addr, const AddressLayout& l) {
  if (addr >= l.sequential_span()) return addr;
  const unsigned low_bits = l.byte_bits + l.bank_bits;
  const Addr low = addr & ((Addr{1} << low_bits) - 1);
  const Addr tile = (addr >> low_bits) & ((Addr{1} << l.tile_bits) - 1);
  const Addr seq = (addr >> (low_bits + l.tile_bits)) & ((Addr{1} << l.seq_bits) - 1);
  return low | (seq << low_bits) | (tile << (low_bits + l.seq_bits));
}

inline PhysicalLocation locate_unchecked(Addr addr, const AddressLayout& l) {
  PhysicalLocation loc;
  loc.byte = unsigned(addr & ((Addr{1} << l.byte_bits) - 1));
  addr >>= l.byte_bits;
  loc.bank = unsigned(addr & ((Addr{1} << l.bank_bits) - 1));
  addr >>= l.bank_bits;
  loc.tile = unsigned(addr & ((Addr{1} << l.tile_bits) - 1));
  addr >>= l.tile_bits;
  loc.row = unsigned(addr);
  return loc;
}

/// Logical (programmer view) to physical address.
Addr scramble(Addr addr, const AddressLayout& layout);
/// Inverse of scramble.
Addr descramble(Addr addr, const AddressLayout& layout);
/// Decodes a physical address.
PhysicalLocation locate(Addr addr, const AddressLayout& layout);
/// Encodes a physical location; inverse of locate.
Addr physical_address(const PhysicalLocation& loc, const AddressLayout& layout);
/// Which region a logical address falls in.
Region region_of(Addr addr, const AddressLayout& layout);

}  // namespace mempool
