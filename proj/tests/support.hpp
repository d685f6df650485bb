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

// Small generator toolkit for property tests.

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mempool/geometry.hpp"

namespace mempool::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::uint64_t u64() { return rng_(); }
  /// Uniform in [lo, hi].
  std::uint64_t range(std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng_);
  }
  unsigned pow2(unsigned max_log) { return 1u << range(0, max_log); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }
  double unit() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[range(0, v.size() - 1)];
  }

  /// Small valid geometry: every count a power of two, sequential rows
  /// within the bank.
  ClusterGeometry geometry(unsigned max_bits = 12) {
    for (;;) {
      ClusterGeometry g;
      g.cores_per_tile = pow2(2);
      g.tiles_per_group = pow2(3);
      g.groups = pow2(2);
      g.banks_per_tile = pow2(4);
      g.bank_words = pow2(6);
      g.seq_rows_per_bank = pow2(6);
      if (g.seq_rows_per_bank > g.bank_words) continue;
      unsigned bits = 2;
      for (unsigned v : {g.tiles_per_group * g.groups, g.banks_per_tile, g.bank_words})
        while (v > 1) v >>= 1, ++bits;
      if (bits <= max_bits) return g;
    }
  }

 private:
  std::mt19937_64 rng_;
};

/// Runs `prop(gen, case_index)` for `cases` generated cases.
template <class F>
void for_all(unsigned cases, std::uint64_t seed, F&& prop) {
  Gen g(seed);
  for (unsigned i = 0; i < cases; ++i) prop(g, i);
}

}  // namespace mempool::testing
