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

#include "mempool/geometry.hpp"

#include <bit>

namespace mempool {

namespace {

std::string join(const std::vector<Diagnostic>& diags) {
  std::string out = "invalid configuration:";
  for (const auto& d : diags) out += " " + to_string(d) + ";";
  return out;
}

}  // namespace

std::string to_string(const Diagnostic& d) {
  switch (d.code) {
    case DiagnosticCode::NonPowerOfTwo: return "NonPowerOfTwo(" + d.field + ")";
    case DiagnosticCode::SeqRegionTooLarge: return "SeqRegionTooLarge(" + d.field + ")";
    case DiagnosticCode::ZeroCount: return "ZeroCount(" + d.field + ")";
    case DiagnosticCode::InvalidTiming: return "InvalidTiming(" + d.field + ")";
  }
  return "Unknown(" + d.field + ")";
}

ConfigError::ConfigError(std::vector<Diagnostic> diags)
    : std::runtime_error(join(diags)), diags_(std::move(diags)) {}

ConfigError::ConfigError(const std::string& message) : std::runtime_error(message) {}

bool is_pow2(std::uint64_t v) { return v != 0 && std::has_single_bit(v); }

unsigned log2_exact(std::uint64_t v) { return unsigned(std::countr_zero(v)); }

std::vector<Diagnostic> check(const ClusterGeometry& g, const TimingParams& t) {
  std::vector<Diagnostic> out;
  auto nonzero = [&](unsigned v, const char* name) {
    if (v == 0) out.push_back({DiagnosticCode::ZeroCount, name});
    return v != 0;
  };
  nonzero(g.cores_per_tile, "cores_per_tile");
  bool t_ok = nonzero(g.tiles_per_group, "tiles_per_group");
  bool g_ok = nonzero(g.groups, "groups");
  bool b_ok = nonzero(g.banks_per_tile, "banks_per_tile");
  bool w_ok = nonzero(g.bank_words, "bank_words");
  bool s_ok = nonzero(g.seq_rows_per_bank, "seq_rows_per_bank");

  if (b_ok && !is_pow2(g.banks_per_tile))
    out.push_back({DiagnosticCode::NonPowerOfTwo, "banks_per_tile"});
  if (t_ok && g_ok && !is_pow2(std::uint64_t(g.tiles_per_group) * g.groups))
    out.push_back({DiagnosticCode::NonPowerOfTwo, "tiles_per_group*groups"});
  if (w_ok && !is_pow2(g.bank_words))
    out.push_back({DiagnosticCode::NonPowerOfTwo, "bank_words"});
  if (s_ok && !is_pow2(g.seq_rows_per_bank))
    out.push_back({DiagnosticCode::NonPowerOfTwo, "seq_rows_per_bank"});
  if (s_ok && w_ok && g.seq_rows_per_bank > g.bank_words)
    out.push_back({DiagnosticCode::SeqRegionTooLarge, "seq_rows_per_bank"});

  auto positive = [&](unsigned v, const char* name) {
    if (v == 0) out.push_back({DiagnosticCode::InvalidTiming, name});
  };
  positive(t.latency_local_tile, "latency_local_tile");
  positive(t.latency_local_group, "latency_local_group");
  positive(t.latency_remote_group, "latency_remote_group");
  positive(t.l2_latency, "l2_latency");
  positive(t.l2_bandwidth, "l2_bandwidth");
  positive(t.wakeup_latency, "wakeup_latency");
  if (t.latency_local_tile > t.latency_local_group)
    out.push_back({DiagnosticCode::InvalidTiming, "latency_local_group"});
  if (t.latency_local_group > t.latency_remote_group)
    out.push_back({DiagnosticCode::InvalidTiming, "latency_remote_group"});
  return out;
}

ValidatedConfig validate(const ClusterGeometry& geometry, const TimingParams& timing,
                         const NetworkParams& network) {
  auto diags = check(geometry, timing);
  if (network.queue_depth == 0) diags.push_back({DiagnosticCode::ZeroCount, "queue_depth"});
  if (network.butterfly_buffer == 0)
    diags.push_back({DiagnosticCode::ZeroCount, "butterfly_buffer"});
  if (network.response_queue_depth == 0)
    diags.push_back({DiagnosticCode::ZeroCount, "response_queue_depth"});
  if (network.dma_queue_depth == 0)
    diags.push_back({DiagnosticCode::ZeroCount, "dma_queue_depth"});
  if (!diags.empty()) throw ConfigError(std::move(diags));

  ValidatedConfig cfg;
  cfg.geometry = geometry;
  cfg.timing = timing;
  cfg.network = network;
  cfg.bank_bits = log2_exact(geometry.banks_per_tile);
  cfg.tile_bits = log2_exact(std::uint64_t(geometry.tiles_per_group) * geometry.groups);
  cfg.row_bits = log2_exact(geometry.bank_words);
  cfg.seq_bits = log2_exact(geometry.seq_rows_per_bank);
  return cfg;
}

}  // namespace mempool
