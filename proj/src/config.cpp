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

#include "mempool/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mempool {

namespace {

namespace pt = boost::property_tree;

using Setter = std::function<void(SimConfig&, const std::string&)>;
using Section = std::map<std::string, Setter>;

std::string trim(std::string s) {
  boost::algorithm::trim(s);
  return s;
}

template <class T>
T parse_number(const std::string& raw, const std::string& key) {
  const std::string s = trim(raw);
  T v{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  int base = 10;
  if constexpr (std::is_integral_v<T>) {
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
      first += 2;
      base = 16;
    }
    if (!s.empty() && s[0] == '-') throw ConfigError("negative value for " + key);
    auto [p, ec] = std::from_chars(first, last, v, base);
    if (ec != std::errc{} || p != last || first == last) throw ConfigError("bad integer for " + key + ": '" + s + "'");
  } else {
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last || first == last) throw ConfigError("bad number for " + key + ": '" + s + "'");
  }
  return v;
}

bool parse_bool(const std::string& raw, const std::string& key) {
  const std::string s = boost::algorithm::to_lower_copy(trim(raw));
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("bad boolean for " + key + ": '" + s + "'");
}

template <class T>
std::vector<T> parse_list(const std::string& raw, const std::string& key) {
  std::vector<std::string> parts;
  boost::algorithm::split(parts, raw, boost::is_any_of(","));
  std::vector<T> out;
  for (const auto& p : parts) {
    if constexpr (std::is_same_v<T, std::string>)
      out.push_back(trim(p));
    else
      out.push_back(parse_number<T>(p, key));
  }
  if (out.empty() || (out.size() == 1 && trim(parts[0]).empty())) throw ConfigError("empty list for " + key);
  return out;
}

#define MP_UINT(path) [](SimConfig& c, const std::string& v) { c.path = parse_number<unsigned>(v, #path); }
#define MP_U64(path) [](SimConfig& c, const std::string& v) { c.path = parse_number<std::uint64_t>(v, #path); }
#define MP_DBL(path) [](SimConfig& c, const std::string& v) { c.path = parse_number<double>(v, #path); }
#define MP_BOOL(path) [](SimConfig& c, const std::string& v) { c.path = parse_bool(v, #path); }

StoreKind parse_store(const std::string& raw) {
  const std::string s = boost::algorithm::to_lower_copy(trim(raw));
  if (s == "sram") return StoreKind::Sram;
  if (s == "scm") return StoreKind::Scm;
  if (s == "latch") return StoreKind::Latch;
  throw ConfigError("unknown store kind '" + s + "'");
}

const std::map<std::string, Section>& schema() {
  static const std::map<std::string, Section> s = {
      {"geometry",
       {{"cores_per_tile", MP_UINT(geometry.cores_per_tile)},
        {"tiles_per_group", MP_UINT(geometry.tiles_per_group)},
        {"groups", MP_UINT(geometry.groups)},
        {"banks_per_tile", MP_UINT(geometry.banks_per_tile)},
        {"bank_words", MP_UINT(geometry.bank_words)},
        {"seq_rows_per_bank", MP_UINT(geometry.seq_rows_per_bank)}}},
      {"timing",
       {{"latency_local_tile", MP_UINT(timing.latency_local_tile)},
        {"latency_local_group", MP_UINT(timing.latency_local_group)},
        {"latency_remote_group", MP_UINT(timing.latency_remote_group)},
        {"l2_latency", MP_UINT(timing.l2_latency)},
        {"l2_bandwidth", MP_UINT(timing.l2_bandwidth)},
        {"dma_setup", MP_UINT(timing.dma_setup)},
        {"wakeup_latency", MP_UINT(timing.wakeup_latency)}}},
      {"network",
       {{"queue_depth", MP_UINT(network.queue_depth)},
        {"butterfly_buffer", MP_UINT(network.butterfly_buffer)},
        {"response_queue_depth", MP_UINT(network.response_queue_depth)},
        {"dma_queue_depth", MP_UINT(network.dma_queue_depth)}}},
      {"dma",
       {{"backends_per_group", MP_UINT(uplink.backends_per_group)},
        {"axi_width", MP_UINT(uplink.axi_width)},
        {"axi_radix", MP_UINT(uplink.axi_radix)},
        {"backend_outstanding", MP_UINT(uplink.backend_outstanding)},
        {"axi_min_txn_cycles", MP_UINT(uplink.axi_min_txn_cycles)},
        {"rocache_bytes", MP_UINT(uplink.rocache_bytes)},
        {"rocache_line_bytes", MP_UINT(uplink.rocache_line_bytes)},
        {"rocache_ways", MP_UINT(uplink.rocache_ways)},
        {"rocache_stages", MP_UINT(uplink.rocache_stages)},
        {"l2_bytes", MP_U64(uplink.l2_bytes)}}},
      {"icache",
       {{"preset", [](SimConfig& c, const std::string& v) { c.icache = icache_preset(trim(v)); }},
        {"refill_latency", MP_UINT(icache.refill_latency)},
        {"refill_bus_bytes", MP_UINT(icache.refill_bus_bytes)},
        {"l0_lines", MP_UINT(icache.l0.lines)},
        {"l0_line_instrs", MP_UINT(icache.l0.line_instrs)},
        {"l0_prefetch", MP_BOOL(icache.l0.prefetch)},
        {"l0_prefetch_depth", MP_UINT(icache.l0.prefetch_depth)},
        {"l0_store", [](SimConfig& c, const std::string& v) { c.icache.l0.store = parse_store(v); }},
        {"l1_size_bytes", MP_UINT(icache.l1.size_bytes)},
        {"l1_ways", MP_UINT(icache.l1.ways)},
        {"l1_line_bytes", MP_UINT(icache.l1.line_bytes)},
        {"l1_tag_store", [](SimConfig& c, const std::string& v) { c.icache.l1.tag_store = parse_store(v); }},
        {"l1_data_store", [](SimConfig& c, const std::string& v) { c.icache.l1.data_store = parse_store(v); }},
        {"l1_lookup",
         [](SimConfig& c, const std::string& v) {
           const std::string s = boost::algorithm::to_lower_copy(trim(v));
           if (s == "parallel")
             c.icache.l1.lookup = L1Lookup::Parallel;
           else if (s == "serial")
             c.icache.l1.lookup = L1Lookup::Serial;
           else
             throw ConfigError("l1_lookup must be parallel or serial");
         }}}},
      {"workload",
       {{"traffic",
         [](SimConfig& c, const std::string& v) {
           const std::string s = boost::algorithm::to_lower_copy(trim(v));
           if (s == "uniform")
             c.workload.traffic = TrafficConfig::Kind::Uniform;
           else if (s == "hybrid" || s == "hybrid-local")
             c.workload.traffic = TrafficConfig::Kind::HybridLocal;
           else
             throw ConfigError("traffic must be uniform or hybrid-local");
         }},
        {"lambda", MP_DBL(workload.lambda)},
        {"p_local", MP_DBL(workload.p_local)},
        {"kernel",
         [](SimConfig& c, const std::string& v) {
           const std::string s = boost::algorithm::to_lower_copy(trim(v));
           if (s != "all") parse_kernel(s);
           c.workload.kernel = s;
         }},
        {"max_outstanding", MP_UINT(workload.max_outstanding)},
        {"mac_depth", MP_UINT(workload.mac_depth)},
        {"iterations", [](SimConfig& c, const std::string& v) { c.workload.iterations = parse_number<unsigned>(v, "iterations"); }},
        {"warmup", MP_U64(workload.warmup)},
        {"window", MP_U64(workload.window)},
        {"rounds", MP_UINT(workload.rounds)},
        {"model_icache", MP_BOOL(workload.model_icache)},
        {"dma_direction",
         [](SimConfig& c, const std::string& v) {
           const std::string s = boost::algorithm::to_lower_copy(trim(v));
           if (s == "in")
             c.workload.dma_direction = DmaDirection::In;
           else if (s == "out")
             c.workload.dma_direction = DmaDirection::Out;
           else
             throw ConfigError("dma_direction must be in or out");
         }},
        {"trace", [](SimConfig& c, const std::string& v) { c.workload.trace = trim(v); }}}},
      {"sweep",
       {{"lambdas", [](SimConfig& c, const std::string& v) { c.sweep.lambdas = parse_list<double>(v, "lambdas"); }},
        {"p_locals", [](SimConfig& c, const std::string& v) { c.sweep.p_locals = parse_list<double>(v, "p_locals"); }},
        {"sizes", [](SimConfig& c, const std::string& v) { c.sweep.sizes = parse_list<std::uint64_t>(v, "sizes"); }},
        {"backends", [](SimConfig& c, const std::string& v) { c.sweep.backends = parse_list<unsigned>(v, "backends"); }},
        {"icache_presets",
         [](SimConfig& c, const std::string& v) {
           c.sweep.icache_presets = parse_list<std::string>(v, "icache_presets");
           for (const auto& p : c.sweep.icache_presets) icache_preset(p);
         }}}},
  };
  return s;
}

#undef MP_UINT
#undef MP_U64
#undef MP_DBL
#undef MP_BOOL

}  // namespace

ValidatedConfig SimConfig::validated() const { return validate(geometry, timing, network); }

void SimConfig::check() const {
  const ValidatedConfig cfg = validated();
  uplink.check(cfg);
  icache.check();
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!unit(workload.lambda) || !unit(workload.p_local)) throw ConfigError("lambda and p_local must lie in [0, 1]");
  if (workload.max_outstanding == 0) throw ConfigError("max_outstanding must be positive");
  if (workload.window == 0) throw ConfigError("measurement window must be positive");
  if (workload.rounds == 0) throw ConfigError("rounds must be positive");
  if (sweep.lambdas.empty() || sweep.p_locals.empty() || sweep.sizes.empty() || sweep.backends.empty() ||
      sweep.icache_presets.empty())
    throw ConfigError("sweep axes must be non-empty");
  for (double l : sweep.lambdas)
    if (!unit(l)) throw ConfigError("sweep lambdas must lie in [0, 1]");
  for (double p : sweep.p_locals)
    if (!unit(p)) throw ConfigError("sweep p_locals must lie in [0, 1]");
  for (auto s : sweep.sizes)
    if (s == 0 || s % kWordBytes) throw ConfigError("transfer sizes must be positive multiples of 4");
  for (unsigned b : sweep.backends) {
    UplinkParams up = uplink;
    up.backends_per_group = b;
    up.check(cfg);
  }
}

SimConfig parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  SimConfig c;
  const auto& sch = schema();
  // Apply the icache preset first so field overrides stick regardless of order.
  for (const auto& [name, section] : tree) {
    if (section.empty()) throw ConfigError("key '" + name + "' outside any section");
    const auto it = sch.find(name);
    if (it == sch.end()) throw ConfigError("unknown section [" + name + "]");
    if (name == "icache")
      if (const auto p = section.get_optional<std::string>("preset")) it->second.at("preset")(c, *p);
  }
  for (const auto& [name, section] : tree) {
    const Section& keys = sch.at(name);
    for (const auto& [key, value] : section) {
      if (!value.empty()) throw ConfigError("nested key in [" + name + "]");
      const auto k = keys.find(key);
      if (k == keys.end()) throw ConfigError("unknown key '" + key + "' in [" + name + "]");
      if (name == "icache" && key == "preset") continue;
      try {
        k->second(c, value.data());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string(e.what()));
      }
    }
  }
  c.check();
  return c;
}

SimConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  return parse_config(in);
}

}  // namespace mempool
