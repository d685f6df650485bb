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

#include "mempool/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <fstream>
#include <sstream>

#include "mempool/experiments.hpp"

namespace mempool {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  out.flush();
  if (!out) throw IoError("error writing '" + path + "'");
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cycle-level simulator of a shared-L1 manycore cluster", "mempool-sim"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_path, topology = "hybrid", trace_path;
  std::uint64_t seed = kDefaultSeed;
  unsigned jobs = 0;
  bool serial = false;
  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--out", out_path, "output file (.json selects JSON, otherwise CSV)");
  app.add_option("--topology", topology, "one | four | hybrid");
  app.add_option("--jobs", jobs, "worker threads, 0 for all cores");
  app.add_flag("--serial", serial, "run sweep points on the calling thread");

  const std::vector<std::pair<Experiment, std::string>> subs = {
      {Experiment::NetworkSweep, "throughput and latency against injected load"},
      {Experiment::ScrambleSweep, "hybrid addressing: throughput against p_local"},
      {Experiment::DmaUtil, "AXI bus utilization of DMA transfers"},
      {Experiment::KernelRun, "benchmark kernels and their stall breakdown"},
      {Experiment::IcacheSim, "instruction cache replay of a fetch trace"},
      {Experiment::DoubleBuffer, "phase timeline of double-buffered kernels"}};
  std::vector<CLI::App*> cmds;
  for (const auto& [e, help] : subs) cmds.push_back(app.add_subcommand(std::string(experiment_name(e)), help));
  cmds[std::size_t(Experiment::IcacheSim)]->add_option("--trace", trace_path, "fetch trace file");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mempool-sim: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    RunContext ctx;
    ctx.config = config_path.empty() ? SimConfig{} : load_config(config_path);
    ctx.config.check();
    ctx.seed = seed;
    ctx.topology = parse_topology(topology);
    ctx.jobs = jobs;
    ctx.mode = serial ? ExecMode::Serial : ExecMode::Parallel;

    Table table;
    if (cmds[0]->parsed())
      table = run_network_sweep(ctx);
    else if (cmds[1]->parsed())
      table = run_scramble_sweep(ctx);
    else if (cmds[2]->parsed())
      table = run_dma_util(ctx);
    else if (cmds[3]->parsed())
      table = run_kernels(ctx);
    else if (cmds[4]->parsed()) {
      if (trace_path.empty()) trace_path = ctx.config.workload.trace;
      table = run_icache_sim(ctx, trace_path.empty() ? std::string() : read_file(trace_path));
    } else
      table = run_double_buffer(ctx);

    const std::string text = ends_with(out_path, ".json") ? table.to_json() : table.to_csv();
    if (out_path.empty())
      out << text;
    else
      write_file(out_path, text);
    return kExitOk;
  } catch (const IoError& e) {
    err << "mempool-sim: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ConfigError& e) {
    err << "mempool-sim: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TraceError& e) {
    err << "mempool-sim: trace error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UnsupportedGeometry& e) {
    err << "mempool-sim: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvariantViolation& e) {
    err << "mempool-sim: invariant violated: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const DrainTimeout& e) {
    err << "mempool-sim: invariant violated: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    err << "mempool-sim: internal error: " << e.what() << "\n";
    return kExitInvariant;
  }
}

}  // namespace mempool
