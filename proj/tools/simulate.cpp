// Runs a (C_mag x V_nor) sweep of the leveraged-ETF market and writes the
// result tables.
//
//   simulate --config FILE [--key=value ...] --out DIR [--paper-scale] [--journal]

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "letfsim/config.hpp"
#include "letfsim/report.hpp"
#include "letfsim/sweep.hpp"

namespace fs = std::filesystem;

int main(int argc, char** argv) {
  CLI::App app{"Leveraged-ETF artificial market sweep"};
  app.allow_extras();

  std::string config_path;
  std::string out_dir;
  bool paper_scale = false;
  bool journal = false;
  bool runs_jsonl = false;
  bool quiet = false;
  std::int64_t jobs = 0;
  app.add_option("--config", config_path, "JSON file with flat configuration keys")->required();
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_flag("--paper-scale", paper_scale, "100 runs per cell instead of the configured count");
  app.add_flag("--journal", journal, "Write the event journal of run 0 of every cell");
  app.add_flag("--runs-jsonl", runs_jsonl, "Write per-run price paths and rebalances to runs.jsonl");
  app.add_option("-j,--jobs", jobs, "Worker threads (default: $LETFSIM_JOBS, else all cores)");
  app.add_flag("-q,--quiet", quiet, "No progress output");
  app.footer("Any other --key=value sets a configuration key, e.g. --max_steps=50000 --v_nor_values=[0.1,0.5].");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  letfsim::SweepSpec spec;
  try {
    std::vector<std::string> overrides;
    for (const auto& extra : app.remaining()) {
      if (!extra.starts_with("--")) throw letfsim::ConfigError(extra, "unexpected argument");
      overrides.push_back(extra);
    }
    if (paper_scale) overrides.emplace_back("runs_per_cell=100");
    if (jobs > 0) overrides.push_back("parallelism=" + std::to_string(jobs));
    spec = letfsim::parse_config_file(config_path, overrides);
  } catch (const letfsim::ConfigError& e) {
    std::cerr << "simulate: config error in field '" << e.field() << "': " << e.what() << '\n';
    return 2;
  }

  const fs::path out(out_dir);
  std::cout << letfsim::to_json(spec).dump(2) << '\n';
  const std::size_t workers = letfsim::resolve_parallelism(spec.parallelism);
  if (!quiet) {
    std::cerr << "simulate: " << spec.cell_count() << " cells x " << spec.runs_per_cell << " runs on " << workers
              << " worker(s)\n";
  }

  letfsim::SweepOptions options;
  options.keep_runs = runs_jsonl;
  std::mutex io;
  if (journal) {
    std::error_code ec;
    fs::create_directories(out / "journal", ec);
    options.journal = [&](std::size_t cell, std::int64_t run) -> std::unique_ptr<std::ostream> {
      if (run != 0) return nullptr;
      const auto config = spec.cell_config(cell, run);
      const std::string name = "c" + std::to_string(config.cash_multiplier) + "_v" +
                               letfsim::format_double(config.normalized_threshold) + ".jsonl";
      auto f = std::make_unique<std::ofstream>(out / "journal" / name);
      if (!*f) throw std::runtime_error("cannot open journal for cell " + std::to_string(cell));
      return f;
    };
  }
  if (!quiet) {
    options.progress = [&](std::size_t done, std::size_t total) {
      const std::lock_guard lock(io);
      if (done == total || done % 10 == 0) std::cerr << "\rsimulate: " << done << "/" << total << " runs" << std::flush;
      if (done == total) std::cerr << '\n';
    };
  }

  try {
    const auto result = letfsim::run_sweep(spec, options);
    letfsim::write_outputs(out, spec, result, {.runs_jsonl = runs_jsonl});
    std::int64_t failed = 0;
    for (const auto& c : result.cells) failed += c.failed_runs;
    if (failed > 0) std::cerr << "simulate: " << failed << " run(s) failed; see failed_runs in cells.csv\n";
  } catch (const std::exception& e) {
    std::cerr << "simulate: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
