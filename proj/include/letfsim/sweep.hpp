#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <memory>
#include <ostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "letfsim/analytics.hpp"
#include "letfsim/config.hpp"
#include "letfsim/sim_engine.hpp"

namespace letfsim {

/// Environment variable holding the default worker count.
inline constexpr const char* kJobsEnv = "LETFSIM_JOBS";

/// Worker count: an explicit request, else LETFSIM_JOBS, else the hardware.
inline std::size_t resolve_parallelism(std::int64_t requested) {
  if (requested > 0) return static_cast<std::size_t>(requested);
  if (const char* env = std::getenv(kJobsEnv)) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Outcome of one run of a sweep.
struct RunRecord {
  std::size_t cell = 0;
  std::int64_t run = 0;
  std::uint64_t seed = 0;
  std::optional<std::string> error;  // set when the run threw
  RunStatistics stats;
  std::optional<RunResult> result;  // kept only on request
};

struct SweepResult {
  std::vector<CellSummary> cells;  // (c_mag asc, v_nor asc) in grid order
  std::vector<RunRecord> runs;     // (cell, run) order
};

struct SweepOptions {
  bool keep_runs = false;
  // Event journal sink for a run, or nullptr for none.
  std::function<std::unique_ptr<std::ostream>(std::size_t cell, std::int64_t run)> journal;
  std::function<void(std::size_t done, std::size_t total)> progress;  // called from worker threads
};

/// Applies `job(i)` to i in [0, count) on `workers` threads.
template <class Job>
void parallel_for(std::size_t count, std::size_t workers, Job&& job) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  }
}

/// Runs every (cell, run) job and aggregates per cell. Results depend only on
/// the spec, never on the worker count or scheduling.
inline SweepResult run_sweep(SweepSpec spec, const SweepOptions& options = {}) {
  spec.normalize();
  spec.validate();
  const std::size_t cells = spec.cell_count();
  const auto per_cell = static_cast<std::size_t>(spec.runs_per_cell);
  const std::size_t total = cells * per_cell;

  SweepResult out;
  out.runs.resize(total);
  std::atomic<std::size_t> done{0};

  parallel_for(total, resolve_parallelism(spec.parallelism), [&](std::size_t i) {
    RunRecord& rec = out.runs[i];
    rec.cell = i / per_cell;
    rec.run = static_cast<std::int64_t>(i % per_cell);
    const SimConfig config = spec.cell_config(rec.cell, rec.run);
    rec.seed = config.seed;
    try {
      std::unique_ptr<std::ostream> journal;
      if (options.journal) journal = options.journal(rec.cell, rec.run);
      RunResult result = run(config, journal.get());
      rec.stats = run_statistics(result, spec.raw_kurtosis);
      if (options.keep_runs) rec.result = std::move(result);
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    const std::size_t n = ++done;
    if (options.progress) options.progress(n, total);
  });

  out.cells.reserve(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    std::vector<RunStatistics> stats;
    std::int64_t failed = 0;
    for (std::size_t r = 0; r < per_cell; ++r) {
      const RunRecord& rec = out.runs[c * per_cell + r];
      if (rec.error) {
        ++failed;
      } else {
        stats.push_back(rec.stats);
      }
    }
    const SimConfig config = spec.cell_config(c, 0);
    out.cells.push_back(summarize_cell(stats, config.cash_multiplier, config.normalized_threshold, failed));
  }
  return out;
}

}  // namespace letfsim
