#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "apuflow/exec.hpp"
#include "apuflow/memmodel.hpp"
#include "apuflow/simple.hpp"

namespace apuflow {

/// Benchmark configuration. Text form is one `key = value` per line; `#`
/// starts a comment. Every key may be overridden by an environment variable
/// named BENCH_<KEY> (upper case), e.g. BENCH_NX=64.
struct RunConfig {
  Index nx = 32;
  Index ny = 32;
  double lid_velocity = 1.0;
  double reynolds = 100.0;
  std::size_t n_steps = 20;
  std::size_t n_warmup = 1;
  std::size_t cutoff = ExecPolicy::kDefaultCutoff;
  MemoryMode mode = MemoryMode::Unified;
  unsigned parallel_width = 1;
  bool pool_enabled = true;
  std::size_t pool_threshold = PoolAllocator::kDefaultThreshold;
  std::size_t page_bytes = 4096;
  // nullopt: calibrate so that moving one cell field costs
  // migration_cost_factor times the mean cell-kernel duration.
  std::optional<double> cost_per_page_us;
  double migration_cost_factor = 5.0;
  bool simulated_delay = false;
  std::size_t repeats = 5;
  double relax_u = 0.7;
  double relax_p = 0.3;
  double momentum_tol = 1e-8;
  double pressure_tol = 1e-8;
  std::size_t max_solver_iters = 1000;
  std::string trace_path;
  std::string report_path;
  std::string baseline_report;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  SimpleControls controls() const;
  ExecPolicy policy() const;
};

/// Keys accepted in config files, in documentation order.
const std::vector<std::string>& config_keys();

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads BENCH_* overrides from the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Parses config text (no validation). Throws ParseError with the line
/// number on malformed lines, unknown keys or bad values.
RunConfig parse_config(std::string_view text);
/// Applies BENCH_<KEY> overrides.
void apply_env_overrides(RunConfig& config, const EnvLookup& env);
/// parse + env overrides + validate. Throws ConfigError when the file is
/// missing.
RunConfig load_config(const std::filesystem::path& path, const EnvLookup& env = process_env);

struct StepRecord {
  std::size_t step = 0;
  double momentum_u = 0.0;
  double momentum_v = 0.0;
  double pressure = 0.0;
  double continuity = 0.0;
  std::size_t momentum_u_iters = 0;
  std::size_t momentum_v_iters = 0;
  std::size_t pressure_iters = 0;
  std::size_t fresh_allocations = 0;
  std::size_t pool_misses = 0;

  bool operator==(const StepRecord&) const = default;
};

struct BenchReport {
  double fom_seconds_per_step = 0.0;
  std::vector<double> repeat_foms;
  std::vector<StepRecord> residual_history;
  MigrationProfile migration_profile;
  PoolStats pool_stats;
  LaneCounts lane_event_counts;
  double cost_per_page_us = 0.0;
  RunConfig config;
  std::vector<std::string> failures;
  std::optional<double> speedup_vs_baseline;
};

/// Runs n_warmup + n_steps outer iterations per repeat on the lid-driven
/// cavity (unit square) and aggregates FOM, residuals, migration profile,
/// pool stats and lane counts. Writes the report and the last repeat's
/// trace when the corresponding paths are set.
BenchReport run_benchmark(const RunConfig& config);

/// Microseconds per page such that one cell field transfer costs `factor`
/// times the mean cell-kernel duration of a pilot outer iteration.
double calibrate_cost_per_page(const RunConfig& config, double factor);

/// fom_b / fom_a: > 1 means `a` is faster. Throws ComparisonError when the
/// reports cover different meshes or step counts.
double compare_reports(const BenchReport& a, const BenchReport& b);

std::string report_to_json(const BenchReport& report);
BenchReport report_from_json(std::string_view json);
void write_report(const BenchReport& report, const std::filesystem::path& path);
BenchReport read_report(const std::filesystem::path& path);

std::string config_to_text(const RunConfig& config);

}  // namespace apuflow
