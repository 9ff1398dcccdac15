// bench: drive the lid-driven cavity benchmark under a dispatch / memory
// configuration and compare reports.

#include <cstdio>
#include <exception>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "apuflow/bench.hpp"

namespace {

void print_summary(const apuflow::BenchReport& r) {
  const auto& c = r.config;
  std::cout << "case            : " << c.nx << "x" << c.ny << " cavity, Re=" << c.reynolds
            << ", " << c.n_steps << " steps (+" << c.n_warmup << " warmup) x " << c.repeats
            << " repeats\n";
  std::cout << "policy          : mode=" << apuflow::to_string(c.mode) << " cutoff="
            << (c.cutoff == apuflow::ExecPolicy::kNeverOffload ? std::string("inf")
                                                               : std::to_string(c.cutoff))
            << " width=" << c.parallel_width << " pool=" << (c.pool_enabled ? "on" : "off")
            << " delay=" << (c.simulated_delay ? "on" : "off") << "\n";
  std::cout << std::scientific << std::setprecision(4);
  std::cout << "FOM (s/step)    : " << r.fom_seconds_per_step << "\n";
  for (std::size_t i = 0; i < r.repeat_foms.size(); ++i) {
    std::cout << "  repeat " << (i + 1) << "      : " << r.repeat_foms[i] << "\n";
  }
  if (!r.residual_history.empty()) {
    const auto& last = r.residual_history.back();
    std::cout << "final residuals : Ux=" << last.momentum_u << " Uy=" << last.momentum_v
              << " p=" << last.pressure << " continuity=" << last.continuity << "\n";
  }
  std::cout << std::fixed << std::setprecision(1);
  const auto& mp = r.migration_profile;
  std::cout << "\n  device             migration %   compute %\n";
  std::cout << "  " << std::left << std::setw(18) << apuflow::to_string(c.mode) << std::right
            << std::setw(12) << 100.0 * mp.migration_fraction << std::setw(12)
            << 100.0 * (1.0 - mp.migration_fraction) << "\n\n";
  std::cout << "lane events     : serial=" << r.lane_event_counts.serial
            << " parallel=" << r.lane_event_counts.parallel
            << " pinned=" << r.lane_event_counts.pinned << "\n";
  std::cout << "pool            : acquires=" << r.pool_stats.acquires
            << " hits=" << r.pool_stats.hits << " misses=" << r.pool_stats.misses
            << " fresh=" << r.pool_stats.fresh_allocations << "\n";
  if (r.speedup_vs_baseline) {
    std::cout << std::setprecision(3) << "speedup vs baseline: " << *r.speedup_vs_baseline << "\n";
  }
  for (const auto& f : r.failures) std::cout << "FAILED " << f << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lid-driven cavity SIMPLE benchmark with cutoff dispatch and a memory model"};
  app.require_subcommand(1);
  app.footer(
      "Config files hold one 'key = value' per line ('#' comments). Any key can be\n"
      "overridden from the environment as BENCH_<KEY>, e.g. BENCH_NX=64 BENCH_MODE=discrete.\n"
      "Keys: " +
      [] {
        std::string keys;
        for (const auto& k : apuflow::config_keys()) keys += (keys.empty() ? "" : ", ") + k;
        return keys;
      }());

  std::string config_path;
  auto* run = app.add_subcommand("run", "run the benchmark and write the report");
  run->add_option("config", config_path, "run configuration file")->required();

  std::string report_a;
  std::string report_b;
  auto* compare = app.add_subcommand("compare", "normalized speedup of report A over report B");
  compare->add_option("report_a", report_a, "report of the run under test")->required();
  compare->add_option("report_b", report_b, "baseline report")->required();

  std::string trace_config;
  auto* trace = app.add_subcommand("trace", "single repeat with simulated delay on; writes trace");
  trace->add_option("config", trace_config, "run configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      const auto config = apuflow::load_config(config_path);
      const auto report = apuflow::run_benchmark(config);
      print_summary(report);
      if (!config.report_path.empty()) std::cout << "report written to " << config.report_path << "\n";
      if (!config.trace_path.empty()) std::cout << "trace written to " << config.trace_path << "\n";
      return report.failures.empty() ? 0 : 2;
    }
    if (*compare) {
      const auto a = apuflow::read_report(report_a);
      const auto b = apuflow::read_report(report_b);
      const double speedup = apuflow::compare_reports(a, b);
      std::cout << std::fixed << std::setprecision(4) << "normalized speedup (" << report_a
                << " over " << report_b << "): " << speedup << "\n";
      return 0;
    }
    if (*trace) {
      auto config = apuflow::load_config(trace_config);
      config.simulated_delay = true;
      config.repeats = 1;
      if (config.trace_path.empty()) config.trace_path = "trace.json";
      const auto report = apuflow::run_benchmark(config);
      print_summary(report);
      std::cout << "trace written to " << config.trace_path << "\n";
      return report.failures.empty() ? 0 : 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "bench: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
