#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "apuflow/bench.hpp"
#include "apuflow/errors.hpp"

using namespace apuflow;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("apuflow_bench_test_" + name);
}

fs::path write_file(const std::string& name, const std::string& text) {
  const auto path = temp_path(name);
  std::ofstream(path) << text;
  return path;
}

EnvLookup env_from(std::map<std::string, std::string> vars) {
  return [vars](const std::string& name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

const EnvLookup no_env = [](const std::string&) { return std::optional<std::string>{}; };

RunConfig small_config() {
  RunConfig c;
  c.nx = 12;
  c.ny = 12;
  c.n_steps = 3;
  c.repeats = 2;
  c.cost_per_page_us = 1.0;
  c.parallel_width = 2;
  return c;
}

}  // namespace

TEST_CASE("minimal config gets defaults") {
  const auto path = write_file("minimal.cfg", "nx: 32\nny: 32\n");
  const auto c = load_config(path, no_env);
  CHECK(c.nx == 32);
  CHECK(c.ny == 32);
  CHECK(c.n_steps == 20);
  CHECK(c.repeats == 5);
  CHECK(c.n_warmup == 1);
  CHECK(c.cutoff == 10000);
  CHECK(c.mode == MemoryMode::Unified);
  CHECK(c.pool_threshold == 5000);
  CHECK(c.page_bytes == 4096);
  CHECK_FALSE(c.cost_per_page_us.has_value());
}

TEST_CASE("config errors") {
  SUBCASE("n_steps = 0") {
    const auto path = write_file("zero.cfg", "nx = 8\nn_steps = 0\n");
    try {
      load_config(path, no_env);
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("n_steps") != std::string::npos);
    }
  }
  SUBCASE("unknown key lists the valid keys") {
    try {
      parse_config("nx = 8\n# comment\nbogus = 1\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      const std::string msg = e.what();
      CHECK(e.line() == 3);
      CHECK(msg.find("bogus") != std::string::npos);
      CHECK(msg.find("n_steps") != std::string::npos);
      CHECK(msg.find("cost_per_page_us") != std::string::npos);
    }
  }
  SUBCASE("malformed line") {
    CHECK_THROWS_AS(parse_config("nx 8\n"), ParseError);
  }
  SUBCASE("bad value") {
    CHECK_THROWS_AS(parse_config("mode = sideways\n"), ParseError);
    CHECK_THROWS_AS(parse_config("nx = -3\n"), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_config(temp_path("does_not_exist.cfg"), no_env), ConfigError);
  }
}

TEST_CASE("parsing details") {
  const auto c = parse_config(
      "  nx = 40   # trailing comment\n"
      "mode = discrete\n"
      "cutoff = inf\n"
      "cost_per_page_us = 2.5\n"
      "pool_enabled = false\n");
  CHECK(c.nx == 40);
  CHECK(c.mode == MemoryMode::Discrete);
  CHECK(c.cutoff == ExecPolicy::kNeverOffload);
  CHECK(c.cost_per_page_us == 2.5);
  CHECK_FALSE(c.pool_enabled);
  CHECK_FALSE(parse_config("cost_per_page_us = auto\n").cost_per_page_us.has_value());
}

TEST_CASE("environment overrides") {
  const auto path = write_file("env.cfg", "nx = 32\nny = 32\nmode = unified\n");
  const auto c = load_config(path, env_from({{"BENCH_NX", "48"}, {"BENCH_MODE", "discrete"}}));
  CHECK(c.nx == 48);
  CHECK(c.ny == 32);
  CHECK(c.mode == MemoryMode::Discrete);
  CHECK_THROWS_AS(load_config(path, env_from({{"BENCH_REPEATS", "0"}})), ConfigError);
  CHECK_THROWS_AS(load_config(path, env_from({{"BENCH_NX", "abc"}})), ConfigError);
}

TEST_CASE("config text round-trips") {
  RunConfig c = small_config();
  c.mode = MemoryMode::Discrete;
  c.cutoff = ExecPolicy::kNeverOffload;
  const auto back = parse_config(config_to_text(c));
  CHECK(config_to_text(back) == config_to_text(c));
}

TEST_CASE("benchmark report contents") {
  RunConfig c = small_config();
  c.repeats = 5;
  const auto r = run_benchmark(c);
  CHECK(r.failures.empty());
  REQUIRE(r.repeat_foms.size() == 5);
  double mean = 0.0;
  for (double f : r.repeat_foms) mean += f / 5.0;
  CHECK(r.fom_seconds_per_step == doctest::Approx(mean));
  CHECK(r.residual_history.size() == 3);
  CHECK(r.migration_profile.migration_fraction == 0.0);
  CHECK(r.migration_profile.migration_us == 0.0);
  CHECK(r.lane_event_counts.parallel == 0);  // 144 cells never exceed the default cutoff
}

TEST_CASE("determinism: histories and counts") {
  RunConfig c = small_config();
  c.cutoff = 100;
  c.mode = MemoryMode::Discrete;
  const auto a = run_benchmark(c);
  const auto b = run_benchmark(c);
  CHECK(a.residual_history == b.residual_history);
  CHECK(a.lane_event_counts.serial == b.lane_event_counts.serial);
  CHECK(a.lane_event_counts.parallel == b.lane_event_counts.parallel);
  CHECK(a.lane_event_counts.pinned == b.lane_event_counts.pinned);
  CHECK(a.migration_profile.migration_us == b.migration_profile.migration_us);
}

TEST_CASE("pooled run allocates less from step 2") {
  RunConfig c = small_config();
  c.nx = 80;
  c.ny = 80;
  c.n_steps = 3;
  c.repeats = 1;
  c.n_warmup = 0;
  c.momentum_tol = 1e-6;
  c.pressure_tol = 1e-6;
  RunConfig off = c;
  off.pool_enabled = false;
  const auto pooled = run_benchmark(c);
  const auto plain = run_benchmark(off);
  for (std::size_t s = 1; s < 3; ++s) {
    CHECK(pooled.residual_history[s].pool_misses == 0);
    CHECK(pooled.residual_history[s].fresh_allocations < plain.residual_history[s].fresh_allocations);
  }
}

TEST_CASE("report JSON round-trip") {
  RunConfig c = small_config();
  c.mode = MemoryMode::Discrete;
  c.cutoff = 0;
  const auto r = run_benchmark(c);
  const auto back = report_from_json(report_to_json(r));
  CHECK(back.fom_seconds_per_step == r.fom_seconds_per_step);
  CHECK(back.repeat_foms == r.repeat_foms);
  CHECK(back.residual_history == r.residual_history);
  CHECK(back.migration_profile.migration_us == r.migration_profile.migration_us);
  CHECK(back.migration_profile.compute_us == r.migration_profile.compute_us);
  CHECK(back.migration_profile.migration_fraction == r.migration_profile.migration_fraction);
  CHECK(back.pool_stats.acquires == r.pool_stats.acquires);
  CHECK(back.pool_stats.hits == r.pool_stats.hits);
  CHECK(back.lane_event_counts.parallel == r.lane_event_counts.parallel);
  CHECK(back.cost_per_page_us == r.cost_per_page_us);
  CHECK(config_to_text(back.config) == config_to_text(r.config));
  CHECK(report_to_json(back) == report_to_json(r));

  const auto doc = nlohmann::json::parse(report_to_json(r));
  for (const char* key : {"fom_seconds_per_step", "repeat_foms", "residual_history",
                          "migration_profile", "pool_stats", "lane_event_counts", "config"})
    CHECK(doc.contains(key));
}

TEST_CASE("report and trace files") {
  RunConfig c = small_config();
  c.repeats = 1;
  c.cutoff = 0;
  c.report_path = temp_path("report.json").string();
  c.trace_path = temp_path("trace.json").string();
  const auto r = run_benchmark(c);
  const auto back = read_report(c.report_path);
  CHECK(back.residual_history == r.residual_history);
  std::ifstream in(c.trace_path);
  const auto trace = nlohmann::json::parse(in);
  REQUIRE(trace["traceEvents"].is_array());
  CHECK(trace["traceEvents"].size() > 0);
  for (const auto& ev : trace["traceEvents"]) {
    CHECK(ev["ph"] == "X");
    CHECK((ev["tid"] == 1 || ev["tid"] == 2));
  }
}

TEST_CASE("compare reports") {
  BenchReport a, b;
  a.config = b.config = small_config();
  a.fom_seconds_per_step = 2.0;
  b.fom_seconds_per_step = 8.0;
  CHECK(compare_reports(a, b) == 4.0);
  CHECK(compare_reports(a, a) == 1.0);
  BenchReport other = b;
  other.config.nx = 64;
  CHECK_THROWS_AS(compare_reports(a, other), ComparisonError);
  BenchReport empty = b;
  empty.fom_seconds_per_step = 0.0;
  CHECK_THROWS_AS(compare_reports(a, empty), ComparisonError);
}

TEST_CASE("run_benchmark validates its config") {
  RunConfig c = small_config();
  c.repeats = 0;
  CHECK_THROWS_AS(run_benchmark(c), ConfigError);
  c = small_config();
  c.relax_p = 0.0;
  CHECK_THROWS_AS(run_benchmark(c), ConfigError);
}
