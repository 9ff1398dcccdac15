#include "apuflow/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "apuflow/errors.hpp"
#include "apuflow/mesh.hpp"

namespace apuflow {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  // std::from_chars for double is not available on every libstdc++ we target.
  char* end = nullptr;
  const double out = std::strtod(value.c_str(), &end);
  if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a finite number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = lower(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true/false, got '" + value + "'");
}

std::string format_double(double value) {
  std::ostringstream out;
  out.precision(17);
  out << value;
  return out.str();
}

struct KeySpec {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"nx", [](RunConfig& c, const std::string& v) { c.nx = parse_uint("nx", v); },
       [](const RunConfig& c) { return std::to_string(c.nx); }},
      {"ny", [](RunConfig& c, const std::string& v) { c.ny = parse_uint("ny", v); },
       [](const RunConfig& c) { return std::to_string(c.ny); }},
      {"lid_velocity",
       [](RunConfig& c, const std::string& v) { c.lid_velocity = parse_double("lid_velocity", v); },
       [](const RunConfig& c) { return format_double(c.lid_velocity); }},
      {"reynolds",
       [](RunConfig& c, const std::string& v) { c.reynolds = parse_double("reynolds", v); },
       [](const RunConfig& c) { return format_double(c.reynolds); }},
      {"n_steps", [](RunConfig& c, const std::string& v) { c.n_steps = parse_uint("n_steps", v); },
       [](const RunConfig& c) { return std::to_string(c.n_steps); }},
      {"n_warmup",
       [](RunConfig& c, const std::string& v) { c.n_warmup = parse_uint("n_warmup", v); },
       [](const RunConfig& c) { return std::to_string(c.n_warmup); }},
      {"cutoff",
       [](RunConfig& c, const std::string& v) {
         const std::string l = lower(v);
         c.cutoff = (l == "inf" || l == "infinity" || l == "never") ? ExecPolicy::kNeverOffload
                                                                     : parse_uint("cutoff", v);
       },
       [](const RunConfig& c) {
         return c.cutoff == ExecPolicy::kNeverOffload ? std::string("inf")
                                                      : std::to_string(c.cutoff);
       }},
      {"mode", [](RunConfig& c, const std::string& v) { c.mode = parse_memory_mode(lower(v)); },
       [](const RunConfig& c) { return std::string(to_string(c.mode)); }},
      {"parallel_width",
       [](RunConfig& c, const std::string& v) {
         c.parallel_width = static_cast<unsigned>(parse_uint("parallel_width", v));
       },
       [](const RunConfig& c) { return std::to_string(c.parallel_width); }},
      {"pool_enabled",
       [](RunConfig& c, const std::string& v) { c.pool_enabled = parse_bool("pool_enabled", v); },
       [](const RunConfig& c) { return std::string(c.pool_enabled ? "true" : "false"); }},
      {"pool_threshold",
       [](RunConfig& c, const std::string& v) {
         c.pool_threshold = parse_uint("pool_threshold", v);
       },
       [](const RunConfig& c) { return std::to_string(c.pool_threshold); }},
      {"page_bytes",
       [](RunConfig& c, const std::string& v) { c.page_bytes = parse_uint("page_bytes", v); },
       [](const RunConfig& c) { return std::to_string(c.page_bytes); }},
      {"cost_per_page_us",
       [](RunConfig& c, const std::string& v) {
         if (lower(v) == "auto") {
           c.cost_per_page_us.reset();
         } else {
           c.cost_per_page_us = parse_double("cost_per_page_us", v);
         }
       },
       [](const RunConfig& c) {
         return c.cost_per_page_us ? format_double(*c.cost_per_page_us) : std::string("auto");
       }},
      {"migration_cost_factor",
       [](RunConfig& c, const std::string& v) {
         c.migration_cost_factor = parse_double("migration_cost_factor", v);
       },
       [](const RunConfig& c) { return format_double(c.migration_cost_factor); }},
      {"simulated_delay",
       [](RunConfig& c, const std::string& v) {
         c.simulated_delay = parse_bool("simulated_delay", v);
       },
       [](const RunConfig& c) { return std::string(c.simulated_delay ? "true" : "false"); }},
      {"repeats", [](RunConfig& c, const std::string& v) { c.repeats = parse_uint("repeats", v); },
       [](const RunConfig& c) { return std::to_string(c.repeats); }},
      {"relax_u", [](RunConfig& c, const std::string& v) { c.relax_u = parse_double("relax_u", v); },
       [](const RunConfig& c) { return format_double(c.relax_u); }},
      {"relax_p", [](RunConfig& c, const std::string& v) { c.relax_p = parse_double("relax_p", v); },
       [](const RunConfig& c) { return format_double(c.relax_p); }},
      {"momentum_tol",
       [](RunConfig& c, const std::string& v) { c.momentum_tol = parse_double("momentum_tol", v); },
       [](const RunConfig& c) { return format_double(c.momentum_tol); }},
      {"pressure_tol",
       [](RunConfig& c, const std::string& v) { c.pressure_tol = parse_double("pressure_tol", v); },
       [](const RunConfig& c) { return format_double(c.pressure_tol); }},
      {"max_solver_iters",
       [](RunConfig& c, const std::string& v) {
         c.max_solver_iters = parse_uint("max_solver_iters", v);
       },
       [](const RunConfig& c) { return std::to_string(c.max_solver_iters); }},
      {"trace_path", [](RunConfig& c, const std::string& v) { c.trace_path = v; },
       [](const RunConfig& c) { return c.trace_path; }},
      {"report_path", [](RunConfig& c, const std::string& v) { c.report_path = v; },
       [](const RunConfig& c) { return c.report_path; }},
      {"baseline_report", [](RunConfig& c, const std::string& v) { c.baseline_report = v; },
       [](const RunConfig& c) { return c.baseline_report; }},
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_uint("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
  };
  return specs;
}

const KeySpec* find_key(const std::string& name) {
  for (const auto& spec : key_specs()) {
    if (name == spec.name) return &spec;
  }
  return nullptr;
}

std::string valid_keys_list() {
  std::string out;
  for (const auto& key : config_keys()) {
    if (!out.empty()) out += ", ";
    out += key;
  }
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& spec : key_specs()) k.emplace_back(spec.name);
    return k;
  }();
  return keys;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& what) {
    throw ConfigError(field + ": " + what);
  };
  if (nx < 2) fail("nx", "must be at least 2");
  if (ny < 2) fail("ny", "must be at least 2");
  if (!(reynolds > 0.0)) fail("reynolds", "must be positive");
  if (n_steps < 1) fail("n_steps", "must be at least 1");
  if (repeats < 1) fail("repeats", "must be at least 1");
  if (parallel_width < 1) fail("parallel_width", "must be at least 1");
  if (page_bytes < 1) fail("page_bytes", "must be at least 1");
  if (cost_per_page_us && !(*cost_per_page_us >= 0.0)) {
    fail("cost_per_page_us", "must be non-negative or 'auto'");
  }
  if (!(migration_cost_factor >= 0.0)) fail("migration_cost_factor", "must be non-negative");
  if (!(relax_u > 0.0 && relax_u <= 1.0)) fail("relax_u", "must lie in (0, 1]");
  if (!(relax_p > 0.0 && relax_p <= 1.0)) fail("relax_p", "must lie in (0, 1]");
  if (!(momentum_tol > 0.0)) fail("momentum_tol", "must be positive");
  if (!(pressure_tol > 0.0)) fail("pressure_tol", "must be positive");
  if (max_solver_iters < 1) fail("max_solver_iters", "must be at least 1");
}

SimpleControls RunConfig::controls() const {
  SimpleControls c;
  // Unit cavity: Re = U L / nu.
  const double u_ref = lid_velocity != 0.0 ? std::abs(lid_velocity) : 1.0;
  c.nu = u_ref / reynolds;
  c.lid_velocity = lid_velocity;
  c.relax_u = relax_u;
  c.relax_p = relax_p;
  c.momentum_tol = momentum_tol;
  c.pressure_tol = pressure_tol;
  c.max_solver_iters = max_solver_iters;
  c.max_outer_iters = n_steps;
  c.residual_floor = 0.0;
  return c;
}

ExecPolicy RunConfig::policy() const {
  ExecPolicy p;
  p.cutoff = cutoff;
  p.mode = mode;
  p.parallel_width = parallel_width;
  p.trace_enabled = true;
  p.simulated_delay = simulated_delay;
  return p;
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* value = std::getenv(name.c_str())) return std::string(value);
  return std::nullopt;
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  config.parallel_width = std::max(1u, std::thread::hardware_concurrency());
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string line(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) {
      if (eol == text.size()) break;
      continue;
    }
    auto sep = line.find('=');
    if (sep == std::string::npos) sep = line.find(':');
    if (sep == std::string::npos) {
      throw ParseError("expected 'key = value', got '" + line + "'", line_no);
    }
    const std::string key = lower(trim(line.substr(0, sep)));
    const std::string value = trim(line.substr(sep + 1));
    const KeySpec* spec = find_key(key);
    if (!spec) {
      throw ParseError("unknown key '" + key + "'; valid keys: " + valid_keys_list(), line_no);
    }
    try {
      spec->set(config, value);
    } catch (const ParseError&) {
      throw;
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (eol == text.size()) break;
  }
  return config;
}

void apply_env_overrides(RunConfig& config, const EnvLookup& env) {
  if (!env) return;
  for (const auto& spec : key_specs()) {
    std::string name = "BENCH_";
    for (const char* p = spec.name; *p; ++p) name += static_cast<char>(std::toupper(*p));
    if (auto value = env(name)) {
      try {
        spec.set(config, trim(*value));
      } catch (const ConfigError& e) {
        throw ConfigError(name + ": " + e.what());
      }
    }
  }
}

RunConfig load_config(const std::filesystem::path& path, const EnvLookup& env) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path.string() + "'");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  RunConfig config = parse_config(buffer.str());
  apply_env_overrides(config, env);
  config.validate();
  return config;
}

std::string config_to_text(const RunConfig& config) {
  std::string out;
  for (const auto& spec : key_specs()) {
    out += spec.name;
    out += " = ";
    out += spec.get(config);
    out += '\n';
  }
  return out;
}

// Benchmark ----------------------------------------------------------------

double calibrate_cost_per_page(const RunConfig& config, double factor) {
  const Mesh mesh = build_structured_mesh(config.nx, config.ny, 1.0, 1.0);
  ExecPolicy policy = config.policy();
  policy.mode = MemoryMode::Unified;
  policy.simulated_delay = false;
  PoolAllocator pool(config.pool_threshold, config.pool_enabled);
  Executor exec(policy);
  SimpleState state(mesh, &pool);
  SimpleControls controls = config.controls();
  controls.validate();
  for (int it = 0; it < 2; ++it) {
    exec.clear_trace();
    simple_outer_iteration(state, mesh, controls, exec);
  }
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& event : exec.trace()) {
    if (event.loop_len == mesh.n_cells()) {
      total += event.duration_us;
      ++count;
    }
  }
  const double mean = count ? total / static_cast<double>(count) : 0.0;
  const std::size_t field_bytes = mesh.n_cells() * sizeof(double);
  const std::size_t pages = (field_bytes + config.page_bytes - 1) / config.page_bytes;
  return factor * mean / static_cast<double>(pages);
}

BenchReport run_benchmark(const RunConfig& config) {
  config.validate();
  BenchReport report;
  report.config = config;
  report.cost_per_page_us = config.cost_per_page_us
                                ? *config.cost_per_page_us
                                : calibrate_cost_per_page(config, config.migration_cost_factor);

  const Mesh mesh = build_structured_mesh(config.nx, config.ny, 1.0, 1.0);
  SimpleControls controls = config.controls();
  controls.validate();
  const ExecPolicy policy = config.policy();

  double migration_us = 0.0;
  double compute_us = 0.0;
  std::vector<TraceEvent> last_trace;
  bool have_history = false;

  for (std::size_t rep = 0; rep < config.repeats; ++rep) {
    PoolAllocator pool(config.pool_threshold, config.pool_enabled);
    ResidencyLedger ledger(config.mode, config.page_bytes, report.cost_per_page_us);
    Executor exec(policy, &ledger);
    std::vector<StepRecord> history;
    try {
      SimpleState state(mesh, &pool);
      for (std::size_t w = 0; w < config.n_warmup; ++w) {
        simple_outer_iteration(state, mesh, controls, exec);
      }
      exec.clear_trace();
      exec.reset_counts();

      double elapsed = 0.0;
      for (std::size_t step = 0; step < config.n_steps; ++step) {
        const PoolStats before = pool.stats();
        const auto t0 = std::chrono::steady_clock::now();
        const IterationReport it = simple_outer_iteration(state, mesh, controls, exec);
        const auto t1 = std::chrono::steady_clock::now();
        elapsed += std::chrono::duration<double>(t1 - t0).count();
        const PoolStats& after = pool.stats();
        StepRecord rec;
        rec.step = step + 1;
        rec.momentum_u = it.momentum.u.initial_residual;
        rec.momentum_v = it.momentum.v.initial_residual;
        rec.pressure = it.pressure.initial_residual;
        rec.continuity = it.continuity_error;
        rec.momentum_u_iters = it.momentum.u.n_iterations;
        rec.momentum_v_iters = it.momentum.v.n_iterations;
        rec.pressure_iters = it.pressure.n_iterations;
        rec.fresh_allocations = after.fresh_allocations - before.fresh_allocations;
        rec.pool_misses = after.misses - before.misses;
        history.push_back(rec);
      }
      report.repeat_foms.push_back(elapsed / static_cast<double>(config.n_steps));
    } catch (const std::exception& e) {
      report.failures.push_back("repeat " + std::to_string(rep + 1) + ": " + e.what());
      continue;
    }

    const MigrationProfile profile = profile_summary(ledger, exec.trace());
    migration_us += profile.migration_us;
    compute_us += profile.compute_us;
    if (!have_history) {
      report.residual_history = std::move(history);
      have_history = true;
    }
    report.pool_stats = pool.stats();
    report.lane_event_counts = exec.lane_counts();
    last_trace.assign(exec.trace().begin(), exec.trace().end());
  }

  if (!report.repeat_foms.empty()) {
    report.fom_seconds_per_step =
        std::accumulate(report.repeat_foms.begin(), report.repeat_foms.end(), 0.0) /
        static_cast<double>(report.repeat_foms.size());
  }
  report.migration_profile = make_profile(migration_us, compute_us);

  if (!config.baseline_report.empty()) {
    const BenchReport baseline = read_report(config.baseline_report);
    report.speedup_vs_baseline = compare_reports(report, baseline);
  }
  if (!config.trace_path.empty()) {
    std::ofstream out(config.trace_path);
    if (!out) throw ConfigError("cannot write trace file '" + config.trace_path + "'");
    write_chrome_trace(out, last_trace);
  }
  if (!config.report_path.empty()) {
    write_report(report, config.report_path);
  }
  return report;
}

double compare_reports(const BenchReport& a, const BenchReport& b) {
  if (a.config.nx != b.config.nx || a.config.ny != b.config.ny ||
      a.config.n_steps != b.config.n_steps) {
    throw ComparisonError("reports cover different cases (" + std::to_string(a.config.nx) + "x" +
                          std::to_string(a.config.ny) + ", " + std::to_string(a.config.n_steps) +
                          " steps vs " + std::to_string(b.config.nx) + "x" +
                          std::to_string(b.config.ny) + ", " + std::to_string(b.config.n_steps) +
                          " steps)");
  }
  if (!(a.fom_seconds_per_step > 0.0) || !(b.fom_seconds_per_step > 0.0)) {
    throw ComparisonError("report has no valid FOM");
  }
  return b.fom_seconds_per_step / a.fom_seconds_per_step;
}

// Serialization -------------------------------------------------------------

namespace {

json config_to_json(const RunConfig& config) {
  json j = json::object();
  for (const auto& spec : key_specs()) j[spec.name] = spec.get(config);
  return j;
}

RunConfig config_from_json(const json& j) {
  RunConfig config;
  for (const auto& [key, value] : j.items()) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError("report config: unknown key '" + key + "'");
    spec->set(config, value.get<std::string>());
  }
  return config;
}

}  // namespace

std::string report_to_json(const BenchReport& r) {
  json history = json::array();
  for (const auto& s : r.residual_history) {
    history.push_back({{"step", s.step},
                       {"momentum_u", s.momentum_u},
                       {"momentum_v", s.momentum_v},
                       {"pressure", s.pressure},
                       {"continuity", s.continuity},
                       {"momentum_u_iters", s.momentum_u_iters},
                       {"momentum_v_iters", s.momentum_v_iters},
                       {"pressure_iters", s.pressure_iters},
                       {"fresh_allocations", s.fresh_allocations},
                       {"pool_misses", s.pool_misses}});
  }
  json j = {
      {"fom_seconds_per_step", r.fom_seconds_per_step},
      {"repeat_foms", r.repeat_foms},
      {"residual_history", std::move(history)},
      {"migration_profile",
       {{"migration_us", r.migration_profile.migration_us},
        {"compute_us", r.migration_profile.compute_us},
        {"migration_fraction", r.migration_profile.migration_fraction}}},
      {"pool_stats",
       {{"acquires", r.pool_stats.acquires},
        {"hits", r.pool_stats.hits},
        {"misses", r.pool_stats.misses},
        {"releases", r.pool_stats.releases},
        {"fresh_allocations", r.pool_stats.fresh_allocations},
        {"peak_bytes", r.pool_stats.peak_bytes}}},
      {"lane_event_counts",
       {{"serial", r.lane_event_counts.serial},
        {"parallel", r.lane_event_counts.parallel},
        {"pinned", r.lane_event_counts.pinned}}},
      {"cost_per_page_us", r.cost_per_page_us},
      {"config", config_to_json(r.config)},
      {"failures", r.failures},
  };
  j["speedup_vs_baseline"] = r.speedup_vs_baseline ? json(*r.speedup_vs_baseline) : json(nullptr);
  return j.dump(2);
}

BenchReport report_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("report: ") + e.what(), 0);
  }
  BenchReport r;
  try {
    r.fom_seconds_per_step = j.at("fom_seconds_per_step").get<double>();
    r.repeat_foms = j.at("repeat_foms").get<std::vector<double>>();
    for (const auto& s : j.at("residual_history")) {
      StepRecord rec;
      rec.step = s.at("step").get<std::size_t>();
      rec.momentum_u = s.at("momentum_u").get<double>();
      rec.momentum_v = s.at("momentum_v").get<double>();
      rec.pressure = s.at("pressure").get<double>();
      rec.continuity = s.at("continuity").get<double>();
      rec.momentum_u_iters = s.at("momentum_u_iters").get<std::size_t>();
      rec.momentum_v_iters = s.at("momentum_v_iters").get<std::size_t>();
      rec.pressure_iters = s.at("pressure_iters").get<std::size_t>();
      rec.fresh_allocations = s.at("fresh_allocations").get<std::size_t>();
      rec.pool_misses = s.at("pool_misses").get<std::size_t>();
      r.residual_history.push_back(rec);
    }
    const auto& mp = j.at("migration_profile");
    r.migration_profile.migration_us = mp.at("migration_us").get<double>();
    r.migration_profile.compute_us = mp.at("compute_us").get<double>();
    r.migration_profile.migration_fraction = mp.at("migration_fraction").get<double>();
    const auto& ps = j.at("pool_stats");
    r.pool_stats.acquires = ps.at("acquires").get<std::size_t>();
    r.pool_stats.hits = ps.at("hits").get<std::size_t>();
    r.pool_stats.misses = ps.at("misses").get<std::size_t>();
    r.pool_stats.releases = ps.at("releases").get<std::size_t>();
    r.pool_stats.fresh_allocations = ps.at("fresh_allocations").get<std::size_t>();
    r.pool_stats.peak_bytes = ps.at("peak_bytes").get<std::size_t>();
    const auto& lc = j.at("lane_event_counts");
    r.lane_event_counts.serial = lc.at("serial").get<std::size_t>();
    r.lane_event_counts.parallel = lc.at("parallel").get<std::size_t>();
    r.lane_event_counts.pinned = lc.at("pinned").get<std::size_t>();
    r.cost_per_page_us = j.at("cost_per_page_us").get<double>();
    r.config = config_from_json(j.at("config"));
    r.failures = j.at("failures").get<std::vector<std::string>>();
    if (j.contains("speedup_vs_baseline") && !j.at("speedup_vs_baseline").is_null()) {
      r.speedup_vs_baseline = j.at("speedup_vs_baseline").get<double>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what(), 0);
  }
  return r;
}

void write_report(const BenchReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write report file '" + path.string() + "'");
  out << report_to_json(report) << '\n';
}

BenchReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open report file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return report_from_json(buffer.str());
}

}  // namespace apuflow
