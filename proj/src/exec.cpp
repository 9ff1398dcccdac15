#include "apuflow/exec.hpp"

#include <algorithm>
#include <ostream>
#include <string>

#include <json.hpp>

#include "apuflow/errors.hpp"

namespace apuflow {

std::string_view to_string(Lane lane) {
  return lane == Lane::Serial ? "serial" : "parallel";
}

std::string_view to_string(MemoryMode mode) {
  return mode == MemoryMode::Unified ? "unified" : "discrete";
}

std::string_view to_string(KernelCategory category) {
  switch (category) {
    case KernelCategory::Compute:
      return "compute";
    case KernelCategory::Migration:
      return "migration";
    case KernelCategory::Solve:
      return "solve";
    case KernelCategory::Assembly:
      return "assembly";
  }
  return "unknown";
}

MemoryMode parse_memory_mode(std::string_view text) {
  if (text == "unified") return MemoryMode::Unified;
  if (text == "discrete") return MemoryMode::Discrete;
  throw ConfigError("unknown memory mode '" + std::string(text) + "' (expected unified|discrete)");
}

void ExecPolicy::validate() const {
  if (parallel_width < 1) {
    throw ConfigError("parallel_width must be at least 1");
  }
}

Lane select_lane(std::size_t loop_len, const ExecPolicy& policy) noexcept {
  return loop_len > policy.cutoff ? Lane::Parallel : Lane::Serial;
}

// WorkerPool ---------------------------------------------------------------

WorkerPool::WorkerPool(unsigned width) : width_(std::max(width, 1u)) {
  threads_.reserve(width_ - 1);
  for (unsigned rank = 1; rank < width_; ++rank) {
    threads_.emplace_back([this, rank] { worker_loop(rank); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  start_cv_.notify_all();
  for (auto& t : threads_) {
    t.join();
  }
}

void WorkerPool::worker_loop(unsigned rank) {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(unsigned)>* task = nullptr;
    {
      std::unique_lock lock(mutex_);
      start_cv_.wait(lock, [&] { return stopping_ || generation_ != seen; });
      if (stopping_) return;
      seen = generation_;
      task = task_;
    }
    std::exception_ptr error;
    try {
      (*task)(rank);
    } catch (...) {
      error = std::current_exception();
    }
    {
      std::lock_guard lock(mutex_);
      if (error && !error_) error_ = error;
      if (--pending_ == 0) done_cv_.notify_one();
    }
  }
}

void WorkerPool::run(const std::function<void(unsigned)>& task) {
  if (width_ == 1) {
    task(0);
    return;
  }
  {
    std::lock_guard lock(mutex_);
    task_ = &task;
    pending_ = width_ - 1;
    error_ = nullptr;
    ++generation_;
  }
  start_cv_.notify_all();
  std::exception_ptr own;
  try {
    task(0);
  } catch (...) {
    own = std::current_exception();
  }
  std::unique_lock lock(mutex_);
  done_cv_.wait(lock, [&] { return pending_ == 0; });
  task_ = nullptr;
  if (own) std::rethrow_exception(own);
  if (error_) std::rethrow_exception(error_);
}

// Executor -----------------------------------------------------------------

namespace {

void spin_for_us(double us) {
  const auto until = std::chrono::steady_clock::now() +
                     std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                         std::chrono::duration<double, std::micro>(us));
  while (std::chrono::steady_clock::now() < until) {
  }
}

std::pair<std::size_t, std::size_t> static_block(std::size_t n, unsigned parts, unsigned rank) {
  const std::size_t begin = n * rank / parts;
  const std::size_t end = n * (rank + 1) / parts;
  return {begin, end};
}

}  // namespace

Executor::Executor(ExecPolicy policy, ResidencyLedger* ledger)
    : policy_((policy.validate(), policy)),
      ledger_(ledger),
      workers_(policy.parallel_width),
      origin_(std::chrono::steady_clock::now()) {
  if (ledger_ && ledger_->mode() != policy_.mode) {
    throw ConfigError("ledger memory mode does not match the execution policy");
  }
}

double Executor::now_us() const {
  return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - origin_)
      .count();
}

void Executor::for_range(Lane lane, std::size_t loop_len, const RangeKernel& body) {
  if (loop_len == 0) return;
  if (lane == Lane::Serial || workers_.width() == 1) {
    body(0, loop_len);
    return;
  }
  const unsigned parts = workers_.width();
  workers_.run([&](unsigned rank) {
    auto [begin, end] = static_block(loop_len, parts, rank);
    if (begin < end) body(begin, end);
  });
}

TraceEvent Executor::execute(std::string_view name, std::size_t loop_len, Lane lane, bool pinned,
                             std::span<const BufferHandle> buffers,
                             const std::function<void()>& work, KernelCategory category) {
  TraceEvent event;
  event.kernel_name = std::string(name);
  event.lane = lane;
  event.loop_len = loop_len;
  event.category = category;
  event.pinned = pinned;

  if (ledger_) {
    for (const auto& buffer : buffers) {
      event.migration_us += ledger_->touch(buffer, lane);
    }
  }
  if (policy_.mode == MemoryMode::Unified) {
    event.migration_us = 0.0;
  }
  if (policy_.simulated_delay && event.migration_us > 0.0) {
    spin_for_us(event.migration_us);
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    work();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw KernelError(event.kernel_name, e.what());
  }
  const auto stop = std::chrono::steady_clock::now();
  event.t_start_us = std::chrono::duration<double, std::micro>(start - origin_).count();
  event.duration_us = std::max(0.0, std::chrono::duration<double, std::micro>(stop - start).count());

  if (ledger_) ledger_->add_compute(event.duration_us);
  if (pinned) {
    ++counts_.pinned;
  } else if (lane == Lane::Parallel) {
    ++counts_.parallel;
  } else {
    ++counts_.serial;
  }
  if (policy_.trace_enabled) trace_.push_back(event);
  return event;
}

TraceEvent Executor::run_kernel(std::string_view name, std::size_t loop_len,
                                std::span<const BufferHandle> buffers, const RangeKernel& body,
                                KernelCategory category) {
  const Lane lane = select_lane(loop_len, policy_);
  return execute(name, loop_len, lane, false, buffers, [&] { for_range(lane, loop_len, body); },
                 category);
}

TraceEvent Executor::run_pinned(std::string_view name, std::size_t loop_len, Lane lane,
                                std::span<const BufferHandle> buffers, const RangeKernel& body,
                                KernelCategory category) {
  return execute(name, loop_len, lane, true, buffers, [&] { for_range(lane, loop_len, body); },
                 category);
}

double Executor::run_reduction(std::string_view name, std::size_t loop_len,
                               std::span<const BufferHandle> buffers,
                               const ChunkReduction& partial, KernelCategory category) {
  const Lane lane = select_lane(loop_len, policy_);
  const std::size_t n_chunks = (loop_len + kReductionChunk - 1) / kReductionChunk;
  std::vector<double> partials(n_chunks, 0.0);
  auto chunk_range = [&](std::size_t first, std::size_t last) {
    for (std::size_t k = first; k < last; ++k) {
      const std::size_t begin = k * kReductionChunk;
      partials[k] = partial(begin, std::min(loop_len, begin + kReductionChunk));
    }
  };
  execute(name, loop_len, lane, false, buffers,
          [&] {
            if (lane == Lane::Serial || workers_.width() == 1) {
              chunk_range(0, n_chunks);
            } else {
              const unsigned parts = workers_.width();
              workers_.run([&](unsigned rank) {
                auto [first, last] = static_block(n_chunks, parts, rank);
                chunk_range(first, last);
              });
            }
          },
          category);
  double sum = 0.0;
  for (double p : partials) sum += p;
  return sum;
}

void write_chrome_trace(std::ostream& out, std::span<const TraceEvent> trace) {
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : trace) {
    events.push_back({
        {"name", e.kernel_name},
        {"cat", std::string(to_string(e.category))},
        {"ph", "X"},
        {"ts", e.t_start_us},
        {"dur", e.duration_us},
        {"pid", 1},
        {"tid", e.lane == Lane::Serial ? 1 : 2},
        {"args", {{"loop_len", e.loop_len}, {"migration_us", e.migration_us}, {"pinned", e.pinned}}},
    });
  }
  nlohmann::json doc = {{"traceEvents", std::move(events)}, {"displayTimeUnit", "ms"}};
  out << doc.dump(1) << '\n';
}

}  // namespace apuflow
