#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <iosfwd>
#include <limits>
#include <mutex>
#include <span>
#include <string_view>
#include <thread>
#include <vector>

#include "apuflow/core.hpp"
#include "apuflow/memmodel.hpp"

namespace apuflow {

/// Dispatch configuration. A loop goes to the Parallel lane iff its length
/// is strictly greater than `cutoff`.
struct ExecPolicy {
  static constexpr std::size_t kNeverOffload = std::numeric_limits<std::size_t>::max();
  static constexpr std::size_t kDefaultCutoff = 10000;

  std::size_t cutoff = kDefaultCutoff;
  MemoryMode mode = MemoryMode::Unified;
  unsigned parallel_width = 1;
  bool trace_enabled = true;
  // Spin for each charged migration so wall-clock timings include it.
  bool simulated_delay = false;

  /// Throws ConfigError when parallel_width is 0.
  void validate() const;
};

Lane select_lane(std::size_t loop_len, const ExecPolicy& policy) noexcept;

/// Kernel body over a half-open index range. Must write only indices in
/// its own range.
using RangeKernel = std::function<void(Index begin, Index end)>;
/// Partial sum over a half-open index range.
using ChunkReduction = std::function<double(Index begin, Index end)>;

/// Fixed set of worker threads with static task assignment. The calling
/// thread acts as worker 0.
class WorkerPool {
 public:
  explicit WorkerPool(unsigned width);
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;
  ~WorkerPool();

  unsigned width() const noexcept { return width_; }

  /// Runs task(w) for every w in [0, width). Rethrows the first exception
  /// raised by any task after all tasks finished.
  void run(const std::function<void(unsigned)>& task);

 private:
  void worker_loop(unsigned rank);

  unsigned width_;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(unsigned)>* task_ = nullptr;
  std::size_t generation_ = 0;
  unsigned pending_ = 0;
  bool stopping_ = false;
  std::exception_ptr error_;
};

struct LaneCounts {
  std::size_t serial = 0;
  std::size_t parallel = 0;
  std::size_t pinned = 0;
};

/// Runs kernels one at a time on the lane picked by the policy, charges
/// buffer migrations through the ledger and records trace events.
class Executor {
 public:
  static constexpr std::size_t kReductionChunk = 4096;

  explicit Executor(ExecPolicy policy = {}, ResidencyLedger* ledger = nullptr);

  const ExecPolicy& policy() const noexcept { return policy_; }
  ResidencyLedger* ledger() const noexcept { return ledger_; }

  TraceEvent run_kernel(std::string_view name, std::size_t loop_len,
                        std::span<const BufferHandle> buffers, const RangeKernel& body,
                        KernelCategory category = KernelCategory::Compute);

  /// Same as run_kernel but on a fixed lane, for work that is sequential by
  /// construction (recurrences, face scatters).
  TraceEvent run_pinned(std::string_view name, std::size_t loop_len, Lane lane,
                        std::span<const BufferHandle> buffers, const RangeKernel& body,
                        KernelCategory category = KernelCategory::Compute);

  /// Sum of partial(chunk) over fixed 4096-element chunks, combined in
  /// chunk order. The result does not depend on the lane or worker count.
  double run_reduction(std::string_view name, std::size_t loop_len,
                       std::span<const BufferHandle> buffers, const ChunkReduction& partial,
                       KernelCategory category = KernelCategory::Compute);

  std::span<const TraceEvent> trace() const noexcept { return trace_; }
  void clear_trace() { trace_.clear(); }
  const LaneCounts& lane_counts() const noexcept { return counts_; }
  void reset_counts() noexcept { counts_ = {}; }

  /// Microseconds since the executor was created.
  double now_us() const;

 private:
  TraceEvent execute(std::string_view name, std::size_t loop_len, Lane lane, bool pinned,
                     std::span<const BufferHandle> buffers, const std::function<void()>& work,
                     KernelCategory category);
  void for_range(Lane lane, std::size_t loop_len, const RangeKernel& body);

  ExecPolicy policy_;
  ResidencyLedger* ledger_;
  WorkerPool workers_;
  std::chrono::steady_clock::time_point origin_;
  std::vector<TraceEvent> trace_;
  LaneCounts counts_;
};

/// Chrome trace-event JSON ({"traceEvents": [...]}, complete events).
void write_chrome_trace(std::ostream& out, std::span<const TraceEvent> trace);

}  // namespace apuflow
