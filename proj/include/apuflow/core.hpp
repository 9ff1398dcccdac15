#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace apuflow {

using Index = std::size_t;

/// Execution lane. Serial stands in for a single host thread, Parallel for
/// the offload target.
enum class Lane { Serial, Parallel };

/// Memory model of the simulated platform. Unified: host and device share
/// physical memory, no page ever moves. Discrete: pages migrate on a lane
/// switch.
enum class MemoryMode { Unified, Discrete };

enum class KernelCategory { Compute, Migration, Solve, Assembly };

/// One executed kernel, as it appears on the timeline.
struct TraceEvent {
  std::string kernel_name;
  Lane lane = Lane::Serial;
  std::size_t loop_len = 0;
  double t_start_us = 0.0;
  double duration_us = 0.0;
  double migration_us = 0.0;
  KernelCategory category = KernelCategory::Compute;
  // True when the lane was fixed by the kernel (sequential sweeps, scatter
  // assembly) instead of chosen by the cutoff.
  bool pinned = false;
};

std::string_view to_string(Lane lane);
std::string_view to_string(MemoryMode mode);
std::string_view to_string(KernelCategory category);

MemoryMode parse_memory_mode(std::string_view text);

}  // namespace apuflow
