#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "apuflow/core.hpp"

namespace apuflow {

/// Identity and shape of one allocated buffer. Ids are unique per process.
struct BufferHandle {
  std::uint64_t id = 0;
  std::size_t n_elems = 0;
  std::size_t elem_bytes = 0;
  bool pooled = false;

  std::size_t bytes() const noexcept { return n_elems * elem_bytes; }
};

std::uint64_t next_buffer_id() noexcept;

struct PoolStats {
  std::size_t acquires = 0;
  std::size_t hits = 0;
  std::size_t misses = 0;
  std::size_t releases = 0;
  // Requests that reached the system allocator: misses plus every
  // non-pooled acquire.
  std::size_t fresh_allocations = 0;
  std::size_t peak_bytes = 0;
};

/// Size-classed buffer pool. Requests larger than `threshold` elements are
/// served from per-class free lists (classes are power-of-two byte sizes);
/// smaller ones bypass the pool. Released pooled blocks are retained for
/// reuse and only freed when the pool is destroyed.
class PoolAllocator {
 public:
  static constexpr std::size_t kDefaultThreshold = 5000;

  struct Block {
    BufferHandle handle;
    std::byte* data = nullptr;
  };

  explicit PoolAllocator(std::size_t threshold = kDefaultThreshold, bool enabled = true);
  PoolAllocator(const PoolAllocator&) = delete;
  PoolAllocator& operator=(const PoolAllocator&) = delete;
  ~PoolAllocator();

  /// Throws DomainError for n_elems == 0 and ResourceError when the system
  /// allocator fails.
  Block acquire(std::size_t n_elems, std::size_t elem_bytes);
  /// Throws UsageError when `handle` is not outstanding.
  void release(const BufferHandle& handle);

  bool would_pool(std::size_t n_elems) const noexcept { return enabled_ && n_elems > threshold_; }
  std::size_t threshold() const noexcept { return threshold_; }
  bool enabled() const noexcept { return enabled_; }
  const PoolStats& stats() const noexcept { return stats_; }
  std::size_t outstanding() const noexcept { return outstanding_.size(); }
  std::size_t free_blocks(std::size_t size_class) const;
  std::size_t free_blocks() const;

  static std::size_t size_class(std::size_t bytes) noexcept;

 private:
  struct AlignedDelete {
    void operator()(std::byte* p) const noexcept;
  };
  using Storage = std::unique_ptr<std::byte[], AlignedDelete>;
  struct Outstanding {
    Storage storage;
    std::size_t size_class;
    bool pooled;
  };

  Storage allocate(std::size_t bytes);
  void note_bytes();

  std::size_t threshold_;
  bool enabled_;
  PoolStats stats_;
  std::size_t live_bytes_ = 0;  // outstanding plus retained
  std::map<std::size_t, std::vector<Storage>> free_lists_;
  std::unordered_map<std::uint64_t, Outstanding> outstanding_;
};

struct MigrationTotals {
  double migration_us = 0.0;
  std::size_t migrated_pages = 0;
  std::size_t migrations = 0;
  double compute_us = 0.0;
};

/// Tracks which lane last touched each buffer and charges a page-transfer
/// cost when a buffer is used on the other lane. First touch is free. In
/// unified mode nothing is tracked and every touch costs zero.
class ResidencyLedger {
 public:
  explicit ResidencyLedger(MemoryMode mode = MemoryMode::Unified, std::size_t page_bytes = 4096,
                           double cost_per_page_us = 0.0);

  /// Returns the migration cost in microseconds for using `buffer` on `lane`.
  double touch(const BufferHandle& buffer, Lane lane);
  void add_compute(double us) noexcept { totals_.compute_us += us; }
  void forget(std::uint64_t id) { residency_.erase(id); }

  std::optional<Lane> residency(std::uint64_t id) const;
  std::size_t pages(const BufferHandle& buffer) const noexcept;

  MemoryMode mode() const noexcept { return mode_; }
  std::size_t page_bytes() const noexcept { return page_bytes_; }
  double cost_per_page_us() const noexcept { return cost_per_page_us_; }
  void set_cost_per_page_us(double us);
  const MigrationTotals& totals() const noexcept { return totals_; }

 private:
  MemoryMode mode_;
  std::size_t page_bytes_;
  double cost_per_page_us_;
  MigrationTotals totals_;
  std::unordered_map<std::uint64_t, Lane> residency_;
};

struct MigrationProfile {
  double migration_us = 0.0;
  double compute_us = 0.0;
  double migration_fraction = 0.0;
};

/// Share of kernel time spent moving pages, summed over a trace.
MigrationProfile profile_summary(const ResidencyLedger& ledger, std::span<const TraceEvent> trace);
MigrationProfile make_profile(double migration_us, double compute_us) noexcept;

}  // namespace apuflow
