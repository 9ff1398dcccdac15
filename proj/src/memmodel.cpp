#include "apuflow/memmodel.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <new>
#include <string>

#include "apuflow/errors.hpp"

namespace apuflow {

namespace {
constexpr std::align_val_t kAlignment{64};
}  // namespace

std::uint64_t next_buffer_id() noexcept {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

void PoolAllocator::AlignedDelete::operator()(std::byte* p) const noexcept {
  ::operator delete[](p, kAlignment);
}

PoolAllocator::PoolAllocator(std::size_t threshold, bool enabled)
    : threshold_(threshold), enabled_(enabled) {}

PoolAllocator::~PoolAllocator() = default;

std::size_t PoolAllocator::size_class(std::size_t bytes) noexcept {
  return std::bit_ceil(std::max<std::size_t>(bytes, 1));
}

PoolAllocator::Storage PoolAllocator::allocate(std::size_t bytes) {
  try {
    return Storage(static_cast<std::byte*>(::operator new[](bytes, kAlignment)));
  } catch (const std::bad_alloc&) {
    throw ResourceError("allocation of " + std::to_string(bytes) + " bytes failed");
  }
}

void PoolAllocator::note_bytes() {
  stats_.peak_bytes = std::max(stats_.peak_bytes, live_bytes_);
}

PoolAllocator::Block PoolAllocator::acquire(std::size_t n_elems, std::size_t elem_bytes) {
  if (n_elems == 0) {
    throw DomainError("pool_acquire: n_elems must be at least 1");
  }
  if (elem_bytes == 0) {
    throw DomainError("pool_acquire: elem_bytes must be at least 1");
  }
  ++stats_.acquires;
  BufferHandle handle{next_buffer_id(), n_elems, elem_bytes, would_pool(n_elems)};
  const std::size_t bytes = handle.bytes();

  Outstanding entry;
  entry.pooled = handle.pooled;
  if (handle.pooled) {
    entry.size_class = size_class(bytes);
    auto& list = free_lists_[entry.size_class];
    if (!list.empty()) {
      ++stats_.hits;
      entry.storage = std::move(list.back());
      list.pop_back();
    } else {
      ++stats_.misses;
      ++stats_.fresh_allocations;
      entry.storage = allocate(entry.size_class);
      live_bytes_ += entry.size_class;
    }
  } else {
    entry.size_class = bytes;
    ++stats_.fresh_allocations;
    entry.storage = allocate(bytes);
    live_bytes_ += bytes;
  }
  note_bytes();
  std::byte* data = entry.storage.get();
  outstanding_.emplace(handle.id, std::move(entry));
  return {handle, data};
}

void PoolAllocator::release(const BufferHandle& handle) {
  auto it = outstanding_.find(handle.id);
  if (it == outstanding_.end()) {
    throw UsageError("pool_release: buffer " + std::to_string(handle.id) +
                     " is not outstanding (double release?)");
  }
  ++stats_.releases;
  Outstanding entry = std::move(it->second);
  outstanding_.erase(it);
  if (entry.pooled) {
    free_lists_[entry.size_class].push_back(std::move(entry.storage));
  } else {
    live_bytes_ -= entry.size_class;
  }
}

std::size_t PoolAllocator::free_blocks(std::size_t size_class) const {
  auto it = free_lists_.find(size_class);
  return it == free_lists_.end() ? 0 : it->second.size();
}

std::size_t PoolAllocator::free_blocks() const {
  std::size_t total = 0;
  for (const auto& [cls, list] : free_lists_) {
    total += list.size();
  }
  return total;
}

ResidencyLedger::ResidencyLedger(MemoryMode mode, std::size_t page_bytes, double cost_per_page_us)
    : mode_(mode), page_bytes_(page_bytes), cost_per_page_us_(cost_per_page_us) {
  if (page_bytes_ == 0) {
    throw ConfigError("page_bytes must be positive");
  }
  set_cost_per_page_us(cost_per_page_us);
}

void ResidencyLedger::set_cost_per_page_us(double us) {
  if (!(us >= 0.0) || !std::isfinite(us)) {
    throw ConfigError("cost_per_page_us must be a finite non-negative number");
  }
  cost_per_page_us_ = us;
}

std::size_t ResidencyLedger::pages(const BufferHandle& buffer) const noexcept {
  return (buffer.bytes() + page_bytes_ - 1) / page_bytes_;
}

double ResidencyLedger::touch(const BufferHandle& buffer, Lane lane) {
  if (mode_ == MemoryMode::Unified) {
    return 0.0;
  }
  auto [it, inserted] = residency_.try_emplace(buffer.id, lane);
  if (inserted || it->second == lane) {
    return 0.0;
  }
  it->second = lane;
  const std::size_t n_pages = pages(buffer);
  const double cost = static_cast<double>(n_pages) * cost_per_page_us_;
  totals_.migrated_pages += n_pages;
  totals_.migration_us += cost;
  ++totals_.migrations;
  return cost;
}

std::optional<Lane> ResidencyLedger::residency(std::uint64_t id) const {
  auto it = residency_.find(id);
  if (it == residency_.end()) {
    return std::nullopt;
  }
  return it->second;
}

MigrationProfile make_profile(double migration_us, double compute_us) noexcept {
  MigrationProfile profile{migration_us, compute_us, 0.0};
  const double total = migration_us + compute_us;
  if (total > 0.0) {
    profile.migration_fraction = std::clamp(migration_us / total, 0.0, 1.0);
  }
  return profile;
}

MigrationProfile profile_summary(const ResidencyLedger& ledger, std::span<const TraceEvent> trace) {
  double migration = 0.0;
  double compute = 0.0;
  for (const auto& event : trace) {
    migration += event.migration_us;
    compute += event.duration_us;
  }
  if (ledger.mode() == MemoryMode::Unified) {
    migration = 0.0;
  }
  return make_profile(migration, compute);
}

}  // namespace apuflow
