#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "apuflow/core.hpp"
#include "apuflow/exec.hpp"
#include "apuflow/memmodel.hpp"

namespace apuflow {

/// Flat array of doubles over mesh cells or faces. Storage comes from a
/// PoolAllocator when one is given, otherwise from the heap. The length is
/// fixed at construction; copies allocate from the same source.
class Field {
 public:
  Field() = default;
  Field(std::size_t n, std::string label, PoolAllocator* pool = nullptr, double value = 0.0);
  Field(std::initializer_list<double> values, std::string label = "field");

  Field(const Field& other);
  Field& operator=(const Field& other);
  Field(Field&& other) noexcept;
  Field& operator=(Field&& other) noexcept;
  ~Field();

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }
  const std::string& label() const noexcept { return label_; }
  const BufferHandle& handle() const noexcept { return handle_; }
  PoolAllocator* pool() const noexcept { return pool_; }

  std::span<double> values() noexcept { return {data_, size_}; }
  std::span<const double> values() const noexcept { return {data_, size_}; }
  double* data() noexcept { return data_; }
  const double* data() const noexcept { return data_; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

 private:
  void allocate(std::size_t n);
  void free() noexcept;

  std::string label_;
  PoolAllocator* pool_ = nullptr;
  BufferHandle handle_;
  double* data_ = nullptr;
  std::unique_ptr<double[]> owned_;
  std::size_t size_ = 0;
};

enum class UpdateOp { Assign, Add, Sub, Mul };
enum class BinaryOp { Add, Sub, Mul };

std::string_view to_string(UpdateOp op);
std::string_view to_string(BinaryOp op);

/// f1[i] op1 (f2[i] op2 f3[i]) for every i, dispatched by the executor.
/// Throws FieldSizeError on a length mismatch (the message carries the
/// operation) and UsageError when f1 aliases f2 or f3.
TraceEvent elementwise_ternary(Field& f1, UpdateOp op1, const Field& f2, BinaryOp op2,
                               const Field& f3, Executor& exec);

/// f1[i] op f2[i].
TraceEvent elementwise_binary(Field& f1, UpdateOp op, const Field& f2, Executor& exec);

/// y[i] += a * x[i].
TraceEvent axpy(double a, const Field& x, Field& y, Executor& exec);

TraceEvent fill(Field& f, double value, Executor& exec);

/// Sum of |f[i]|. Throws DomainError for an empty field.
double reduce_sum_abs(const Field& f, Executor& exec);
double reduce_sum(const Field& f, Executor& exec);
double reduce_dot(const Field& a, const Field& b, Executor& exec);

/// Throws DomainError naming the field when any value is NaN or infinite.
void check_finite(const Field& f, std::string_view context);

}  // namespace apuflow
