#include "apuflow/field.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "apuflow/errors.hpp"

namespace apuflow {

Field::Field(std::size_t n, std::string label, PoolAllocator* pool, double value)
    : label_(std::move(label)), pool_(pool) {
  allocate(n);
  std::fill_n(data_, size_, value);
}

Field::Field(std::initializer_list<double> values, std::string label) : label_(std::move(label)) {
  allocate(values.size());
  std::copy(values.begin(), values.end(), data_);
}

Field::Field(const Field& other) : label_(other.label_), pool_(other.pool_) {
  allocate(other.size_);
  std::copy_n(other.data_, size_, data_);
}

Field& Field::operator=(const Field& other) {
  if (this == &other) return *this;
  if (size_ != other.size_ || pool_ != other.pool_) {
    free();
    pool_ = other.pool_;
    allocate(other.size_);
  }
  label_ = other.label_;
  std::copy_n(other.data_, size_, data_);
  return *this;
}

Field::Field(Field&& other) noexcept
    : label_(std::move(other.label_)),
      pool_(std::exchange(other.pool_, nullptr)),
      handle_(std::exchange(other.handle_, {})),
      data_(std::exchange(other.data_, nullptr)),
      owned_(std::move(other.owned_)),
      size_(std::exchange(other.size_, 0)) {}

Field& Field::operator=(Field&& other) noexcept {
  if (this == &other) return *this;
  free();
  label_ = std::move(other.label_);
  pool_ = std::exchange(other.pool_, nullptr);
  handle_ = std::exchange(other.handle_, {});
  data_ = std::exchange(other.data_, nullptr);
  owned_ = std::move(other.owned_);
  size_ = std::exchange(other.size_, 0);
  return *this;
}

Field::~Field() { free(); }

void Field::allocate(std::size_t n) {
  size_ = n;
  if (n == 0) {
    handle_ = {};
    data_ = nullptr;
    return;
  }
  if (pool_) {
    auto block = pool_->acquire(n, sizeof(double));
    handle_ = block.handle;
    data_ = reinterpret_cast<double*>(block.data);
  } else {
    owned_ = std::make_unique<double[]>(n);
    data_ = owned_.get();
    handle_ = BufferHandle{next_buffer_id(), n, sizeof(double), false};
  }
}

void Field::free() noexcept {
  if (pool_ && data_) {
    pool_->release(handle_);
  }
  owned_.reset();
  data_ = nullptr;
  size_ = 0;
  handle_ = {};
}

std::string_view to_string(UpdateOp op) {
  switch (op) {
    case UpdateOp::Assign:
      return "=";
    case UpdateOp::Add:
      return "+=";
    case UpdateOp::Sub:
      return "-=";
    case UpdateOp::Mul:
      return "*=";
  }
  return "?";
}

std::string_view to_string(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add:
      return "+";
    case BinaryOp::Sub:
      return "-";
    case BinaryOp::Mul:
      return "*";
  }
  return "?";
}

void check_finite(const Field& f, std::string_view context) {
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) {
      throw DomainError(std::string(context) + ": non-finite value in '" + f.label() +
                        "' at index " + std::to_string(i));
    }
  }
}

namespace {

#ifndef NDEBUG
constexpr bool kCheckFinite = true;
#else
constexpr bool kCheckFinite = false;
#endif

template <UpdateOp Op>
inline void update(double& lhs, double rhs) {
  if constexpr (Op == UpdateOp::Assign) {
    lhs = rhs;
  } else if constexpr (Op == UpdateOp::Add) {
    lhs += rhs;
  } else if constexpr (Op == UpdateOp::Sub) {
    lhs -= rhs;
  } else {
    lhs *= rhs;
  }
}

template <BinaryOp Op>
inline double combine(double a, double b) {
  if constexpr (Op == BinaryOp::Add) {
    return a + b;
  } else if constexpr (Op == BinaryOp::Sub) {
    return a - b;
  } else {
    return a * b;
  }
}

template <UpdateOp Op1, BinaryOp Op2>
RangeKernel ternary_body(double* f1, const double* f2, const double* f3) {
  return [=](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      update<Op1>(f1[i], combine<Op2>(f2[i], f3[i]));
    }
  };
}

template <UpdateOp Op1>
RangeKernel ternary_body(BinaryOp op2, double* f1, const double* f2, const double* f3) {
  switch (op2) {
    case BinaryOp::Add:
      return ternary_body<Op1, BinaryOp::Add>(f1, f2, f3);
    case BinaryOp::Sub:
      return ternary_body<Op1, BinaryOp::Sub>(f1, f2, f3);
    case BinaryOp::Mul:
      return ternary_body<Op1, BinaryOp::Mul>(f1, f2, f3);
  }
  return {};
}

RangeKernel ternary_body(UpdateOp op1, BinaryOp op2, double* f1, const double* f2,
                         const double* f3) {
  switch (op1) {
    case UpdateOp::Assign:
      return ternary_body<UpdateOp::Assign>(op2, f1, f2, f3);
    case UpdateOp::Add:
      return ternary_body<UpdateOp::Add>(op2, f1, f2, f3);
    case UpdateOp::Sub:
      return ternary_body<UpdateOp::Sub>(op2, f1, f2, f3);
    case UpdateOp::Mul:
      return ternary_body<UpdateOp::Mul>(op2, f1, f2, f3);
  }
  return {};
}

template <UpdateOp Op>
RangeKernel binary_body(double* f1, const double* f2) {
  return [=](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      update<Op>(f1[i], f2[i]);
    }
  };
}

RangeKernel binary_body(UpdateOp op, double* f1, const double* f2) {
  switch (op) {
    case UpdateOp::Assign:
      return binary_body<UpdateOp::Assign>(f1, f2);
    case UpdateOp::Add:
      return binary_body<UpdateOp::Add>(f1, f2);
    case UpdateOp::Sub:
      return binary_body<UpdateOp::Sub>(f1, f2);
    case UpdateOp::Mul:
      return binary_body<UpdateOp::Mul>(f1, f2);
  }
  return {};
}

}  // namespace

TraceEvent elementwise_ternary(Field& f1, UpdateOp op1, const Field& f2, BinaryOp op2,
                               const Field& f3, Executor& exec) {
  const std::string op = "f1 " + std::string(to_string(op1)) + " f2 " +
                         std::string(to_string(op2)) + " f3";
  if (f1.size() != f2.size() || f1.size() != f3.size()) {
    throw FieldSizeError(op + ": field sizes differ (" + std::to_string(f1.size()) + ", " +
                         std::to_string(f2.size()) + ", " + std::to_string(f3.size()) + ")");
  }
  if (&f1 == &f2 || &f1 == &f3) {
    throw UsageError(op + ": f1 must not alias f2 or f3");
  }
  const std::array buffers{f1.handle(), f2.handle(), f3.handle()};
  auto event = exec.run_kernel("TFOR_ALL " + op, f1.size(), buffers,
                               ternary_body(op1, op2, f1.data(), f2.data(), f3.data()));
  if constexpr (kCheckFinite) check_finite(f1, op);
  return event;
}

TraceEvent elementwise_binary(Field& f1, UpdateOp op, const Field& f2, Executor& exec) {
  const std::string name = "f1 " + std::string(to_string(op)) + " f2";
  if (f1.size() != f2.size()) {
    throw FieldSizeError(name + ": field sizes differ (" + std::to_string(f1.size()) + ", " +
                         std::to_string(f2.size()) + ")");
  }
  if (&f1 == &f2) {
    throw UsageError(name + ": f1 must not alias f2");
  }
  const std::array buffers{f1.handle(), f2.handle()};
  auto event = exec.run_kernel("TFOR_ALL " + name, f1.size(), buffers,
                               binary_body(op, f1.data(), f2.data()));
  if constexpr (kCheckFinite) check_finite(f1, name);
  return event;
}

TraceEvent axpy(double a, const Field& x, Field& y, Executor& exec) {
  if (x.size() != y.size()) {
    throw FieldSizeError("axpy: field sizes differ (" + std::to_string(x.size()) + ", " +
                         std::to_string(y.size()) + ")");
  }
  const double* xp = x.data();
  double* yp = y.data();
  const std::array buffers{x.handle(), y.handle()};
  auto event = exec.run_kernel("axpy", y.size(), buffers, [=](Index begin, Index end) {
    for (Index i = begin; i < end; ++i) {
      yp[i] = yp[i] + a * xp[i];
    }
  });
  if constexpr (kCheckFinite) check_finite(y, "axpy");
  return event;
}

TraceEvent fill(Field& f, double value, Executor& exec) {
  double* p = f.data();
  const std::array buffers{f.handle()};
  return exec.run_kernel("fill", f.size(), buffers, [=](Index begin, Index end) {
    std::fill(p + begin, p + end, value);
  });
}

double reduce_sum_abs(const Field& f, Executor& exec) {
  if (f.empty()) {
    throw DomainError("reduce_sum_abs: empty field");
  }
  const double* p = f.data();
  const std::array buffers{f.handle()};
  return exec.run_reduction("sumMag", f.size(), buffers, [=](Index begin, Index end) {
    double s = 0.0;
    for (Index i = begin; i < end; ++i) s += std::abs(p[i]);
    return s;
  });
}

double reduce_sum(const Field& f, Executor& exec) {
  if (f.empty()) {
    throw DomainError("reduce_sum: empty field");
  }
  const double* p = f.data();
  const std::array buffers{f.handle()};
  return exec.run_reduction("sum", f.size(), buffers, [=](Index begin, Index end) {
    double s = 0.0;
    for (Index i = begin; i < end; ++i) s += p[i];
    return s;
  });
}

double reduce_dot(const Field& a, const Field& b, Executor& exec) {
  if (a.size() != b.size()) {
    throw FieldSizeError("sumProd: field sizes differ (" + std::to_string(a.size()) + ", " +
                         std::to_string(b.size()) + ")");
  }
  if (a.empty()) {
    throw DomainError("sumProd: empty field");
  }
  const double* ap = a.data();
  const double* bp = b.data();
  const std::array buffers{a.handle(), b.handle()};
  return exec.run_reduction("sumProd", a.size(), buffers, [=](Index begin, Index end) {
    double s = 0.0;
    for (Index i = begin; i < end; ++i) s += ap[i] * bp[i];
    return s;
  });
}

}  // namespace apuflow
