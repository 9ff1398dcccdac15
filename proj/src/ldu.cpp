#include "apuflow/ldu.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "apuflow/errors.hpp"

namespace apuflow {

namespace {

constexpr double kSmall = 1e-300;

void require_size(const Field& f, std::size_t n, std::string_view what) {
  if (f.size() != n) {
    throw FieldSizeError(std::string(what) + ": expected " + std::to_string(n) + " values, got " +
                         std::to_string(f.size()));
  }
}

}  // namespace

LduMatrix::LduMatrix(const Mesh& mesh, PoolAllocator* pool)
    : mesh_(&mesh),
      diag_(mesh.n_cells(), "diag", pool),
      lower_(mesh.n_faces(), "lower", pool),
      upper_(mesh.n_faces(), "upper", pool) {}

bool LduMatrix::symmetric() const noexcept {
  for (std::size_t f = 0; f < n_faces(); ++f) {
    if (lower_[f] != upper_[f]) return false;
  }
  return true;
}

std::string_view to_string(PreconditionerKind kind) {
  switch (kind) {
    case PreconditionerKind::None:
      return "none";
    case PreconditionerKind::Diagonal:
      return "diagonal";
    case PreconditionerKind::DILU:
      return "DILU";
  }
  return "unknown";
}

void amul(const LduMatrix& a, const Field& x, Field& y, Executor& exec) {
  const std::size_t n = a.n_cells();
  require_size(x, n, "amul x");
  require_size(y, n, "amul y");
  const Mesh& mesh = a.mesh();
  const double* diag = a.diag().data();
  const double* lower = a.lower().data();
  const double* upper = a.upper().data();
  const Index* own = mesh.owner().data();
  const Index* nei = mesh.neighbour().data();
  const Index* own_start = mesh.owner_start().data();
  const Index* losort = mesh.losort().data();
  const Index* losort_start = mesh.losort_start().data();
  const double* xp = x.data();
  double* yp = y.data();
  const std::array buffers{a.diag().handle(), a.lower().handle(), a.upper().handle(), x.handle(),
                           y.handle()};
  exec.run_kernel(
      "Amul", n, buffers,
      [=](Index begin, Index end) {
        for (Index c = begin; c < end; ++c) {
          double s = diag[c] * xp[c];
          for (Index f = own_start[c]; f < own_start[c + 1]; ++f) {
            s += upper[f] * xp[nei[f]];
          }
          for (Index k = losort_start[c]; k < losort_start[c + 1]; ++k) {
            const Index f = losort[k];
            s += lower[f] * xp[own[f]];
          }
          yp[c] = s;
        }
      },
      KernelCategory::Solve);
}

Field amul(const LduMatrix& a, const Field& x, Executor& exec) {
  Field y(a.n_cells(), "Ax", x.pool());
  amul(a, x, y, exec);
  return y;
}

namespace {

// Normalisation given a precomputed A x.
double norm_factor_from(const LduMatrix& a, const Field& x, const Field& ax, const Field& b,
                        Executor& exec) {
  const std::size_t n = a.n_cells();
  const double xbar = reduce_sum(x, exec) / static_cast<double>(n);
  Field xref(n, "xRef", x.pool(), xbar);
  Field axref = amul(a, xref, exec);
  Field diff(n, "normDiff", x.pool());
  elementwise_ternary(diff, UpdateOp::Assign, ax, BinaryOp::Sub, axref, exec);
  double factor = reduce_sum_abs(diff, exec);
  elementwise_ternary(diff, UpdateOp::Assign, b, BinaryOp::Sub, axref, exec);
  factor += reduce_sum_abs(diff, exec);
  return std::max(factor, kSmall);
}

}  // namespace

double norm_factor(const LduMatrix& a, const Field& x, const Field& b, Executor& exec) {
  require_size(x, a.n_cells(), "norm_factor x");
  require_size(b, a.n_cells(), "norm_factor b");
  Field ax = amul(a, x, exec);
  return norm_factor_from(a, x, ax, b, exec);
}

void diag_precondition(Field& w, const Field& r, const Field& rd, Executor& exec) {
  if (w.size() != r.size() || w.size() != rd.size()) {
    throw FieldSizeError("diag_precondition: field sizes differ");
  }
  double* wp = w.data();
  const double* rp = r.data();
  const double* rdp = rd.data();
  const std::array buffers{w.handle(), r.handle(), rd.handle()};
  exec.run_kernel(
      "precondition wA=rD*rA", w.size(), buffers,
      [=](Index begin, Index end) {
        for (Index cell = begin; cell < end; ++cell) {
          wp[cell] = rdp[cell] * rp[cell];
        }
      },
      KernelCategory::Solve);
}

Field dilu_factor(const LduMatrix& a, Executor& exec) {
  const Mesh& mesh = a.mesh();
  Field rd(a.diag());
  const double* lower = a.lower().data();
  const double* upper = a.upper().data();
  const Index* own = mesh.owner().data();
  const Index* nei = mesh.neighbour().data();
  double* rdp = rd.data();
  const std::size_t n_faces = a.n_faces();
  const std::size_t n_cells = a.n_cells();
  const std::array buffers{rd.handle(), a.lower().handle(), a.upper().handle()};
  exec.run_pinned(
      "DILU calcReciprocalD", n_cells, Lane::Serial, buffers,
      [=](Index, Index) {
        for (Index f = 0; f < n_faces; ++f) {
          const double pivot = rdp[own[f]];
          if (std::abs(pivot) < kSmall || !std::isfinite(pivot)) {
            throw SingularPreconditionerError("DILU: zero pivot at cell " +
                                              std::to_string(own[f]));
          }
          rdp[nei[f]] -= upper[f] * lower[f] / pivot;
        }
        for (Index c = 0; c < n_cells; ++c) {
          if (std::abs(rdp[c]) < kSmall || !std::isfinite(rdp[c])) {
            throw SingularPreconditionerError("DILU: zero pivot at cell " + std::to_string(c));
          }
          rdp[c] = 1.0 / rdp[c];
        }
      },
      KernelCategory::Solve);
  return rd;
}

void dilu_apply(const LduMatrix& a, const Field& rd, const Field& r, Field& w, Executor& exec) {
  const std::size_t n = a.n_cells();
  require_size(rd, n, "dilu_apply rD");
  require_size(r, n, "dilu_apply r");
  require_size(w, n, "dilu_apply w");
  diag_precondition(w, r, rd, exec);

  const Mesh& mesh = a.mesh();
  const double* lower = a.lower().data();
  const double* upper = a.upper().data();
  const Index* own = mesh.owner().data();
  const Index* nei = mesh.neighbour().data();
  const Index* own_start = mesh.owner_start().data();
  const Index* losort = mesh.losort().data();
  const Index* losort_start = mesh.losort_start().data();
  const double* rdp = rd.data();
  double* wp = w.data();

  const std::array forward_buffers{w.handle(), rd.handle(), a.lower().handle()};
  exec.run_pinned(
      "DILU forward sweep", n, Lane::Serial, forward_buffers,
      [=](Index, Index) {
        for (Index c = 0; c < n; ++c) {
          double s = 0.0;
          for (Index k = losort_start[c]; k < losort_start[c + 1]; ++k) {
            const Index f = losort[k];
            s += lower[f] * wp[own[f]];
          }
          wp[c] -= rdp[c] * s;
        }
      },
      KernelCategory::Solve);

  const std::array backward_buffers{w.handle(), rd.handle(), a.upper().handle()};
  exec.run_pinned(
      "DILU backward sweep", n, Lane::Serial, backward_buffers,
      [=](Index, Index) {
        for (Index c = n; c-- > 0;) {
          double s = 0.0;
          for (Index f = own_start[c]; f < own_start[c + 1]; ++f) {
            s += upper[f] * wp[nei[f]];
          }
          wp[c] -= rdp[c] * s;
        }
      },
      KernelCategory::Solve);
}

namespace {

class Preconditioner {
 public:
  Preconditioner(const LduMatrix& a, PreconditionerKind kind, Executor& exec)
      : a_(a), kind_(kind), exec_(exec) {
    if (kind_ == PreconditionerKind::DILU) {
      rd_ = dilu_factor(a, exec);
    } else if (kind_ == PreconditionerKind::Diagonal) {
      rd_ = Field(a.n_cells(), "rD", a.diag().pool());
      const double* diag = a.diag().data();
      double* rdp = rd_.data();
      for (Index c = 0; c < a.n_cells(); ++c) {
        if (std::abs(diag[c]) < kSmall) {
          throw SingularPreconditionerError("diagonal: zero diagonal at cell " +
                                            std::to_string(c));
        }
      }
      const std::array buffers{rd_.handle(), a.diag().handle()};
      exec.run_kernel(
          "diagonal rD=1/diag", a.n_cells(), buffers,
          [=](Index begin, Index end) {
            for (Index c = begin; c < end; ++c) rdp[c] = 1.0 / diag[c];
          },
          KernelCategory::Solve);
    }
  }

  void apply(Field& w, const Field& r) {
    switch (kind_) {
      case PreconditionerKind::None:
        elementwise_binary(w, UpdateOp::Assign, r, exec_);
        break;
      case PreconditionerKind::Diagonal:
        diag_precondition(w, r, rd_, exec_);
        break;
      case PreconditionerKind::DILU:
        dilu_apply(a_, rd_, r, w, exec_);
        break;
    }
  }

 private:
  const LduMatrix& a_;
  PreconditionerKind kind_;
  Executor& exec_;
  Field rd_;
};

}  // namespace

SolveResult pbicgstab_solve(const LduMatrix& a, const Field& x0, const Field& b,
                            const SolverControls& controls, Executor& exec) {
  const std::size_t n = a.n_cells();
  require_size(x0, n, "pbicgstab x0");
  require_size(b, n, "pbicgstab b");
  if (!(controls.tolerance > 0.0) && !(controls.rel_tolerance > 0.0)) {
    throw ConfigError("pbicgstab: tolerance or rel_tolerance must be positive");
  }
  PoolAllocator* pool = x0.pool();

  SolveResult result{Field(x0), SolverPerf{}};
  Field& psi = result.x;
  SolverPerf& perf = result.perf;

  Field ya(n, "yA", pool);
  Field ra(n, "rA", pool);
  amul(a, psi, ya, exec);
  elementwise_ternary(ra, UpdateOp::Assign, b, BinaryOp::Sub, ya, exec);

  const double normf = norm_factor_from(a, psi, ya, b, exec);
  perf.norm_factor = normf;
  perf.initial_residual = reduce_sum_abs(ra, exec) / normf;
  perf.final_residual = perf.initial_residual;

  auto converged = [&](double residual) {
    return residual <= controls.tolerance ||
           (controls.rel_tolerance > 0.0 &&
            residual <= controls.rel_tolerance * perf.initial_residual);
  };

  if (!converged(perf.initial_residual) && controls.max_iterations > 0) {
    Preconditioner precon(a, controls.preconditioner, exec);

    Field aya(n, "AyA", pool);
    Field sa(n, "sA", pool);
    Field za(n, "zA", pool);
    Field ta(n, "tA", pool);
    Field pa(n, "pA", pool);
    Field ra0(n, "rA0", pool);
    elementwise_binary(ra0, UpdateOp::Assign, ra, exec);

    double ra0ra = 0.0;
    double alpha = 0.0;
    double omega = 0.0;

    double* pap = pa.data();
    double* sap = sa.data();
    double* psip = psi.data();
    double* rap = ra.data();
    const double* rap_c = ra.data();
    const double* ayap = aya.data();
    const double* yap = ya.data();
    const double* zap = za.data();
    const double* tap = ta.data();

    std::size_t iter = 0;
    do {
      const double ra0ra_old = ra0ra;
      ra0ra = reduce_dot(ra0, ra, exec);
      if (std::abs(ra0ra) < kSmall) {
        throw BreakdownError("pbicgstab: rho breakdown", iter);
      }

      if (iter == 0) {
        elementwise_binary(pa, UpdateOp::Assign, ra, exec);
      } else {
        if (std::abs(omega) < kSmall) {
          throw BreakdownError("pbicgstab: omega breakdown", iter);
        }
        const double beta = (ra0ra / ra0ra_old) * (alpha / omega);
        const std::array buffers{pa.handle(), ra.handle(), aya.handle()};
        exec.run_kernel(
            "Update pA", n, buffers,
            [=](Index begin, Index end) {
              for (Index cell = begin; cell < end; ++cell) {
                pap[cell] = rap_c[cell] + beta * (pap[cell] - omega * ayap[cell]);
              }
            },
            KernelCategory::Solve);
      }

      precon.apply(ya, pa);
      amul(a, ya, aya, exec);
      const double ra0aya = reduce_dot(ra0, aya, exec);
      if (std::abs(ra0aya) < kSmall) {
        throw BreakdownError("pbicgstab: (rA0, AyA) breakdown", iter);
      }
      alpha = ra0ra / ra0aya;

      {
        const std::array buffers{sa.handle(), ra.handle(), aya.handle()};
        exec.run_kernel(
            "Calculate sA", n, buffers,
            [=](Index begin, Index end) {
              for (Index cell = begin; cell < end; ++cell) {
                sap[cell] = rap_c[cell] - alpha * ayap[cell];
              }
            },
            KernelCategory::Solve);
      }

      const double s_residual = reduce_sum_abs(sa, exec) / normf;
      if (converged(s_residual)) {
        const std::array buffers{psi.handle(), ya.handle()};
        exec.run_kernel(
            "Update psi", n, buffers,
            [=](Index begin, Index end) {
              for (Index cell = begin; cell < end; ++cell) {
                psip[cell] += alpha * yap[cell];
              }
            },
            KernelCategory::Solve);
        ++iter;
        perf.final_residual = s_residual;
        break;
      }

      precon.apply(za, sa);
      amul(a, za, ta, exec);
      const double tata = reduce_dot(ta, ta, exec);
      if (tata < kSmall) {
        throw BreakdownError("pbicgstab: (tA, tA) breakdown", iter);
      }
      omega = reduce_dot(ta, sa, exec) / tata;

      {
        const std::array buffers{psi.handle(), ya.handle(), za.handle()};
        exec.run_kernel(
            "Update psi", n, buffers,
            [=](Index begin, Index end) {
              for (Index cell = begin; cell < end; ++cell) {
                psip[cell] += alpha * yap[cell] + omega * zap[cell];
              }
            },
            KernelCategory::Solve);
      }
      {
        const std::array buffers{ra.handle(), sa.handle(), ta.handle()};
        const double* sap_c = sa.data();
        exec.run_kernel(
            "Compute rA", n, buffers,
            [=](Index begin, Index end) {
              for (Index cell = begin; cell < end; ++cell) {
                rap[cell] = sap_c[cell] - omega * tap[cell];
              }
            },
            KernelCategory::Solve);
      }
      perf.final_residual = reduce_sum_abs(ra, exec) / normf;
      ++iter;
    } while (iter < controls.max_iterations && !converged(perf.final_residual));
    perf.n_iterations = iter;
  }
  perf.converged = converged(perf.final_residual);

  // Report the true residual of the returned solution.
  if (perf.n_iterations > 0) {
    amul(a, psi, ya, exec);
    elementwise_ternary(ra, UpdateOp::Assign, b, BinaryOp::Sub, ya, exec);
    perf.final_residual = reduce_sum_abs(ra, exec) / normf;
  }
  return result;
}

}  // namespace apuflow
